#include "esd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "esd/parallel.hpp"

namespace esd {

namespace {

SimConfig as_sim(const ConvergenceSetup& setup, double dt) {
    SimConfig sim;
    sim.t_end = setup.t_end;
    sim.dt = dt;
    sim.seed = setup.seed;
    sim.scheme = setup.scheme;
    sim.positivity = setup.positivity;
    sim.x0 = setup.x0;
    return sim;
}

double phi_of(TestFunction phi, const State& x) { return phi == TestFunction::X1 ? x[0] : x[2]; }

ErrorEstimate mean_and_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

// Streaming per-path QoI on the simulation grid.
struct QoiAccumulator {
    const std::vector<double>* times = nullptr;
    State prev = State::Zero();
    double int_demand = 0.0;
    double int_renewable = 0.0;
    double max_import = -std::numeric_limits<double>::infinity();

    void operator()(std::size_t k, const State& x) {
        if (k > 0) {
            const double h = (*times)[k] - (*times)[k - 1];
            int_demand += 0.5 * h * (prev[0] + x[0]);
            int_renewable += 0.5 * h * (prev[3] + x[3]);
        }
        max_import = std::max(max_import, x[2]);
        prev = x;
    }

    QoIRecord record() const {
        const double span = times->back() - times->front();
        return {int_demand / span, int_renewable / span, max_import};
    }
};

double normalized_index(double p, double p_plus, double p_minus, double q0, double q_plus, double q_minus) {
    if (q0 == 0.0) throw NumericFailure("undefined sensitivity index: baseline Q(p) = 0");
    return (q_plus - q_minus) / (p_plus - p_minus) * (p / q0);
}

ModelParams perturbed(const ModelParams& base, Param param, double factor) {
    ModelParams out = base;
    param_ref(out, param) *= factor;
    const auto report = validate_params(out);
    if (!report.ok()) {
        throw InvalidInput("perturbing " + std::string(param_name(param)) + " by factor " + std::to_string(factor) +
                           " violates: " + report.violations.front());
    }
    return out;
}

}  // namespace

// --- strong / weak error ---------------------------------------------------

PairedTerminals paired_terminals(const ConvergenceSetup& setup, double dt, const ModelParams& params,
                                 const NoiseIntensities& noise) {
    if (setup.n_paths < 2) throw InvalidInput("error estimation requires n_paths >= 2");
    if (setup.refinement == 0) throw InvalidInput("refinement must be >= 1");
    const SimConfig sim = as_sim(setup, dt);
    sim.validate();
    require_valid(params);
    const std::size_t n = sim.steps();

    PairedTerminals out;
    out.coarse.resize(setup.n_paths);
    out.reference.resize(setup.n_paths);
    for_each_index(setup.n_paths, setup.threads, [&](std::size_t p) {
        const auto grid = generate_brownian(setup.seed, n, setup.refinement, dt, p);
        out.coarse[p] = integrate_terminal(setup.x0, params, noise, setup.scheme, setup.positivity, dt,
                                           grid.coarse_increments(), p);
        out.reference[p] = integrate_terminal(setup.x0, params, noise, setup.scheme, setup.positivity,
                                              grid.dt_fine(), grid.fine_increments(), p);
    });
    return out;
}

ErrorEstimate strong_error(const PairedTerminals& pairs) {
    std::vector<double> sq(pairs.coarse.size());
    for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = (pairs.coarse[k] - pairs.reference[k]).squaredNorm();
    return mean_and_se(sq);
}

ErrorEstimate strong_error(const ConvergenceSetup& setup, double dt, const ModelParams& params,
                           const NoiseIntensities& noise) {
    return strong_error(paired_terminals(setup, dt, params, noise));
}

std::string_view test_function_name(TestFunction phi) { return phi == TestFunction::X1 ? "X1" : "X3"; }

TestFunction test_function_from_name(std::string_view name) {
    if (name == "X1" || name == "x1") return TestFunction::X1;
    if (name == "X3" || name == "x3") return TestFunction::X3;
    throw InvalidInput("unknown test function '" + std::string(name) + "' (expected X1|X3)");
}

ErrorEstimate weak_error(TestFunction phi, const PairedTerminals& pairs) {
    std::vector<double> diff(pairs.coarse.size());
    for (std::size_t k = 0; k < diff.size(); ++k) {
        diff[k] = phi_of(phi, pairs.coarse[k]) - phi_of(phi, pairs.reference[k]);
    }
    const auto est = mean_and_se(diff);
    return {std::abs(est.value), est.std_error};
}

ErrorEstimate weak_error(TestFunction phi, const ConvergenceSetup& setup, double dt, const ModelParams& params,
                         const NoiseIntensities& noise) {
    return weak_error(phi, paired_terminals(setup, dt, params, noise));
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidInput("log_log_slope: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidInput("log_log_slope: values must be positive");
        sx += std::log(x[i]);
        sy += std::log(y[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw InvalidInput("log_log_slope: x values must differ");
    return sxy / sxx;
}

ErrorTable convergence_study(const ConvergenceSetup& setup, const std::vector<double>& dt_list,
                             const ModelParams& params, const NoiseIntensities& noise) {
    if (dt_list.empty()) throw InvalidInput("convergence_study: empty dt list");
    for (std::size_t i = 1; i < dt_list.size(); ++i) {
        if (!(dt_list[i] < dt_list[i - 1])) throw InvalidInput("convergence_study: dt list must be strictly decreasing");
    }

    ErrorTable table;
    table.scheme = setup.scheme;
    table.n_paths = setup.n_paths;
    for (double dt : dt_list) {
        const auto pairs = paired_terminals(setup, dt, params, noise);
        const auto strong = strong_error(pairs);
        table.dt_values.push_back(dt);
        table.strong_errors.push_back(strong.value);
        table.strong_std_errors.push_back(strong.std_error);
        table.weak_errors_x1.push_back(weak_error(TestFunction::X1, pairs).value);
        table.weak_errors_x3.push_back(weak_error(TestFunction::X3, pairs).value);
    }
    const bool all_positive =
        std::all_of(table.strong_errors.begin(), table.strong_errors.end(), [](double e) { return e > 0.0; });
    if (table.dt_values.size() >= 2 && all_positive) {
        table.mean_square_slope = log_log_slope(table.dt_values, table.strong_errors);
        table.fitted_rate = 0.5 * *table.mean_square_slope;
    }
    return table;
}

// --- ensemble statistics ---------------------------------------------------

MomentSeries moment_estimate(double p, const SimConfig& sim, std::size_t n_paths, const ModelParams& params,
                             const NoiseIntensities& noise, unsigned threads) {
    if (!(p >= 2.0)) throw InvalidInput("moment_estimate: p >= 2 required");
    if (n_paths == 0) throw InvalidInput("moment_estimate: n_paths >= 1 required");
    sim.validate();
    require_valid(params);
    const std::size_t n = sim.steps();

    SeriesStats stats = reduce_paths<SeriesStats>(
        n_paths, threads, [&] { return SeriesStats(n + 1, 1); },
        [&](std::size_t path, SeriesStats& acc) {
            const auto grid = generate_brownian(sim.seed, n, 1, sim.dt, path);
            acc.begin_sample();
            integrate(sim.x0, params, noise, sim.scheme, sim.positivity, sim.dt, grid.fine_increments(),
                      [&](std::size_t k, const State& x) {
                          Eigen::Matrix<double, 1, 1> v;
                          v(0) = std::pow(x.norm(), p);
                          acc.add(k, v);
                      },
                      path);
        },
        [](SeriesStats& into, const SeriesStats& from) { into.merge(from); });

    MomentSeries out;
    out.times = time_grid(sim.t_end, sim.dt, n);
    const auto var = stats.variance();
    out.moment.resize(n + 1);
    out.std_error.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        out.moment[k] = stats.mean()(r, 0);
        out.std_error[k] = std::sqrt(var(r, 0) / static_cast<double>(n_paths));
        if (k == 0 || out.moment[k] > out.sup) {
            out.sup = out.moment[k];
            out.sup_index = k;
        }
    }
    out.sup_std_error = out.std_error[out.sup_index];

    const std::size_t start = (3 * n) / 4;
    double mt = 0.0, mm = 0.0, mean_se = 0.0;
    const double count = static_cast<double>(n + 1 - start);
    for (std::size_t k = start; k <= n; ++k) {
        mt += out.times[k];
        mm += out.moment[k];
        mean_se += out.std_error[k];
    }
    mt /= count;
    mm /= count;
    mean_se /= count;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = start; k <= n; ++k) {
        sxy += (out.times[k] - mt) * (out.moment[k] - mm);
        sxx += (out.times[k] - mt) * (out.times[k] - mt);
    }
    out.tail_slope = sxx > 0.0 ? sxy / sxx : 0.0;
    const double rise = out.tail_slope * (out.times[n] - out.times[start]);
    // Relative slack keeps noiseless flat series from failing on rounding.
    out.plateau = std::isfinite(out.sup) && rise <= 4.0 * mean_se + 1e-9 * std::abs(mm);
    return out;
}

double trapezoid_average(const std::vector<double>& times, const std::vector<double>& values) {
    if (times.size() != values.size() || times.size() < 2) throw InvalidInput("trapezoid_average: need >= 2 samples");
    double integral = 0.0;
    for (std::size_t k = 1; k < times.size(); ++k) {
        integral += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
    }
    return integral / (times.back() - times.front());
}

PersistenceEstimate persistence_estimate(const Vector4d& c, const SimConfig& sim, std::size_t n_paths,
                                         const ModelParams& params, const NoiseIntensities& noise,
                                         unsigned threads) {
    if (!c.allFinite() || !(c.minCoeff() > 0.0)) throw InvalidInput("persistence_estimate: c_i > 0 required");
    const auto summary = simulate_ensemble(sim, params, noise, n_paths, threads);

    PersistenceEstimate out;
    std::vector<double> column(summary.times.size());
    for (int i = 0; i < 4; ++i) {
        for (std::size_t k = 0; k < column.size(); ++k) column[k] = summary.mean(static_cast<Eigen::Index>(k), i);
        out.component_averages[i] = trapezoid_average(summary.times, column);
    }
    out.weighted_average = c.dot(out.component_averages);
    return out;
}

// --- QoIs ----------------------------------------------------------------

std::string_view qoi_name(Qoi q) {
    switch (q) {
        case Qoi::AvgDemand: return "avg_demand";
        case Qoi::AvgRenewable: return "avg_renewable";
        case Qoi::MaxImport: return "max_import";
    }
    return "?";
}

Qoi qoi_from_name(std::string_view name) {
    for (Qoi q : kAllQois) {
        if (qoi_name(q) == name) return q;
    }
    throw InvalidInput("unknown quantity of interest '" + std::string(name) + "'");
}

double QoIRecord::get(Qoi q) const {
    switch (q) {
        case Qoi::AvgDemand: return avg_demand;
        case Qoi::AvgRenewable: return avg_renewable;
        case Qoi::MaxImport: return max_import;
    }
    return 0.0;
}

QoIRecord compute_qoi(const Trajectory& traj) {
    if (traj.states.size() < 2 || traj.states.size() != traj.times.size()) {
        throw InvalidInput("compute_qoi: trajectory needs >= 2 aligned samples");
    }
    QoiAccumulator acc{&traj.times};
    for (std::size_t k = 0; k < traj.states.size(); ++k) acc(k, traj.states[k]);
    return acc.record();
}

QoIRecord ensemble_qoi(const SimConfig& sim, std::size_t n_paths, const ModelParams& params,
                       const NoiseIntensities& noise, unsigned threads) {
    if (n_paths == 0) throw InvalidInput("ensemble_qoi: n_paths >= 1 required");
    sim.validate();
    require_valid(params);
    const std::size_t n = sim.steps();
    const auto times = time_grid(sim.t_end, sim.dt, n);

    struct Acc {
        Vector4d sum = Vector4d::Zero();  // demand, renewable, import, unused
    };
    const Acc total = reduce_paths<Acc>(
        n_paths, threads, [] { return Acc{}; },
        [&](std::size_t path, Acc& acc) {
            const auto grid = generate_brownian(sim.seed, n, 1, sim.dt, path);
            QoiAccumulator q{&times};
            integrate(sim.x0, params, noise, sim.scheme, sim.positivity, sim.dt, grid.fine_increments(), q, path);
            const auto rec = q.record();
            acc.sum += Vector4d(rec.avg_demand, rec.avg_renewable, rec.max_import, 0.0);
        },
        [](Acc& into, const Acc& from) { into.sum += from.sum; });

    const double np = static_cast<double>(n_paths);
    return {total.sum[0] / np, total.sum[1] / np, total.sum[2] / np};
}

double terminal_band_width(const SimConfig& sim, std::size_t n_paths, const ModelParams& params,
                           const NoiseIntensities& noise, Component component, unsigned threads) {
    const auto summary = simulate_ensemble(sim, params, noise, n_paths, threads);
    const auto last = summary.max.rows() - 1;
    return summary.max(last, component) - summary.min(last, component);
}

// --- sensitivity -----------------------------------------------------------

SensitivityIndex sensitivity_index(Param param, const ModelParams& base, double delta_fraction,
                                   const std::function<double(const ModelParams&)>& qoi) {
    if (!(delta_fraction > 0.0) || !(delta_fraction < 1.0)) throw InvalidInput("delta_fraction must be in (0, 1)");
    require_valid(base);
    const ModelParams plus = perturbed(base, param, 1.0 + delta_fraction);
    const ModelParams minus = perturbed(base, param, 1.0 - delta_fraction);

    SensitivityIndex out;
    out.baseline_q = qoi(base);
    out.q_plus = qoi(plus);
    out.q_minus = qoi(minus);
    out.s_index = normalized_index(param_value(base, param), param_value(plus, param), param_value(minus, param),
                                   out.baseline_q, out.q_plus, out.q_minus);
    return out;
}

SensitivityResult sensitivity_index(Param param, Qoi qoi, const SensitivitySetup& setup, const ModelParams& params,
                                    const NoiseIntensities& noise) {
    const auto idx = sensitivity_index(param, params, setup.delta_fraction, [&](const ModelParams& m) {
        return ensemble_qoi(setup.sim, setup.n_paths, m, noise, setup.threads).get(qoi);
    });
    return {param, qoi, idx.baseline_q, idx.s_index, setup.delta_fraction};
}

const SensitivityCell& SensitivityTable::cell(Param p, Qoi q) const {
    for (const auto& c : cells) {
        if (c.param == p && c.qoi == q) return c;
    }
    throw InvalidInput("sensitivity table has no cell for " + std::string(param_name(p)));
}

std::size_t SensitivityTable::rank_of(Param p, Qoi q) const {
    const auto& order = ranking[static_cast<std::size_t>(q)];
    const auto it = std::find(order.begin(), order.end(), p);
    if (it == order.end()) throw InvalidInput("parameter not ranked");
    return static_cast<std::size_t>(it - order.begin()) + 1;
}

SensitivityTable sensitivity_sweep(const SensitivitySetup& setup, const ModelParams& params,
                                   const NoiseIntensities& noise, const std::vector<Param>& evaluation_order) {
    if (!(setup.delta_fraction > 0.0) || !(setup.delta_fraction < 1.0)) {
        throw InvalidInput("delta_fraction must be in (0, 1)");
    }
    require_valid(params);

    SensitivityTable table;
    table.baseline = ensemble_qoi(setup.sim, setup.n_paths, params, noise, setup.threads);

    std::map<std::pair<int, int>, SensitivityCell> cells;
    for (Param param : evaluation_order) {
        std::optional<QoIRecord> q_plus, q_minus;
        std::string error;
        ModelParams plus, minus;
        try {
            plus = perturbed(params, param, 1.0 + setup.delta_fraction);
            minus = perturbed(params, param, 1.0 - setup.delta_fraction);
            q_plus = ensemble_qoi(setup.sim, setup.n_paths, plus, noise, setup.threads);
            q_minus = ensemble_qoi(setup.sim, setup.n_paths, minus, noise, setup.threads);
        } catch (const std::exception& e) {
            error = e.what();
        }
        for (Qoi q : kAllQois) {
            SensitivityCell cell{param, q, std::nullopt, error};
            if (error.empty()) {
                try {
                    const double s =
                        normalized_index(param_value(params, param), param_value(plus, param), param_value(minus, param),
                                         table.baseline.get(q), q_plus->get(q), q_minus->get(q));
                    cell.result = SensitivityResult{param, q, table.baseline.get(q), s, setup.delta_fraction};
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
            }
            cells[{static_cast<int>(param), static_cast<int>(q)}] = std::move(cell);
        }
    }

    for (auto& [key, cell] : cells) table.cells.push_back(std::move(cell));

    for (Qoi q : kAllQois) {
        std::vector<const SensitivityCell*> column;
        for (const auto& c : table.cells) {
            if (c.qoi == q) column.push_back(&c);
        }
        std::stable_sort(column.begin(), column.end(), [](const SensitivityCell* a, const SensitivityCell* b) {
            if (a->result.has_value() != b->result.has_value()) return a->result.has_value();
            if (!a->result) return false;
            return std::abs(a->result->s_index) > std::abs(b->result->s_index);
        });
        auto& order = table.ranking[static_cast<std::size_t>(q)];
        for (const auto* c : column) order.push_back(c->param);
    }
    return table;
}

}  // namespace esd
