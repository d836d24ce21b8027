#include "esd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "esd/config.hpp"
#include "esd/csv.hpp"

namespace esd {

namespace {

namespace fs = std::filesystem;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::optional<std::string> scheme;
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<std::size_t> paths;
    std::optional<std::string> positivity;
    std::optional<double> eps;
    std::optional<unsigned> threads;

    std::optional<std::string> at;
    std::optional<std::string> phi;
    std::optional<double> p;
    std::optional<std::string> qoi;
};

void add_common_options(CLI::App& sub, Overrides& o) {
    sub.add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub.add_option("--seed", o.seed, "master seed (overrides config and ESD_SEED)");
    sub.add_option("--out", o.out_dir, "output directory")->capture_default_str();
    sub.add_option("--scheme", o.scheme, "em | milstein")->check(CLI::IsMember({"em", "milstein"}));
    sub.add_option("--dt", o.dt, "time step");
    sub.add_option("--t-end", o.t_end, "horizon");
    sub.add_option("--paths", o.paths, "number of Monte Carlo paths");
    sub.add_option("--positivity", o.positivity, "projection | log | none")
        ->check(CLI::IsMember({"projection", "log", "none"}));
    sub.add_option("--eps", o.eps, "projection floor");
    sub.add_option("--threads", o.threads, "worker threads (0 = hardware concurrency)");
}

std::uint64_t parse_seed_env(const char* text) {
    const std::string s(text);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(std::string(kSeedEnvVar) + " must be an unsigned integer (got '" + s + "')");
    }
    try {
        return std::stoull(s);
    } catch (const std::out_of_range&) {
        throw ConfigError(std::string(kSeedEnvVar) + " out of range for a 64-bit seed");
    }
}

/// Precedence: config file < ESD_SEED < --seed.
RunConfig resolve_config(const std::string& command, const Overrides& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
    if (const char* env = std::getenv(kSeedEnvVar)) cfg.sim.seed = parse_seed_env(env);
    if (o.seed) cfg.sim.seed = *o.seed;
    if (o.scheme) cfg.sim.scheme = scheme_from_name(*o.scheme);
    if (o.positivity) cfg.sim.positivity.kind = positivity_from_name(*o.positivity);
    if (o.eps) cfg.sim.positivity.eps = *o.eps;
    if (o.threads) cfg.threads = *o.threads;

    const bool convergence_cmd = command == "converge" || command == "weak-error";
    if (convergence_cmd) {
        if (o.dt) cfg.convergence.dt_list = {*o.dt, *o.dt / 2.0, *o.dt / 4.0};
        if (o.t_end) cfg.convergence.t_end = *o.t_end;
        if (o.paths) cfg.convergence.n_paths = *o.paths;
    } else {
        if (o.dt) cfg.sim.dt = *o.dt;
        if (o.t_end) cfg.sim.t_end = *o.t_end;
        if (o.paths) {
            if (command == "sensitivity") {
                cfg.sensitivity.n_paths = *o.paths;
            } else {
                cfg.ensemble_paths = *o.paths;
            }
        }
    }
    if (o.at) cfg.stability.at = *o.at == "trivial" ? "origin" : *o.at;
    if (o.phi) cfg.convergence.phi = test_function_from_name(*o.phi);
    if (o.p) cfg.moment_p = *o.p;
    if (o.qoi) cfg.sensitivity.qoi = qoi_from_name(*o.qoi);
    validate_config(cfg);
    return cfg;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string sanitize(std::string text) {
    std::replace(text.begin(), text.end(), ',', ';');
    std::replace(text.begin(), text.end(), '\n', ' ');
    return text;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

class Emitter {
public:
    Emitter(std::string command, const RunConfig& cfg, fs::path dir, std::ostream& out)
        : command_(std::move(command)), cfg_(cfg), dir_(std::move(dir)), out_(out) {}

    CsvArtifact artifact(const std::string& file, std::vector<std::string> header) const {
        CsvArtifact a;
        a.path = dir_ / file;
        a.metadata = {std::string("esdsim_version=") + kVersion, "command=" + command_,
                      "seed=" + std::to_string(cfg_.sim.seed), "config_hash=" + hex16(config_hash(cfg_))};
        a.header = std::move(header);
        return a;
    }

    void write(const CsvArtifact& a) const {
        write_csv(a);
        out_ << "wrote " << a.path.string() << " (" << a.rows.size() << " rows)\n";
    }

    std::ostream& out() const { return out_; }

private:
    std::string command_;
    const RunConfig& cfg_;
    fs::path dir_;
    std::ostream& out_;
};

std::vector<std::string> component_columns(const std::vector<std::string>& stats) {
    std::vector<std::string> cols;
    for (int i = 1; i <= 4; ++i) {
        for (const auto& s : stats) cols.push_back("X" + std::to_string(i) + "_" + s);
    }
    return cols;
}

void cmd_simulate(const RunConfig& cfg, const Emitter& em) {
    const Trajectory traj = simulate(cfg.sim, cfg.model, cfg.noise);
    auto a = em.artifact("trajectory.csv", {"t", "X1", "X2", "X3", "X4", "clamps"});
    a.metadata.push_back("scheme=" + std::string(scheme_name(cfg.sim.scheme)));
    a.metadata.push_back("positivity=" + std::string(positivity_name(cfg.sim.positivity.kind)));
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const State& x = traj.states[k];
        a.rows.push_back({format_double(traj.times[k]), format_double(x(0)), format_double(x(1)),
                          format_double(x(2)), format_double(x(3)), std::to_string(traj.cumulative_clamps[k])});
    }
    em.write(a);
    em.out() << "clamps applied: " << traj.applied_clamps << "\n";
}

void cmd_ensemble(const RunConfig& cfg, const Emitter& em) {
    const EnsembleSummary s = simulate_ensemble(cfg.sim, cfg.model, cfg.noise, cfg.ensemble_paths, cfg.threads);
    std::vector<std::string> header{"t"};
    for (const auto& c : component_columns({"mean", "var", "min", "max"})) header.push_back(c);
    auto a = em.artifact("ensemble.csv", header);
    a.metadata.push_back("n_paths=" + std::to_string(s.n_paths));
    a.metadata.push_back("total_clamps=" + std::to_string(s.total_clamps));
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        std::vector<std::string> row{format_double(s.times[k])};
        for (int c = 0; c < 4; ++c) {
            row.push_back(format_double(s.mean(r, c)));
            row.push_back(format_double(s.variance(r, c)));
            row.push_back(format_double(s.min(r, c)));
            row.push_back(format_double(s.max(r, c)));
        }
        a.rows.push_back(std::move(row));
    }
    em.write(a);
}

void cmd_equilibria(const RunConfig& cfg, const Emitter& em) {
    require_valid(cfg.model);
    auto a = em.artifact("equilibria.csv", {"branch", "X1", "X2", "X3", "X4", "feasible", "residual", "reason"});
    for (const auto& eq : find_equilibria(cfg.model)) {
        a.rows.push_back({std::string(branch_name(eq.branch)), format_double(eq.point(0)), format_double(eq.point(1)),
                          format_double(eq.point(2)), format_double(eq.point(3)), fmt_bool(eq.feasible),
                          format_double(eq.residual), sanitize(eq.infeasibility_reason.value_or(""))});
    }
    em.write(a);
}

void cmd_stability(const RunConfig& cfg, const Emitter& em) {
    require_valid(cfg.model);
    const Branch target = cfg.stability.at == "origin" ? Branch::Trivial
                          : cfg.stability.at == "no-import" ? Branch::NoImport
                                                             : Branch::ImportThreshold;
    const auto equilibria = find_equilibria(cfg.model);
    const Equilibrium* chosen = nullptr;
    const Equilibrium* infeasible = nullptr;
    for (const auto& eq : equilibria) {
        if (eq.branch != target) continue;
        if (eq.feasible) {
            chosen = &eq;
            break;
        }
        if (!infeasible) infeasible = &eq;
    }
    if (!chosen) {
        std::string msg = "no feasible equilibrium on branch '" + cfg.stability.at + "'";
        if (infeasible && infeasible->infeasibility_reason) msg += ": " + *infeasible->infeasibility_reason;
        throw InvalidInput(msg);
    }
    const Matrix4d P = cfg.stability.p_diag.asDiagonal();
    const StabilityReport rep = classify_equilibrium(cfg.model, *chosen, cfg.noise, P);

    std::vector<std::complex<double>> eig(rep.eigenvalues.data(), rep.eigenvalues.data() + 4);
    std::stable_sort(eig.begin(), eig.end(), [](const auto& l, const auto& r) {
        return l.real() != r.real() ? l.real() > r.real() : l.imag() > r.imag();
    });

    std::vector<std::string> header{"equilibrium", "X1", "X2", "X3", "X4"};
    for (int i = 1; i <= 4; ++i) {
        header.push_back("eig" + std::to_string(i) + "_re");
        header.push_back("eig" + std::to_string(i) + "_im");
    }
    for (const char* h : {"max_real_part", "spectral_verdict", "lmi_feasible", "lmi_max_eigenvalue", "alpha",
                          "decay_rate_bound"}) {
        header.emplace_back(h);
    }
    auto a = em.artifact("stability.csv", header);
    std::vector<std::string> row{cfg.stability.at};
    for (int i = 0; i < 4; ++i) row.push_back(format_double(chosen->point(i)));
    for (const auto& z : eig) {
        row.push_back(format_double(z.real()));
        row.push_back(format_double(z.imag()));
    }
    row.push_back(format_double(rep.max_real_part));
    row.emplace_back(verdict_name(rep.verdict));
    row.push_back(fmt_bool(rep.lmi_feasible));
    row.push_back(format_double(rep.lmi_max_eigenvalue));
    row.push_back(fmt_opt(rep.alpha));
    row.push_back(fmt_opt(rep.decay_rate_bound));
    a.rows.push_back(std::move(row));
    em.write(a);
    em.out() << "verdict: " << verdict_name(rep.verdict) << ", lmi feasible: " << fmt_bool(rep.lmi_feasible)
             << "\n";
}

ConvergenceSetup convergence_setup(const RunConfig& cfg, Scheme scheme) {
    ConvergenceSetup s;
    s.scheme = scheme;
    s.positivity = cfg.sim.positivity;
    s.x0 = cfg.sim.x0;
    s.t_end = cfg.convergence.t_end;
    s.refinement = cfg.convergence.refinement;
    s.n_paths = cfg.convergence.n_paths;
    s.seed = cfg.sim.seed;
    s.threads = cfg.threads;
    return s;
}

void cmd_converge(const RunConfig& cfg, const Emitter& em) {
    auto a = em.artifact("convergence.csv", {"scheme", "dt", "strong_error", "strong_std_error", "weak_error_X1",
                                             "weak_error_X3", "fitted_rate", "n_paths"});
    a.metadata.push_back("t_end=" + format_double(cfg.convergence.t_end));
    a.metadata.push_back("refinement=" + std::to_string(cfg.convergence.refinement));
    for (Scheme scheme : {Scheme::EulerMaruyama, Scheme::Milstein}) {
        const ErrorTable t =
            convergence_study(convergence_setup(cfg, scheme), cfg.convergence.dt_list, cfg.model, cfg.noise);
        for (std::size_t i = 0; i < t.dt_values.size(); ++i) {
            a.rows.push_back({std::string(scheme_name(scheme)), format_double(t.dt_values[i]),
                              format_double(t.strong_errors[i]), format_double(t.strong_std_errors[i]),
                              format_double(t.weak_errors_x1[i]), format_double(t.weak_errors_x3[i]),
                              fmt_opt(t.fitted_rate), std::to_string(t.n_paths)});
        }
        em.out() << scheme_name(scheme) << " fitted rate: " << fmt_opt(t.fitted_rate) << "\n";
    }
    em.write(a);
}

void cmd_weak_error(const RunConfig& cfg, const Emitter& em) {
    const ConvergenceSetup setup = convergence_setup(cfg, cfg.sim.scheme);
    const TestFunction phi = cfg.convergence.phi;
    auto a = em.artifact("weak_error.csv", {"scheme", "phi", "dt", "weak_error", "std_error", "n_paths"});
    a.metadata.push_back("t_end=" + format_double(cfg.convergence.t_end));
    a.metadata.push_back("refinement=" + std::to_string(cfg.convergence.refinement));
    for (double dt : cfg.convergence.dt_list) {
        const ErrorEstimate e = weak_error(phi, setup, dt, cfg.model, cfg.noise);
        a.rows.push_back({std::string(scheme_name(setup.scheme)), std::string(test_function_name(phi)),
                          format_double(dt), format_double(e.value), format_double(e.std_error),
                          std::to_string(setup.n_paths)});
    }
    em.write(a);
}

void cmd_moments(const RunConfig& cfg, const Emitter& em) {
    const MomentSeries m =
        moment_estimate(cfg.moment_p, cfg.sim, cfg.ensemble_paths, cfg.model, cfg.noise, cfg.threads);
    auto a = em.artifact("moments.csv", {"t", "moment", "std_error"});
    a.metadata.push_back("p=" + format_double(cfg.moment_p));
    a.metadata.push_back("n_paths=" + std::to_string(cfg.ensemble_paths));
    a.metadata.push_back("sup=" + format_double(m.sup));
    a.metadata.push_back("sup_t=" + format_double(m.times[m.sup_index]));
    a.metadata.push_back("sup_std_error=" + format_double(m.sup_std_error));
    a.metadata.push_back("tail_slope=" + format_double(m.tail_slope));
    a.metadata.push_back("plateau=" + fmt_bool(m.plateau));
    for (std::size_t k = 0; k < m.times.size(); ++k) {
        a.rows.push_back({format_double(m.times[k]), format_double(m.moment[k]), format_double(m.std_error[k])});
    }
    em.write(a);
    em.out() << "sup E||X||^p = " << format_double(m.sup) << ", plateau: " << fmt_bool(m.plateau) << "\n";
}

void cmd_persistence(const RunConfig& cfg, const Emitter& em) {
    const auto& blk = cfg.persistence;
    const PersistenceBound bound = persistence_bound(blk.spec, cfg.noise);
    const DriftConditionReport drift_check =
        check_persistence_drift_condition(cfg.model, blk.spec, blk.box, blk.grid_intervals);
    const PersistenceEstimate est =
        persistence_estimate(blk.spec.c, cfg.sim, cfg.ensemble_paths, cfg.model, cfg.noise, cfg.threads);

    auto a = em.artifact("persistence.csv", {"quantity", "value"});
    a.metadata.push_back("n_paths=" + std::to_string(cfg.ensemble_paths));
    auto add = [&](const std::string& k, const std::string& v) { a.rows.push_back({k, v}); };
    add("bound_status", std::string(bound_status_name(bound.status)));
    add("noise_term", format_double(bound.noise_term));
    add("bound", fmt_opt(bound.value));
    add("drift_condition_holds", fmt_bool(drift_check.holds));
    add("drift_condition_min_margin", format_double(drift_check.min_margin));
    add("drift_condition_points", std::to_string(drift_check.points));
    add("empirical_weighted_average", format_double(est.weighted_average));
    for (int i = 0; i < 4; ++i) {
        add("empirical_avg_X" + std::to_string(i + 1), format_double(est.component_averages(i)));
    }
    em.write(a);
    em.out() << "bound: " << fmt_opt(bound.value) << " (" << bound_status_name(bound.status)
             << "), empirical: " << format_double(est.weighted_average) << "\n";
}

void cmd_sensitivity(const RunConfig& cfg, const Emitter& em) {
    SensitivitySetup setup;
    setup.sim = cfg.sim;
    setup.n_paths = cfg.sensitivity.n_paths;
    setup.delta_fraction = cfg.sensitivity.delta_fraction;
    setup.threads = cfg.threads;
    const SensitivityTable table = sensitivity_sweep(setup, cfg.model, cfg.noise);

    auto a = em.artifact("sensitivity.csv", {"parameter", "qoi", "baseline_q", "s_index", "rank", "error"});
    a.metadata.push_back("n_paths=" + std::to_string(setup.n_paths));
    a.metadata.push_back("delta_fraction=" + format_double(setup.delta_fraction));
    std::size_t failures = 0;
    for (const auto& cell : table.cells) {
        const std::string rank = std::to_string(table.rank_of(cell.param, cell.qoi));
        if (cell.result) {
            a.rows.push_back({std::string(param_name(cell.param)), std::string(qoi_name(cell.qoi)),
                              format_double(cell.result->baseline_q), format_double(cell.result->s_index), rank,
                              ""});
        } else {
            ++failures;
            a.rows.push_back({std::string(param_name(cell.param)), std::string(qoi_name(cell.qoi)),
                              format_double(table.baseline.get(cell.qoi)), "nan", rank, sanitize(cell.error)});
        }
    }
    em.write(a);
    const Qoi q = cfg.sensitivity.qoi;
    const auto& order = table.ranking[static_cast<std::size_t>(q)];
    em.out() << "top parameters for " << qoi_name(q) << ":";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, order.size()); ++i) em.out() << " " << param_name(order[i]);
    em.out() << "\n";
    if (failures > 0) em.out() << failures << " cell(s) failed; see the error column\n";
}

using Command = std::function<void(const RunConfig&, const Emitter&)>;

struct Subcommand {
    const char* name;
    const char* help;
    Command run;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stochastic energy supply-demand simulator", "esdsim"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    const std::vector<Subcommand> commands = {
        {"simulate", "single trajectory (trajectory.csv)", cmd_simulate},
        {"ensemble", "per-time ensemble statistics (ensemble.csv)", cmd_ensemble},
        {"equilibria", "equilibrium branches (equilibria.csv)", cmd_equilibria},
        {"stability", "linearization and LMI check (stability.csv)", cmd_stability},
        {"converge", "strong and weak errors for both schemes (convergence.csv)", cmd_converge},
        {"weak-error", "weak error for one scheme and test function (weak_error.csv)", cmd_weak_error},
        {"moments", "p-th moment over time (moments.csv)", cmd_moments},
        {"persistence", "persistence bound and time averages (persistence.csv)", cmd_persistence},
        {"sensitivity", "normalized sensitivity matrix (sensitivity.csv)", cmd_sensitivity},
    };

    Overrides o;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common_options(*sub, o);
        const std::string name = c.name;
        if (name == "stability") {
            sub->add_option("--at", o.at, "origin | no-import | import-threshold")
                ->check(CLI::IsMember({"origin", "trivial", "no-import", "import-threshold"}));
        } else if (name == "weak-error") {
            sub->add_option("--phi", o.phi, "X1 | X3")->check(CLI::IsMember({"X1", "X3"}));
        } else if (name == "moments") {
            sub->add_option("--p", o.p, "moment order");
        } else if (name == "sensitivity") {
            sub->add_option("--qoi", o.qoi, "quantity summarized on stdout")
                ->check(CLI::IsMember({"avg_demand", "avg_renewable", "max_import"}));
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ExitOk : ExitUsage;
    }

    const CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    try {
        const RunConfig cfg = resolve_config(command, o);
        const fs::path dir = o.out_dir;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
        const Emitter emitter(command, cfg, dir, out);
        for (const auto& c : commands) {
            if (command == c.name) c.run(cfg, emitter);
        }
        return ExitOk;
    } catch (const BlowUpError& e) {
        err << "esdsim " << command << ": blow-up at step " << e.step() << " on path " << e.path() << ": "
            << e.what() << "\n";
        return ExitNumeric;
    } catch (const NumericFailure& e) {
        err << "esdsim " << command << ": numeric failure: " << e.what() << "\n";
        return ExitNumeric;
    } catch (const InvalidInput& e) {
        err << "esdsim " << command << ": " << e.what() << "\n";
        return ExitUsage;
    } catch (const IoError& e) {
        err << "esdsim " << command << ": " << e.what() << "\n";
        return ExitUsage;
    } catch (const std::exception& e) {
        err << "esdsim " << command << ": " << e.what() << "\n";
        return ExitUsage;
    }
}

}  // namespace esd
