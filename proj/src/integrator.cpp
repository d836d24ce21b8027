#include "esd/integrator.hpp"

#include <limits>

#include "esd/parallel.hpp"

namespace esd {

std::string_view scheme_name(Scheme s) { return s == Scheme::Milstein ? "milstein" : "em"; }

Scheme scheme_from_name(std::string_view name) {
    if (name == "em" || name == "euler-maruyama") return Scheme::EulerMaruyama;
    if (name == "milstein") return Scheme::Milstein;
    throw InvalidInput("unknown scheme '" + std::string(name) + "' (expected em|milstein)");
}

std::string_view positivity_name(PositivityPolicy::Kind k) {
    switch (k) {
        case PositivityPolicy::Kind::Projection: return "projection";
        case PositivityPolicy::Kind::LogDomain: return "log";
        case PositivityPolicy::Kind::None: return "none";
    }
    return "?";
}

PositivityPolicy::Kind positivity_from_name(std::string_view name) {
    if (name == "projection") return PositivityPolicy::Kind::Projection;
    if (name == "log" || name == "log-domain") return PositivityPolicy::Kind::LogDomain;
    if (name == "none") return PositivityPolicy::Kind::None;
    throw InvalidInput("unknown positivity policy '" + std::string(name) + "' (expected projection|log|none)");
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

void SimConfig::validate() const {
    if (!std::isfinite(t_end) || !(t_end > 0.0)) throw InvalidInput("sim.t_end > 0 required");
    if (!std::isfinite(dt) || !(dt > 0.0) || dt > t_end) throw InvalidInput("sim.dt in (0, t_end] required");
    const double ratio = t_end / dt;
    const double n = std::round(ratio);
    const double ulp = std::nextafter(ratio, std::numeric_limits<double>::infinity()) - ratio;
    if (std::abs(ratio - n) > ulp) throw InvalidInput("sim.t_end / sim.dt must be an integer step count");
    if (positivity.kind == PositivityPolicy::Kind::Projection && !(positivity.eps > 0.0)) {
        throw InvalidInput("projection eps > 0 required");
    }
    if (!x0.allFinite() || x0.minCoeff() < 0.0) throw InvalidInput("sim.x0 must be finite and nonnegative");
    if (positivity.kind == PositivityPolicy::Kind::LogDomain && !(x0.minCoeff() > 0.0)) {
        throw InvalidInput("log-domain policy requires strictly positive x0");
    }
}

State apply_positivity(const State& x, const PositivityPolicy& policy, std::size_t& clamps) {
    if (policy.kind != PositivityPolicy::Kind::Projection) return x;
    State out = x;
    for (int i = 0; i < 4; ++i) {
        if (out[i] < policy.eps) {
            out[i] = policy.eps;
            ++clamps;
        }
    }
    return out;
}

State integrate_terminal(const State& x0, const ModelParams& params, const NoiseIntensities& noise, Scheme scheme,
                         const PositivityPolicy& policy, double dt, const IncrementMatrix& dB, std::size_t path) {
    State last = x0;
    integrate(x0, params, noise, scheme, policy, dt, dB, [&](std::size_t, const State& x) { last = x; }, path);
    return last;
}

std::vector<double> time_grid(double t_end, double dt, std::size_t steps) {
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k < steps; ++k) t[k] = static_cast<double>(k) * dt;
    t[steps] = t_end;
    return t;
}

Trajectory simulate(const SimConfig& config, const ModelParams& params, const NoiseIntensities& noise,
                    std::uint64_t path) {
    config.validate();
    require_valid(params);
    const std::size_t n = config.steps();
    const auto grid = generate_brownian(config.seed, n, 1, config.dt, path);

    Trajectory traj;
    traj.times = time_grid(config.t_end, config.dt, n);
    traj.states.resize(n + 1);
    traj.cumulative_clamps.resize(n + 1);
    traj.applied_clamps = integrate(config.x0, params, noise, config.scheme, config.positivity, config.dt,
                                    grid.fine_increments(),
                                    [&](std::size_t k, const State& x, std::size_t clamps) {
                                        traj.states[k] = x;
                                        traj.cumulative_clamps[k] = clamps;
                                    },
                                    static_cast<std::size_t>(path));
    return traj;
}

SeriesStats::SeriesStats(std::size_t rows, std::size_t cols)
    : mean_(Table::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))),
      m2_(Table::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols))),
      min_(Table::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                           std::numeric_limits<double>::infinity())),
      max_(Table::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                           -std::numeric_limits<double>::infinity())) {}

void SeriesStats::merge(const SeriesStats& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const Table delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += other.m2_ + delta.cwiseAbs2() * (na * nb / n);
    min_ = min_.cwiseMin(other.min_);
    max_ = max_.cwiseMax(other.max_);
    count_ += other.count_;
}

SeriesStats::Table SeriesStats::variance() const {
    if (count_ < 2) return Table::Zero(m2_.rows(), m2_.cols());
    return m2_ / static_cast<double>(count_ - 1);
}

EnsembleSummary simulate_ensemble(const SimConfig& config, const ModelParams& params, const NoiseIntensities& noise,
                                  std::size_t n_paths, unsigned threads) {
    if (n_paths == 0) throw InvalidInput("simulate_ensemble: n_paths >= 1 required");
    config.validate();
    require_valid(params);
    const std::size_t n = config.steps();

    struct Acc {
        SeriesStats stats;
        std::size_t clamps = 0;
    };
    Acc total = reduce_paths<Acc>(
        n_paths, threads, [&] { return Acc{SeriesStats(n + 1, 4), 0}; },
        [&](std::size_t p, Acc& acc) {
            const auto grid = generate_brownian(config.seed, n, 1, config.dt, p);
            acc.stats.begin_sample();
            acc.clamps += integrate(config.x0, params, noise, config.scheme, config.positivity, config.dt,
                                    grid.fine_increments(), [&](std::size_t k, const State& x) { acc.stats.add(k, x); },
                                    p);
        },
        [](Acc& into, const Acc& from) {
            into.stats.merge(from.stats);
            into.clamps += from.clamps;
        });

    EnsembleSummary out;
    out.times = time_grid(config.t_end, config.dt, n);
    out.mean = total.stats.mean();
    out.variance = total.stats.variance();
    out.min = total.stats.min();
    out.max = total.stats.max();
    out.n_paths = n_paths;
    out.total_clamps = total.clamps;
    return out;
}

}  // namespace esd
