#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <type_traits>
#include <vector>

#include "esd/brownian.hpp"
#include "esd/model.hpp"

namespace esd {

enum class Scheme { EulerMaruyama, Milstein };

std::string_view scheme_name(Scheme s);
Scheme scheme_from_name(std::string_view name);  // "em" | "milstein"

struct PositivityPolicy {
    enum class Kind { Projection, LogDomain, None };

    Kind kind = Kind::Projection;
    double eps = 1e-8;

    static PositivityPolicy projection(double eps = 1e-8) { return {Kind::Projection, eps}; }
    static PositivityPolicy log_domain() { return {Kind::LogDomain, 0.0}; }
    static PositivityPolicy none() { return {Kind::None, 0.0}; }
};

std::string_view positivity_name(PositivityPolicy::Kind k);
PositivityPolicy::Kind positivity_from_name(std::string_view name);  // "projection" | "log" | "none"

inline constexpr double kBlowUpThreshold = 1e12;
inline constexpr double kLogDriftClamp = 1e6;

struct SimConfig {
    double t_end = 50.0;
    double dt = 0.01;
    std::uint64_t seed = 42;
    Scheme scheme = Scheme::EulerMaruyama;
    PositivityPolicy positivity{};
    State x0 = State(2.0, 1.0, 0.5, 0.5);

    /// round(t_end / dt); validate() checks that the ratio is integral to 1 ulp.
    std::size_t steps() const;
    void validate() const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    std::vector<std::size_t> cumulative_clamps;  // clamps applied up to and including each step
    std::size_t applied_clamps = 0;
};

/// One Euler-Maruyama step, before any positivity policy.
template <std::floating_point Scalar>
Vector4<Scalar> em_step(const Vector4<Scalar>& x, const BasicModelParams<Scalar>& params,
                        const NoiseIntensities& noise, Scalar dt, const Vector4<Scalar>& dB) {
    if (dt < Scalar(0)) throw InvalidInput("em_step: dt must be >= 0");
    return x + drift(x, params) * dt + diffusion(x, noise).cwiseProduct(dB);
}

/// Euler-Maruyama plus the diagonal correction (1/2) sigma_i^2 X_i ((dB_i)^2 - dt).
template <std::floating_point Scalar>
Vector4<Scalar> milstein_step(const Vector4<Scalar>& x, const BasicModelParams<Scalar>& params,
                              const NoiseIntensities& noise, Scalar dt, const Vector4<Scalar>& dB) {
    const Vector4<Scalar> sig2 = noise.sigma.template cast<Scalar>().cwiseAbs2();
    const Vector4<Scalar> correction =
        (Scalar(0.5) * sig2.array() * x.array() * (dB.array().square() - dt)).matrix();
    return em_step(x, params, noise, dt, dB) + correction;
}

/// Projection replaces components below eps by eps and counts each replacement.
/// LogDomain is handled inside the integrator, so here it is a passthrough like None.
State apply_positivity(const State& x, const PositivityPolicy& policy, std::size_t& clamps);

namespace detail {

template <class Observer>
void notify(Observer& observer, std::size_t k, const State& x, std::size_t clamps) {
    if constexpr (std::is_invocable_v<Observer&, std::size_t, const State&, std::size_t>) {
        observer(k, x, clamps);
    } else {
        observer(k, x);
    }
}

inline void check_bounded(const State& x, std::size_t step, std::size_t path) {
    if (!x.allFinite()) throw BlowUpError(step, path, "non-finite state");
    if (x.cwiseAbs().maxCoeff() > kBlowUpThreshold) throw BlowUpError(step, path, "state magnitude exceeds 1e12");
}

inline Vector4d log_drift(const State& x, const ModelParams& params, const NoiseIntensities& noise) {
    const Vector4d ratio = drift(x, params).cwiseQuotient(x).cwiseMax(-kLogDriftClamp).cwiseMin(kLogDriftClamp);
    return ratio - 0.5 * noise.sigma.cwiseAbs2();
}

}  // namespace detail

/// Integrates from x0 over the rows of dB (one row per step of size dt) and
/// calls observer(k, state) for k = 0..n; an observer taking a third argument also
/// receives the running clamp count. Returns the number of projection clamps.
template <class Observer>
std::size_t integrate(const State& x0, const ModelParams& params, const NoiseIntensities& noise, Scheme scheme,
                      const PositivityPolicy& policy, double dt, const IncrementMatrix& dB, Observer&& observer,
                      std::size_t path = 0) {
    std::size_t clamps = 0;
    const auto n = static_cast<std::size_t>(dB.rows());
    if (policy.kind == PositivityPolicy::Kind::LogDomain) {
        if (!(x0.minCoeff() > 0.0)) throw InvalidInput("log-domain integration requires a strictly positive x0");
        Vector4d y = x0.array().log().matrix();
        State x = x0;
        detail::notify(observer, 0, x, clamps);
        for (std::size_t k = 0; k < n; ++k) {
            const Vector4d db = dB.row(static_cast<Eigen::Index>(k)).transpose();
            // Noise is additive in log variables, so the Milstein correction vanishes.
            y += detail::log_drift(x, params, noise) * dt + noise.sigma.cwiseProduct(db);
            x = y.array().exp().matrix();
            detail::check_bounded(x, k + 1, path);
            if (!(x.minCoeff() > 0.0)) throw BlowUpError(k + 1, path, "log-domain state underflow");
            detail::notify(observer, k + 1, x, clamps);
        }
        return clamps;
    }

    State x = x0;
    detail::notify(observer, 0, x, clamps);
    for (std::size_t k = 0; k < n; ++k) {
        const Vector4d db = dB.row(static_cast<Eigen::Index>(k)).transpose();
        State next = scheme == Scheme::Milstein ? milstein_step(x, params, noise, dt, db)
                                                : em_step(x, params, noise, dt, db);
        detail::check_bounded(next, k + 1, path);
        x = apply_positivity(next, policy, clamps);
        detail::notify(observer, k + 1, x, clamps);
    }
    return clamps;
}

/// Terminal state only.
State integrate_terminal(const State& x0, const ModelParams& params, const NoiseIntensities& noise, Scheme scheme,
                         const PositivityPolicy& policy, double dt, const IncrementMatrix& dB, std::size_t path = 0);

/// Single path; Brownian increments come from stream (config.seed, path).
Trajectory simulate(const SimConfig& config, const ModelParams& params, const NoiseIntensities& noise,
                    std::uint64_t path = 0);

/// Per-time, per-column running statistics with a deterministic merge.
class SeriesStats {
public:
    using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

    SeriesStats() = default;
    SeriesStats(std::size_t rows, std::size_t cols);

    void begin_sample() { ++count_; }
    template <typename Derived>
    void add(std::size_t row, const Eigen::MatrixBase<Derived>& value) {
        const auto r = static_cast<Eigen::Index>(row);
        const double n = static_cast<double>(count_);
        for (Eigen::Index c = 0; c < mean_.cols(); ++c) {
            const double v = value(c);
            const double delta = v - mean_(r, c);
            mean_(r, c) += delta / n;
            m2_(r, c) += delta * (v - mean_(r, c));
            min_(r, c) = std::min(min_(r, c), v);
            max_(r, c) = std::max(max_(r, c), v);
        }
    }
    void merge(const SeriesStats& other);

    std::size_t count() const { return count_; }
    const Table& mean() const { return mean_; }
    const Table& min() const { return min_; }
    const Table& max() const { return max_; }
    /// Unbiased sample variance; zero when fewer than two samples.
    Table variance() const;

private:
    std::size_t count_ = 0;
    Table mean_, m2_, min_, max_;
};

struct EnsembleSummary {
    using Table = Eigen::Matrix<double, Eigen::Dynamic, 4>;

    std::vector<double> times;
    Table mean, variance, min, max;
    std::size_t n_paths = 0;
    std::size_t total_clamps = 0;
};

/// Path k draws from stream (config.seed, k). Reduction: fixed blocks of
/// kPathBlock paths merged in path order, independent of `threads`.
EnsembleSummary simulate_ensemble(const SimConfig& config, const ModelParams& params,
                                  const NoiseIntensities& noise, std::size_t n_paths, unsigned threads = 0);

std::vector<double> time_grid(double t_end, double dt, std::size_t steps);

}  // namespace esd
