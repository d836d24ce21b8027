#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "esd/integrator.hpp"

namespace esd {

// ---------------------------------------------------------------------------
// Strong / weak error against a self-refined reference on a shared Brownian path
// ---------------------------------------------------------------------------

struct ConvergenceSetup {
    Scheme scheme = Scheme::EulerMaruyama;
    PositivityPolicy positivity{};
    State x0 = State(2.0, 1.0, 0.5, 0.5);
    double t_end = 5.0;
    std::size_t refinement = 8;
    std::size_t n_paths = 500;
    std::uint64_t seed = 42;
    unsigned threads = 0;
};

/// Terminal states of the coarse (dt) and reference (dt / refinement) runs,
/// one pair per path; both runs of path k use the same Brownian path.
struct PairedTerminals {
    std::vector<State> coarse;
    std::vector<State> reference;
};

PairedTerminals paired_terminals(const ConvergenceSetup& setup, double dt, const ModelParams& params,
                                 const NoiseIntensities& noise);

struct ErrorEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Sample mean of ||X_dt(T) - X_ref(T)||^2 and its standard error.
ErrorEstimate strong_error(const PairedTerminals& pairs);
ErrorEstimate strong_error(const ConvergenceSetup& setup, double dt, const ModelParams& params,
                           const NoiseIntensities& noise);

enum class TestFunction { X1, X3 };

std::string_view test_function_name(TestFunction phi);
TestFunction test_function_from_name(std::string_view name);

/// |mean phi(X_dt(T)) - mean phi(X_ref(T))|; the standard error is that of the paired difference.
ErrorEstimate weak_error(TestFunction phi, const PairedTerminals& pairs);
ErrorEstimate weak_error(TestFunction phi, const ConvergenceSetup& setup, double dt, const ModelParams& params,
                         const NoiseIntensities& noise);

struct ErrorTable {
    Scheme scheme = Scheme::EulerMaruyama;
    std::vector<double> dt_values;
    std::vector<double> strong_errors;      // mean-square terminal error
    std::vector<double> strong_std_errors;
    std::vector<double> weak_errors_x1;
    std::vector<double> weak_errors_x3;
    /// Strong order: least-squares slope of ln sqrt(strong error) against ln dt.
    std::optional<double> fitted_rate;
    /// Slope of ln(strong error) against ln dt (twice the strong order).
    std::optional<double> mean_square_slope;
    std::size_t n_paths = 0;
};

ErrorTable convergence_study(const ConvergenceSetup& setup, const std::vector<double>& dt_list,
                             const ModelParams& params, const NoiseIntensities& noise);

/// Least-squares slope of ln y against ln x. Requires >= 2 points and positive values.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Ensemble statistics
// ---------------------------------------------------------------------------

struct MomentSeries {
    std::vector<double> times;
    std::vector<double> moment;     // sample mean of ||X(t)||^p
    std::vector<double> std_error;
    double sup = 0.0;
    std::size_t sup_index = 0;
    double sup_std_error = 0.0;
    double tail_slope = 0.0;        // least-squares slope over the last quarter of the horizon
    bool plateau = false;
};

/// The plateau flag is set when the fitted rise over the last quarter of the
/// horizon does not exceed four times the mean standard error there.
MomentSeries moment_estimate(double p, const SimConfig& sim, std::size_t n_paths, const ModelParams& params,
                             const NoiseIntensities& noise, unsigned threads = 0);

struct PersistenceEstimate {
    double weighted_average = 0.0;          // (1/T) int E[sum c_i X_i] dt
    Vector4d component_averages = Vector4d::Zero();  // (1/T) int E[X_i] dt
};

PersistenceEstimate persistence_estimate(const Vector4d& c, const SimConfig& sim, std::size_t n_paths,
                                         const ModelParams& params, const NoiseIntensities& noise,
                                         unsigned threads = 0);

/// Trapezoidal (1/T) int v dt over a possibly non-uniform grid.
double trapezoid_average(const std::vector<double>& times, const std::vector<double>& values);

// ---------------------------------------------------------------------------
// Quantities of interest and sensitivity
// ---------------------------------------------------------------------------

enum class Qoi { AvgDemand, AvgRenewable, MaxImport };

inline constexpr std::array<Qoi, 3> kAllQois = {Qoi::AvgDemand, Qoi::AvgRenewable, Qoi::MaxImport};

std::string_view qoi_name(Qoi q);
Qoi qoi_from_name(std::string_view name);

struct QoIRecord {
    double avg_demand = 0.0;
    double avg_renewable = 0.0;
    double max_import = 0.0;

    double get(Qoi q) const;
};

QoIRecord compute_qoi(const Trajectory& traj);

/// Mean over paths of the per-path QoIs; path k uses stream (sim.seed, k).
QoIRecord ensemble_qoi(const SimConfig& sim, std::size_t n_paths, const ModelParams& params,
                       const NoiseIntensities& noise, unsigned threads = 0);

/// Ensemble max - min of one component at t_end.
double terminal_band_width(const SimConfig& sim, std::size_t n_paths, const ModelParams& params,
                           const NoiseIntensities& noise, Component component, unsigned threads = 0);

struct SensitivityIndex {
    double baseline_q = 0.0;
    double q_plus = 0.0;
    double q_minus = 0.0;
    double s_index = 0.0;
};

/// Central-difference normalized index (Q(p+dp) - Q(p-dp)) / (2 dp) * p / Q(p), dp = delta_fraction * p.
/// Throws InvalidInput when a perturbed parameter set is invalid and
/// NumericFailure when Q(p) = 0.
SensitivityIndex sensitivity_index(Param param, const ModelParams& base, double delta_fraction,
                                   const std::function<double(const ModelParams&)>& qoi);

struct SensitivitySetup {
    SimConfig sim{};
    std::size_t n_paths = 200;
    double delta_fraction = 0.10;
    unsigned threads = 0;
};

struct SensitivityResult {
    Param param = Param::a1;
    Qoi qoi = Qoi::AvgDemand;
    double baseline_q = 0.0;
    double s_index = 0.0;
    double delta_fraction = 0.10;
};

/// Ensemble-mean QoI with the same path set for the baseline and both perturbations.
SensitivityResult sensitivity_index(Param param, Qoi qoi, const SensitivitySetup& setup, const ModelParams& params,
                                    const NoiseIntensities& noise);

struct SensitivityCell {
    Param param = Param::a1;
    Qoi qoi = Qoi::AvgDemand;
    std::optional<SensitivityResult> result;
    std::string error;
};

struct SensitivityTable {
    QoIRecord baseline;
    std::vector<SensitivityCell> cells;                  // canonical order: parameter-major, then QoI
    std::array<std::vector<Param>, 3> ranking;           // by |S_p| descending, failed cells last

    const SensitivityCell& cell(Param p, Qoi q) const;
    /// 1-based rank of p for q.
    std::size_t rank_of(Param p, Qoi q) const;
};

/// Every parameter perturbed by +-delta_fraction with all others fixed.
/// Cell failures are recorded and the sweep continues.
SensitivityTable sensitivity_sweep(const SensitivitySetup& setup, const ModelParams& params,
                                   const NoiseIntensities& noise,
                                   const std::vector<Param>& evaluation_order = {kAllParams.begin(), kAllParams.end()});

}  // namespace esd
