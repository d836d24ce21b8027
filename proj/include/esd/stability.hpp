#pragma once

#include <optional>
#include <string>
#include <vector>

#include "esd/model.hpp"

namespace esd {

enum class Branch { Trivial, NoImport, ImportThreshold };

std::string_view branch_name(Branch b);

struct Equilibrium {
    State point = State::Zero();
    Branch branch = Branch::Trivial;
    bool feasible = false;
    std::optional<std::string> infeasibility_reason;
    double residual = 0.0;  // ||drift(point)||_inf; NaN when the branch has no candidate point
};

/// Equilibria on the trivial, no-import (X3 = 0) and import-threshold
/// (X1 = s3/s2) branches. One record per branch when the branch has no
/// feasible point; one record per root otherwise.
std::vector<Equilibrium> find_equilibria(const ModelParams& params);

/// Reduced no-import condition g(X1) whose roots on (0, N) give X1*.
double no_import_condition(const ModelParams& params, double x1);

/// Coefficients {a, b, c} of a*X3^2 + b*X3 + c = 0 on the import-threshold branch,
/// after eliminating X2 through the supply balance.
std::array<double, 3> import_branch_quadratic(const ModelParams& params);

/// Eigenvalues of a general real 4x4 matrix (Hessenberg reduction + shifted QR,
/// capped at 500 iterations). Throws NumericFailure if the iteration stalls.
Vector4cd eigenvalues_4x4(const Matrix4d& m);

enum class SpectralVerdict { Stable, Marginal, Unstable };

std::string_view verdict_name(SpectralVerdict v);

inline constexpr double kSpectralThreshold = 1e-12;

SpectralVerdict spectral_verdict(double max_real_part);

struct LmiResult {
    bool feasible = false;
    double max_eigenvalue = 0.0;  // lambda_max of P^{-1/2}(J'P + PJ + P Sigma P)P^{-1/2}
    std::optional<double> alpha;
    std::optional<double> decay_rate_bound;  // alpha / (2 lambda_max(P))
};

/// Checks J'P + PJ + P Sigma P <= -alpha P for the given P. Throws InvalidInput
/// unless P is symmetric positive definite.
LmiResult lmi_check(const Matrix4d& jac, const Matrix4d& sigma_cov, const Matrix4d& P);

struct StabilityReport {
    Vector4cd eigenvalues;
    double max_real_part = 0.0;
    SpectralVerdict verdict = SpectralVerdict::Unstable;
    bool spectrally_stable = false;
    bool lmi_feasible = false;
    double lmi_max_eigenvalue = 0.0;
    std::optional<double> alpha;
    std::optional<double> decay_rate_bound;
};

StabilityReport classify_equilibrium(const ModelParams& params, const Equilibrium& eq,
                                     const NoiseIntensities& noise,
                                     const Matrix4d& P = Matrix4d::Identity());

struct PersistenceSpec {
    Vector4d c = Vector4d::Ones();
    double eta = 1.0;
    double kappa = 0.5;
};

enum class BoundStatus { Ok, ConditionFails, Unbounded };

std::string_view bound_status_name(BoundStatus s);

struct PersistenceBound {
    BoundStatus status = BoundStatus::Ok;
    double noise_term = 0.0;       // (1/2) sum c_i sigma_i^2
    std::optional<double> value;   // (eta - noise_term) / kappa when status == Ok
};

/// Lower bound on the long-run time average of E[sum c_i X_i].
PersistenceBound persistence_bound(const PersistenceSpec& spec, const NoiseIntensities& noise);

struct Box4 {
    Vector4d lo;
    Vector4d hi;
};

struct DriftConditionReport {
    double min_margin = 0.0;
    State argmin = State::Zero();
    std::size_t points = 0;
    bool holds = false;  // min_margin >= 0 on the sampled grid
};

/// Samples sum c_i f_i(X)/X_i - (eta - kappa sum X_i) on a regular grid with
/// `intervals` subdivisions per axis ((intervals+1)^4 points, endpoints included),
/// so doubling `intervals` samples a superset. A falsification check only.
DriftConditionReport check_persistence_drift_condition(const ModelParams& params,
                                                       const PersistenceSpec& spec,
                                                       const Box4& box, std::size_t intervals);

}  // namespace esd
