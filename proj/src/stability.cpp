#include "esd/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace esd {

namespace {

constexpr std::size_t kScanPoints = 1000;
constexpr double kRootTolerance = 1e-12;
constexpr double kResidualTolerance = 1e-9;
constexpr int kMaxBisections = 200;
constexpr int kMaxQrIterations = 500;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double residual_of(const State& x, const ModelParams& params) {
    return drift(x, params).cwiseAbs().maxCoeff();
}

double bisect(const ModelParams& params, double lo, double hi) {
    double glo = no_import_condition(params, lo);
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < kMaxBisections; ++it) {
        mid = 0.5 * (lo + hi);
        const double gmid = no_import_condition(params, mid);
        if (std::abs(gmid) < kRootTolerance || mid == lo || mid == hi) break;
        if ((gmid < 0.0) == (glo < 0.0)) {
            lo = mid;
            glo = gmid;
        } else {
            hi = mid;
        }
    }
    return mid;
}

void finish(Equilibrium& eq, const ModelParams& params) {
    eq.residual = residual_of(eq.point, params);
    if (eq.feasible && !(eq.residual < kResidualTolerance)) {
        eq.feasible = false;
        eq.infeasibility_reason = "equilibrium residual " + fmt(eq.residual) + " exceeds tolerance";
    }
}

std::vector<Equilibrium> no_import_branch(const ModelParams& params) {
    const double ratio = params.d1 / params.d2;
    std::vector<double> roots;
    double gmin = std::numeric_limits<double>::infinity();
    double gmax = -gmin;

    // Scan the closed interval, accept roots strictly inside (0, N).
    double x_prev = 0.0;
    double g_prev = no_import_condition(params, x_prev);
    for (std::size_t k = 1; k <= kScanPoints + 1; ++k) {
        const double x = params.N * static_cast<double>(k) / static_cast<double>(kScanPoints + 1);
        const double g = no_import_condition(params, x);
        if (k <= kScanPoints) {
            gmin = std::min(gmin, g);
            gmax = std::max(gmax, g);
            if (g == 0.0) {
                roots.push_back(x);
                x_prev = x;
                g_prev = g;
                continue;
            }
        }
        if (g_prev != 0.0 && g != 0.0 && (g_prev < 0.0) != (g < 0.0)) {
            const double r = bisect(params, x_prev, x);
            if (r > 0.0 && r < params.N) roots.push_back(r);
        }
        x_prev = x;
        g_prev = g;
    }

    std::vector<Equilibrium> out;
    for (double x1 : roots) {
        Equilibrium eq;
        eq.branch = Branch::NoImport;
        eq.point = State(x1, params.z3 / params.z1 * x1 * (params.N - x1), 0.0, ratio * x1);
        eq.feasible = eq.point[0] > 0.0 && eq.point[1] > 0.0 && eq.point[3] > 0.0;
        if (!eq.feasible) eq.infeasibility_reason = "root yields non-positive X2* or X4*";
        finish(eq, params);
        out.push_back(std::move(eq));
    }
    if (out.empty()) {
        Equilibrium eq;
        eq.branch = Branch::NoImport;
        eq.point = State(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), 0.0,
                         std::numeric_limits<double>::quiet_NaN());
        eq.feasible = false;
        eq.residual = std::numeric_limits<double>::quiet_NaN();
        eq.infeasibility_reason = "no sign change of reduced demand balance g on (0, N): g in [" + fmt(gmin) +
                                  " .. " + fmt(gmax) + "]";
        out.push_back(std::move(eq));
    }
    return out;
}

std::vector<double> real_roots(double a, double b, double c, double& disc) {
    if (a == 0.0) {
        disc = b * b;
        if (b == 0.0) return {};
        return {-c / b};
    }
    disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return {};
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    if (q == 0.0) return {0.0};
    return {q / a, c / q};
}

std::vector<Equilibrium> import_branch(const ModelParams& params) {
    const double u = params.s3 / params.s2;
    const double x4 = params.d1 / params.d2 * u;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    auto infeasible = [&](std::string reason) {
        Equilibrium eq;
        eq.branch = Branch::ImportThreshold;
        eq.point = State(u, nan, nan, x4);
        eq.feasible = false;
        eq.residual = nan;
        eq.infeasibility_reason = std::move(reason);
        return std::vector<Equilibrium>{std::move(eq)};
    };

    if (!(params.N > u)) return infeasible("N > s3/s2 violated");

    const auto [qa, qb, qc] = import_branch_quadratic(params);
    double disc = 0.0;
    const auto roots = real_roots(qa, qb, qc, disc);
    if (roots.empty()) {
        return infeasible("negative discriminant " + fmt(disc) + " of " + fmt(qa) + "*X3^2 + " + fmt(qb) +
                          "*X3 + " + fmt(qc));
    }

    const double x2_const = params.z3 * u * (params.N - u) / params.z1;
    const double x2_slope = (params.z3 * u - params.z2) / params.z1;
    std::vector<Equilibrium> out;
    for (double x3 : roots) {
        const double x2 = x2_const + x2_slope * x3;
        if (!(x2 > 0.0 && x3 > 0.0)) continue;
        Equilibrium eq;
        eq.branch = Branch::ImportThreshold;
        eq.point = State(u, x2, x3, x4);
        eq.feasible = true;
        finish(eq, params);
        out.push_back(std::move(eq));
    }
    if (out.empty()) return infeasible("no real root with X2* > 0 and X3* > 0");
    return out;
}

}  // namespace

std::string_view branch_name(Branch b) {
    switch (b) {
        case Branch::Trivial: return "trivial";
        case Branch::NoImport: return "no-import";
        case Branch::ImportThreshold: return "import-threshold";
    }
    return "?";
}

double no_import_condition(const ModelParams& p, double x1) {
    const double k = p.z3 / p.z1;
    const double gap = p.N - x1;
    return p.a1 * (1.0 - x1 / p.W) - p.a2 * k * k * x1 * gap * gap - p.d3 * p.d1 / p.d2;
}

std::array<double, 3> import_branch_quadratic(const ModelParams& p) {
    const double u = p.s3 / p.s2;
    // X2 = A + B X3 from the supply balance.
    const double A = p.z3 * u * (p.N - u) / p.z1;
    const double B = (p.z3 * u - p.z2) / p.z1;
    // Demand balance: c0 - a2 (A + B X3)(A + (B + 1) X3) = 0.
    const double c0 = p.a1 * u * (1.0 - u / p.W) - p.d3 * p.d1 / p.d2 * u;
    return {p.a2 * B * (B + 1.0), p.a2 * A * (2.0 * B + 1.0), p.a2 * A * A - c0};
}

std::vector<Equilibrium> find_equilibria(const ModelParams& params) {
    require_valid(params);
    std::vector<Equilibrium> out;
    Equilibrium origin;
    origin.branch = Branch::Trivial;
    origin.feasible = true;
    finish(origin, params);
    out.push_back(origin);

    for (auto& eq : no_import_branch(params)) out.push_back(std::move(eq));
    for (auto& eq : import_branch(params)) out.push_back(std::move(eq));
    return out;
}

Vector4cd eigenvalues_4x4(const Matrix4d& m) {
    if (!m.allFinite()) throw InvalidInput("eigenvalues_4x4: non-finite matrix entry");
    Eigen::EigenSolver<Matrix4d> solver;
    solver.setMaxIterations(kMaxQrIterations);
    solver.compute(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw NumericFailure("eigenvalues_4x4: QR iteration did not converge");
    return solver.eigenvalues();
}

std::string_view verdict_name(SpectralVerdict v) {
    switch (v) {
        case SpectralVerdict::Stable: return "stable";
        case SpectralVerdict::Marginal: return "marginal";
        case SpectralVerdict::Unstable: return "unstable";
    }
    return "?";
}

SpectralVerdict spectral_verdict(double max_real_part) {
    if (max_real_part < -kSpectralThreshold) return SpectralVerdict::Stable;
    if (max_real_part <= kSpectralThreshold) return SpectralVerdict::Marginal;
    return SpectralVerdict::Unstable;
}

LmiResult lmi_check(const Matrix4d& jac, const Matrix4d& sigma_cov, const Matrix4d& P) {
    if (!P.allFinite() || !jac.allFinite() || !sigma_cov.allFinite()) {
        throw InvalidInput("lmi_check: non-finite matrix entry");
    }
    const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InvalidInput("lmi_check: P must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix4d> p_eig(P);
    if (p_eig.info() != Eigen::Success || !(p_eig.eigenvalues().minCoeff() > 0.0)) {
        throw InvalidInput("lmi_check: P must be positive definite");
    }

    const Matrix4d lhs = jac.transpose() * P + P * jac + P * sigma_cov * P;
    const Matrix4d p_inv_sqrt = p_eig.operatorInverseSqrt();
    Matrix4d M = p_inv_sqrt * lhs * p_inv_sqrt;
    M = 0.5 * (M + M.transpose()).eval();

    LmiResult result;
    result.max_eigenvalue = Eigen::SelfAdjointEigenSolver<Matrix4d>(M, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    result.feasible = result.max_eigenvalue < 0.0;
    if (result.feasible) {
        result.alpha = -result.max_eigenvalue;
        result.decay_rate_bound = *result.alpha / (2.0 * p_eig.eigenvalues().maxCoeff());
    }
    return result;
}

StabilityReport classify_equilibrium(const ModelParams& params, const Equilibrium& eq,
                                     const NoiseIntensities& noise, const Matrix4d& P) {
    if (!eq.feasible) throw InvalidInput("classify_equilibrium: equilibrium is not feasible");
    const Matrix4d J = jacobian(eq.point, params);

    StabilityReport report;
    report.eigenvalues = eigenvalues_4x4(J);
    report.max_real_part = report.eigenvalues.real().maxCoeff();
    report.verdict = spectral_verdict(report.max_real_part);
    report.spectrally_stable = report.verdict == SpectralVerdict::Stable;

    const LmiResult lmi = lmi_check(J, noise.covariance(), P);
    report.lmi_feasible = lmi.feasible;
    report.lmi_max_eigenvalue = lmi.max_eigenvalue;
    report.alpha = lmi.alpha;
    report.decay_rate_bound = lmi.decay_rate_bound;
    return report;
}

std::string_view bound_status_name(BoundStatus s) {
    switch (s) {
        case BoundStatus::Ok: return "ok";
        case BoundStatus::ConditionFails: return "noise-condition-fails";
        case BoundStatus::Unbounded: return "unbounded-kappa-zero";
    }
    return "?";
}

PersistenceBound persistence_bound(const PersistenceSpec& spec, const NoiseIntensities& noise) {
    if (!spec.c.allFinite() || !(spec.c.minCoeff() > 0.0)) throw InvalidInput("persistence: all c_i > 0 required");
    if (!std::isfinite(spec.eta) || !(spec.eta > 0.0)) throw InvalidInput("persistence: eta > 0 required");
    if (!std::isfinite(spec.kappa) || spec.kappa < 0.0) throw InvalidInput("persistence: kappa >= 0 required");

    PersistenceBound out;
    out.noise_term = 0.5 * spec.c.dot(noise.sigma.cwiseAbs2());
    if (spec.eta < out.noise_term) {
        out.status = BoundStatus::ConditionFails;
    } else if (spec.kappa == 0.0) {
        out.status = BoundStatus::Unbounded;
    } else {
        out.status = BoundStatus::Ok;
        out.value = (spec.eta - out.noise_term) / spec.kappa;
    }
    return out;
}

DriftConditionReport check_persistence_drift_condition(const ModelParams& params, const PersistenceSpec& spec,
                                                       const Box4& box, std::size_t intervals) {
    if (!box.lo.allFinite() || !box.hi.allFinite() || !(box.lo.minCoeff() > 0.0)) {
        throw InvalidInput("persistence drift check: box must be strictly positive");
    }
    if (((box.hi - box.lo).array() < 0.0).any()) throw InvalidInput("persistence drift check: hi < lo");
    if (intervals == 0) throw InvalidInput("persistence drift check: grid density must be >= 1");

    const double n = static_cast<double>(intervals);
    auto coord = [&](int axis, std::size_t k) {
        return box.lo[axis] + ((box.hi[axis] - box.lo[axis]) * static_cast<double>(k)) / n;
    };

    DriftConditionReport report;
    report.min_margin = std::numeric_limits<double>::infinity();
    State x;
    for (std::size_t i = 0; i <= intervals; ++i) {
        x[0] = coord(0, i);
        for (std::size_t j = 0; j <= intervals; ++j) {
            x[1] = coord(1, j);
            for (std::size_t k = 0; k <= intervals; ++k) {
                x[2] = coord(2, k);
                for (std::size_t l = 0; l <= intervals; ++l) {
                    x[3] = coord(3, l);
                    const Vector4d f = drift(x, params);
                    const double lhs = spec.c.dot(f.cwiseQuotient(x));
                    const double margin = lhs - (spec.eta - spec.kappa * x.sum());
                    if (margin < report.min_margin) {
                        report.min_margin = margin;
                        report.argmin = x;
                    }
                    ++report.points;
                }
            }
        }
    }
    report.holds = report.min_margin >= 0.0;
    return report;
}

}  // namespace esd
