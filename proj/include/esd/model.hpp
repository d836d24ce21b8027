#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "esd/types.hpp"

namespace esd {

/// Deterministic constants of the four-state supply/demand model.
/// Defaults are the baseline calibration (time in years, states in GW-index units).
template <std::floating_point Scalar>
struct BasicModelParams {
    Scalar a1 = Scalar(0.8);   // demand growth rate
    Scalar W = Scalar(10.0);   // demand carrying capacity
    Scalar a2 = Scalar(0.05);  // supply competition coefficient
    Scalar d3 = Scalar(0.1);   // renewable demand offset
    Scalar z1 = Scalar(0.6);   // supply adjustment rate
    Scalar z2 = Scalar(0.25);  // import competition coefficient
    Scalar z3 = Scalar(0.08);  // demand-supply responsiveness
    Scalar N = Scalar(6.0);    // market capacity
    Scalar s1 = Scalar(0.35);  // import adjustment rate
    Scalar s2 = Scalar(0.9);   // import demand sensitivity
    Scalar s3 = Scalar(1.2);   // import activation threshold
    Scalar d1 = Scalar(0.25);  // renewable build-up rate
    Scalar d2 = Scalar(0.5);   // renewable depreciation rate

    template <std::floating_point Other>
    BasicModelParams<Other> cast() const {
        return {Other(a1), Other(W),  Other(a2), Other(d3), Other(z1), Other(z2), Other(z3),
                Other(N),  Other(s1), Other(s2), Other(s3), Other(d1), Other(d2)};
    }

    bool operator==(const BasicModelParams&) const = default;
};

using ModelParams = BasicModelParams<double>;

/// Multiplicative noise strengths; all zero recovers the deterministic model.
struct NoiseIntensities {
    Vector4d sigma = Vector4d(0.10, 0.10, 0.08, 0.12);

    static NoiseIntensities zero() { return {Vector4d::Zero()}; }
    Matrix4d covariance() const { return sigma.array().square().matrix().asDiagonal(); }
};

enum class Param : int { a1, W, a2, d3, z1, z2, z3, N, s1, s2, s3, d1, d2 };

inline constexpr std::size_t kParamCount = 13;

inline constexpr std::array<Param, kParamCount> kAllParams = {
    Param::a1, Param::W,  Param::a2, Param::d3, Param::z1, Param::z2, Param::z3,
    Param::N,  Param::s1, Param::s2, Param::s3, Param::d1, Param::d2};

std::string_view param_name(Param p);
Param param_from_name(std::string_view name);  // throws InvalidInput

template <std::floating_point Scalar>
Scalar& param_ref(BasicModelParams<Scalar>& m, Param p) {
    switch (p) {
        case Param::a1: return m.a1;
        case Param::W: return m.W;
        case Param::a2: return m.a2;
        case Param::d3: return m.d3;
        case Param::z1: return m.z1;
        case Param::z2: return m.z2;
        case Param::z3: return m.z3;
        case Param::N: return m.N;
        case Param::s1: return m.s1;
        case Param::s2: return m.s2;
        case Param::s3: return m.s3;
        case Param::d1: return m.d1;
        case Param::d2: return m.d2;
    }
    throw InvalidInput("unknown parameter id");
}

template <std::floating_point Scalar>
Scalar param_value(const BasicModelParams<Scalar>& m, Param p) {
    auto copy = m;
    return param_ref(copy, p);
}

struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;

    bool ok() const { return violations.empty(); }
};

/// Positivity and N < W are hard constraints; N <= s3/s2 only makes the
/// import-threshold equilibrium infeasible and is reported as a warning.
ValidationReport validate_params(const ModelParams& params);

/// Throws InvalidInput listing every violation.
void require_valid(const ModelParams& params);

namespace detail {
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
    if (!x.allFinite()) throw InvalidInput(std::string(what) + ": non-finite state component");
}
}  // namespace detail

/// Drift vector field f(X).
template <std::floating_point Scalar>
Vector4<Scalar> drift(const Vector4<Scalar>& x, const BasicModelParams<Scalar>& p) {
    detail::require_finite(x, "drift");
    const Scalar x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3];
    Vector4<Scalar> f;
    f[0] = p.a1 * x1 * (Scalar(1) - x1 / p.W) - p.a2 * x2 * (x2 + x3) - p.d3 * x4;
    f[1] = -p.z1 * x2 - p.z2 * x3 + p.z3 * x1 * (p.N - (x1 - x3));
    f[2] = p.s1 * x3 * (p.s2 * x1 - p.s3);
    f[3] = p.d1 * x1 - p.d2 * x4;
    return f;
}

/// Diagonal of the diffusion matrix, sigma_i * X_i.
template <std::floating_point Scalar>
Vector4<Scalar> diffusion(const Vector4<Scalar>& x, const NoiseIntensities& noise) {
    detail::require_finite(x, "diffusion");
    return noise.sigma.template cast<Scalar>().cwiseProduct(x);
}

template <std::floating_point Scalar>
Matrix4<Scalar> jacobian(const Vector4<Scalar>& x, const BasicModelParams<Scalar>& p) {
    detail::require_finite(x, "jacobian");
    const Scalar x1 = x[0], x2 = x[1], x3 = x[2];
    Matrix4<Scalar> J;
    J << p.a1 * (Scalar(1) - Scalar(2) * x1 / p.W), -p.a2 * (Scalar(2) * x2 + x3), -p.a2 * x2, -p.d3,
         p.z3 * (p.N - Scalar(2) * x1 + x3), -p.z1, -p.z2 + p.z3 * x1, Scalar(0),
         p.s1 * p.s2 * x3, Scalar(0), p.s1 * (p.s2 * x1 - p.s3), Scalar(0),
         p.d1, Scalar(0), Scalar(0), -p.d2;
    return J;
}

}  // namespace esd
