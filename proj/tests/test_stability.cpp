#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <vector>

#include "esd/stability.hpp"
#include "generators.hpp"

namespace esd {
namespace {

using cd = std::complex<double>;

double reduced_demand_balance(const ModelParams& p, double x1) {
    const double r = p.z3 / p.z1;
    return p.a1 * (1.0 - x1 / p.W) - p.a2 * r * r * x1 * (p.N - x1) * (p.N - x1) - p.d3 * p.d1 / p.d2;
}

// Import-threshold quadratic normalized to c2 X3^2 + c1 X3 + c0 with X2 eliminated by hand.
std::array<double, 3> import_quadratic_oracle(const ModelParams& p) {
    const double u = p.s3 / p.s2;
    const double A = p.z3 * u * (p.N - u) / p.z1;
    const double B = (p.z3 * u - p.z2) / p.z1;
    const double rhs = p.a1 * u * (1.0 - u / p.W) - p.d3 * (p.d1 / p.d2) * u;
    return {-B * (B + 1.0), -A * (2.0 * B + 1.0), rhs / p.a2 - A * A};
}

std::vector<cd> sorted(const Vector4cd& v) {
    std::vector<cd> out(v.data(), v.data() + 4);
    std::sort(out.begin(), out.end(), [](cd a, cd b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
    return out;
}

void expect_same_spectrum(const Vector4cd& got, std::vector<cd> want, double tol) {
    std::sort(want.begin(), want.end(), [](cd a, cd b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
    const auto g = sorted(got);
    for (int i = 0; i < 4; ++i) EXPECT_LT(std::abs(g[i] - want[i]), tol) << "eigenvalue " << i << " got " << g[i];
}

TEST(Equilibria, Table1HasThreeRecordsAndOnlyTrivialFeasible) {
    const auto eqs = find_equilibria(ModelParams{});
    ASSERT_EQ(eqs.size(), 3u);
    EXPECT_EQ(eqs[0].branch, Branch::Trivial);
    EXPECT_TRUE(eqs[0].feasible);
    EXPECT_EQ(eqs[0].point, State::Zero());
    EXPECT_EQ(eqs[0].residual, 0.0);

    EXPECT_EQ(eqs[1].branch, Branch::NoImport);
    EXPECT_FALSE(eqs[1].feasible);
    ASSERT_TRUE(eqs[1].infeasibility_reason.has_value());
    EXPECT_NE(eqs[1].infeasibility_reason->find("no sign change"), std::string::npos);

    EXPECT_EQ(eqs[2].branch, Branch::ImportThreshold);
    EXPECT_FALSE(eqs[2].feasible);
    ASSERT_TRUE(eqs[2].infeasibility_reason.has_value());
    EXPECT_NE(eqs[2].infeasibility_reason->find("negative discriminant"), std::string::npos);
    EXPECT_NEAR(eqs[2].point(0), 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(eqs[2].point(3), 2.0 / 3.0, 1e-15);
}

TEST(Equilibria, NoImportBalanceStaysPositiveOnDenseGrid) {
    const ModelParams p;
    double lo = INFINITY;
    for (int k = 1; k < 60000; ++k) lo = std::min(lo, reduced_demand_balance(p, p.N * k / 60000.0));
    EXPECT_GT(lo, 0.0);
    EXPECT_NEAR(reduced_demand_balance(p, 1e-12), 0.75, 1e-10);
    for (double x : {0.5, 2.0, 3.7, 5.9}) EXPECT_NEAR(no_import_condition(p, x), reduced_demand_balance(p, x), 1e-15);
}

TEST(Equilibria, ImportQuadraticMatchesHandElimination) {
    const ModelParams p;
    const auto oracle = import_quadratic_oracle(p);
    // Printed reference values carry rounding from intermediate steps.
    EXPECT_NEAR(oracle[0], 0.181822, 5e-6);
    EXPECT_NEAR(oracle[1], -0.433253, 5e-6);
    EXPECT_NEAR(oracle[2], 16.46727, 5e-6);
    EXPECT_LT(oracle[1] * oracle[1] - 4.0 * oracle[0] * oracle[2], 0.0);

    const auto got = import_branch_quadratic(p);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], -p.a2 * oracle[i], 1e-14) << "coefficient " << i;
}

TEST(Equilibria, ImportQuadraticMatchesForRandomParameters) {
    testing::Gen gen(21);
    for (int i = 0; i < 200; ++i) {
        const ModelParams p = gen.params();
        const auto oracle = import_quadratic_oracle(p);
        const auto got = import_branch_quadratic(p);
        for (int c = 0; c < 3; ++c) {
            EXPECT_NEAR(got[c], -p.a2 * oracle[c], 1e-12 * (1.0 + std::abs(p.a2 * oracle[c])));
        }
    }
}

TEST(Equilibria, StrongCongestionCreatesNoImportRoots) {
    ModelParams p;
    p.a2 = 3.0;
    const auto eqs = find_equilibria(p);
    std::size_t found = 0;
    for (const auto& eq : eqs) {
        if (eq.branch != Branch::NoImport || !eq.feasible) continue;
        ++found;
        EXPECT_EQ(eq.point(2), 0.0);
        EXPECT_GT(eq.point(0), 0.0);
        EXPECT_LT(eq.point(0), p.N);
        EXPECT_NEAR(reduced_demand_balance(p, eq.point(0)), 0.0, 1e-11);
        EXPECT_LT(drift(eq.point, p).cwiseAbs().maxCoeff(), 1e-9);
    }
    EXPECT_EQ(found, 2u);
}

TEST(Equilibria, CheapImportsCreateImportThresholdRoot) {
    ModelParams p;
    p.z2 = 0.05;
    const auto eqs = find_equilibria(p);
    const auto it = std::find_if(eqs.begin(), eqs.end(),
                                 [](const Equilibrium& e) { return e.branch == Branch::ImportThreshold && e.feasible; });
    ASSERT_NE(it, eqs.end());
    EXPECT_NEAR(it->point(0), p.s3 / p.s2, 1e-15);
    EXPECT_GT(it->point(1), 0.0);
    EXPECT_GT(it->point(2), 0.0);
    EXPECT_LT(drift(it->point, p).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Equilibria, ImportBranchInfeasibleWhenThresholdAboveCap) {
    ModelParams p;
    p.s3 = 10.0;
    const auto eqs = find_equilibria(p);
    ASSERT_EQ(eqs.back().branch, Branch::ImportThreshold);
    EXPECT_FALSE(eqs.back().feasible);
    EXPECT_EQ(*eqs.back().infeasibility_reason, "N > s3/s2 violated");
}

TEST(Equilibria, LogisticLimitPushesRootOutsideInterval) {
    ModelParams p;
    p.d3 = 1e-14;
    p.a2 = 1e-14;
    const auto eqs = find_equilibria(p);
    EXPECT_FALSE(eqs[1].feasible);
    EXPECT_EQ(eqs[1].branch, Branch::NoImport);
}

TEST(Equilibria, FeasiblePointsAreRootsForRandomParameters) {
    testing::Gen gen(22);
    std::size_t nontrivial = 0;
    for (int i = 0; i < 300; ++i) {
        const ModelParams p = gen.params();
        for (const auto& eq : find_equilibria(p)) {
            if (!std::isnan(eq.point(0))) {
                EXPECT_EQ(eq.point(3), (p.d1 / p.d2) * eq.point(0));
            }
            if (!eq.feasible) continue;
            if (eq.branch != Branch::Trivial) ++nontrivial;
            EXPECT_GE(eq.point.minCoeff(), 0.0);
            EXPECT_LT(drift(eq.point, p).cwiseAbs().maxCoeff(), 1e-9);
            EXPECT_LT(eq.residual, 1e-9);
        }
    }
    EXPECT_GT(nontrivial, 0u);
}

TEST(Eigenvalues, IdentityAndDiagonal) {
    expect_same_spectrum(eigenvalues_4x4(Matrix4d::Identity()), {1, 1, 1, 1}, 1e-14);
    expect_same_spectrum(eigenvalues_4x4(Vector4d(2, -3, 0.5, -0.5).asDiagonal().toDenseMatrix()),
                         {2, -3, 0.5, -0.5}, 1e-14);
}

TEST(Eigenvalues, CompanionOfQuarticRootsOfUnity) {
    Matrix4d c = Matrix4d::Zero();
    c(0, 3) = 1.0;
    c(1, 0) = c(2, 1) = c(3, 2) = 1.0;
    expect_same_spectrum(eigenvalues_4x4(c), {cd(1, 0), cd(-1, 0), cd(0, 1), cd(0, -1)}, 1e-12);
}

TEST(Eigenvalues, BackSubstituteIntoCharacteristicDeterminant) {
    testing::Gen gen(23);
    for (int i = 0; i < 200; ++i) {
        Matrix4d m;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) m(r, c) = gen.uniform(-3, 3);
        const Vector4cd ev = eigenvalues_4x4(m);
        const double scale = 1.0 + m.norm();
        for (int k = 0; k < 4; ++k) {
            const Eigen::Matrix4cd shifted = m.cast<cd>() - ev(k) * Eigen::Matrix4cd::Identity();
            EXPECT_LT(std::abs(shifted.determinant()), 1e-8 * scale);
        }
    }
}

TEST(Eigenvalues, RejectsNonFinite) {
    Matrix4d m = Matrix4d::Identity();
    m(1, 2) = std::nan("");
    EXPECT_THROW(eigenvalues_4x4(m), InvalidInput);
}

// The (X1, X4) block [[a1, -d3], [d1, -d2]] couples demand and renewables at the origin.
std::vector<cd> origin_spectrum(const ModelParams& p) {
    const double tr = p.a1 - p.d2;
    const double det = -p.a1 * p.d2 + p.d1 * p.d3;
    const cd root = std::sqrt(cd(tr * tr - 4.0 * det, 0.0));
    return {-p.z1, -p.s1 * p.s3, (tr + root) / 2.0, (tr - root) / 2.0};
}

TEST(Classify, OriginTable1IsUnstableWithCoupledBlock) {
    const ModelParams p;
    const auto eqs = find_equilibria(p);
    const StabilityReport r = classify_equilibrium(p, eqs[0], NoiseIntensities{});
    expect_same_spectrum(r.eigenvalues, origin_spectrum(p), 1e-12);
    EXPECT_NEAR(r.max_real_part, 0.15 + std::sqrt(0.3975), 1e-12);
    EXPECT_EQ(r.verdict, SpectralVerdict::Unstable);
    EXPECT_FALSE(r.spectrally_stable);
    EXPECT_FALSE(r.lmi_feasible);
    EXPECT_FALSE(r.alpha.has_value());
}

TEST(Classify, OriginDecouplesWhenCrossTermRemoved) {
    ModelParams p;
    Matrix4d J = jacobian(State::Zero().eval(), p);
    J(0, 3) = 0.0;
    expect_same_spectrum(eigenvalues_4x4(J), {p.a1, -p.z1, -p.s1 * p.s3, -p.d2}, 1e-12);
}

TEST(Classify, OriginSpectrumForRandomParameters) {
    testing::Gen gen(24);
    for (int i = 0; i < 200; ++i) {
        const ModelParams p = gen.params();
        const auto eqs = find_equilibria(p);
        const StabilityReport r = classify_equilibrium(p, eqs[0], NoiseIntensities{});
        expect_same_spectrum(r.eigenvalues, origin_spectrum(p), 1e-10);
        // The (X1, X4) block has trace a1 - d2 and determinant d1 d3 - a1 d2.
        const bool unstable = p.a1 * p.d2 > p.d1 * p.d3 || p.a1 > p.d2;
        EXPECT_EQ(r.verdict, unstable ? SpectralVerdict::Unstable : SpectralVerdict::Stable)
            << "a1=" << p.a1 << " d1=" << p.d1 << " d2=" << p.d2 << " d3=" << p.d3;
    }
}

TEST(Classify, RejectsInfeasibleEquilibrium) {
    const ModelParams p;
    const auto eqs = find_equilibria(p);
    EXPECT_THROW(classify_equilibrium(p, eqs[1], NoiseIntensities{}), InvalidInput);
}

TEST(Lmi, DiagonalSyntheticCase) {
    const LmiResult r = lmi_check(-Matrix4d::Identity(), 0.01 * Matrix4d::Identity(), Matrix4d::Identity());
    EXPECT_TRUE(r.feasible);
    ASSERT_TRUE(r.alpha && r.decay_rate_bound);
    EXPECT_NEAR(*r.alpha, 1.99, 1e-14);
    EXPECT_NEAR(*r.decay_rate_bound, 0.995, 1e-14);
    EXPECT_NEAR(r.max_eigenvalue, -1.99, 1e-14);
}

TEST(Lmi, ZeroNoiseReducesToSymmetricPart) {
    testing::Gen gen(25);
    for (int i = 0; i < 300; ++i) {
        Matrix4d J;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) J(r, c) = gen.uniform(-2, 1);
        const Matrix4d S = J + J.transpose();
        const double lmax = Eigen::SelfAdjointEigenSolver<Matrix4d>(S).eigenvalues().maxCoeff();
        const LmiResult r = lmi_check(J, Matrix4d::Zero(), Matrix4d::Identity());
        EXPECT_NEAR(r.max_eigenvalue, lmax, 1e-12);
        EXPECT_EQ(r.feasible, lmax < 0.0);
    }
}

TEST(Lmi, FeasibilityImpliesSpectralStability) {
    testing::Gen gen(26);
    std::size_t feasible = 0;
    for (int i = 0; i < 500; ++i) {
        Matrix4d J;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) J(r, c) = gen.uniform(-1, 1) - (r == c ? 1.5 : 0.0);
        const Vector4d s = gen.noise(0.5).sigma;
        const LmiResult r = lmi_check(J, s.cwiseAbs2().asDiagonal().toDenseMatrix(), Matrix4d::Identity());
        if (!r.feasible) continue;
        ++feasible;
        EXPECT_LT(eigenvalues_4x4(J).real().maxCoeff(), 0.0);
    }
    EXPECT_GT(feasible, 50u);
}

TEST(Lmi, WeightedDecayBoundUsesLargestWeight) {
    const Matrix4d P = Vector4d(1, 2, 3, 4).asDiagonal();
    const LmiResult r = lmi_check(-Matrix4d::Identity(), Matrix4d::Zero(), P);
    ASSERT_TRUE(r.feasible);
    EXPECT_NEAR(*r.alpha, 2.0, 1e-13);
    EXPECT_NEAR(*r.decay_rate_bound, 2.0 / 8.0, 1e-13);
}

TEST(Lmi, RejectsNonSpdWeight) {
    const Matrix4d J = -Matrix4d::Identity();
    Matrix4d asym = Matrix4d::Identity();
    asym(0, 1) = 0.5;
    EXPECT_THROW(lmi_check(J, Matrix4d::Zero(), asym), InvalidInput);
    EXPECT_THROW(lmi_check(J, Matrix4d::Zero(), Vector4d(1, 1, 0, 1).asDiagonal().toDenseMatrix()), InvalidInput);
    EXPECT_THROW(lmi_check(J, Matrix4d::Zero(), -Matrix4d::Identity()), InvalidInput);
}

TEST(PersistenceBound, Table1Arithmetic) {
    const PersistenceBound b = persistence_bound(PersistenceSpec{}, NoiseIntensities{});
    EXPECT_EQ(b.status, BoundStatus::Ok);
    EXPECT_NEAR(b.noise_term, 0.0204, 1e-15);
    ASSERT_TRUE(b.value);
    EXPECT_NEAR(*b.value, 1.9592, 1e-12);
}

TEST(PersistenceBound, BoundaryAndFailureCases) {
    const NoiseIntensities noise;
    PersistenceSpec spec;
    spec.eta = 0.5 * noise.sigma.cwiseAbs2().sum();
    const PersistenceBound edge = persistence_bound(spec, noise);
    EXPECT_EQ(edge.status, BoundStatus::Ok);
    EXPECT_EQ(*edge.value, 0.0);

    spec.eta = 0.01;
    const PersistenceBound fail = persistence_bound(spec, noise);
    EXPECT_EQ(fail.status, BoundStatus::ConditionFails);
    EXPECT_FALSE(fail.value);
    EXPECT_EQ(bound_status_name(fail.status), "noise-condition-fails");

    spec.eta = 1.0;
    spec.kappa = 0.0;
    EXPECT_EQ(persistence_bound(spec, noise).status, BoundStatus::Unbounded);

    spec.kappa = -1.0;
    EXPECT_THROW(persistence_bound(spec, noise), InvalidInput);
}

TEST(PersistenceBound, MonotoneInNoiseAndEta) {
    testing::Gen gen(27);
    for (int i = 0; i < 300; ++i) {
        PersistenceSpec spec;
        spec.c = gen.state(0.1, 3.0);
        spec.eta = gen.uniform(0.5, 3.0);
        spec.kappa = gen.uniform(0.1, 2.0);
        NoiseIntensities noise = gen.noise(0.4);
        const auto base = persistence_bound(spec, noise);
        if (!base.value) continue;
        NoiseIntensities louder = noise;
        louder.sigma(i % 4) += gen.uniform(0.0, 0.2);
        const auto noisy = persistence_bound(spec, louder);
        if (noisy.value) {
            EXPECT_LE(*noisy.value, *base.value);
        }
        spec.eta += gen.uniform(0.0, 1.0);
        EXPECT_GE(*persistence_bound(spec, noise).value, *base.value);
    }
}

TEST(DriftCondition, VacuousEtaHoldsEverywhere) {
    PersistenceSpec spec;
    spec.eta = -1e6;
    const auto r = check_persistence_drift_condition(ModelParams{}, spec,
                                                     Box4{Vector4d::Constant(0.1), Vector4d::Constant(10.0)}, 6);
    EXPECT_TRUE(r.holds);
    EXPECT_GT(r.min_margin, 0.0);
    EXPECT_EQ(r.points, 7u * 7u * 7u * 7u);
}

TEST(DriftCondition, UnitStateMargin) {
    PersistenceSpec spec;
    spec.kappa = 0.0;
    const auto r = check_persistence_drift_condition(ModelParams{}, spec,
                                                     Box4{Vector4d::Ones(), Vector4d::Ones()}, 1);
    EXPECT_NEAR(r.min_margin, 0.52 - 0.37 - 0.105 - 0.25 - 1.0, 1e-14);
    EXPECT_NEAR(r.min_margin, -1.205, 1e-14);
    EXPECT_FALSE(r.holds);
}

TEST(DriftCondition, RefiningGridNeverRaisesMinimum) {
    testing::Gen gen(28);
    for (int i = 0; i < 20; ++i) {
        const ModelParams p = gen.params();
        const Box4 box{gen.state(0.05, 1.0), gen.state(2.0, 8.0)};
        const std::size_t n = 1 + static_cast<std::size_t>(gen.uniform(0, 5));
        const auto coarse = check_persistence_drift_condition(p, PersistenceSpec{}, box, n);
        const auto fine = check_persistence_drift_condition(p, PersistenceSpec{}, box, 2 * n);
        EXPECT_LE(fine.min_margin, coarse.min_margin);
    }
}

TEST(DriftCondition, RejectsBoxTouchingZero) {
    EXPECT_THROW(check_persistence_drift_condition(ModelParams{}, PersistenceSpec{},
                                                   Box4{Vector4d(0.1, 0.0, 0.1, 0.1), Vector4d::Constant(1.0)}, 2),
                 InvalidInput);
}

}  // namespace
}  // namespace esd
