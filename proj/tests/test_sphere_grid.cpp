#include <gtest/gtest.h>

#include "support.hpp"

using namespace lpcurv;
using namespace lpcurv::testing;

namespace {

GridPtr grid32() {
    static const auto g = SphericalGrid::create(32, 64);
    return g;
}

ScalarField x1(const GridPtr& g) { return ScalarField::from_function(g, [](const Eigen::Vector3d& x) { return x[0]; }); }
ScalarField x3(const GridPtr& g) { return ScalarField::from_function(g, [](const Eigen::Vector3d& x) { return x[2]; }); }

}  // namespace

TEST(SphericalGrid, WeightsSumToFourPi) {
    for (int n : {2, 5, 16, 33, 64}) {
        const auto g = SphericalGrid::create(n, 2 * n);
        EXPECT_NEAR(g->weights().sum() / (4.0 * pi), 1.0, 1e-12) << n;
    }
}

TEST(SphericalGrid, AntipodeIsFixedPointFreeInvolution) {
    for (int n : {3, 8, 17}) {
        const auto g = SphericalGrid::create(n, 2 * n + 2);
        for (Eigen::Index i = 0; i < g->size(); ++i) {
            const auto a = g->antipode(i);
            EXPECT_NE(a, i);
            EXPECT_EQ(g->antipode(a), i);
            EXPECT_EQ(g->unit_vector(a), Eigen::Vector3d(-g->unit_vector(i)));
            EXPECT_NEAR(g->theta(g->ring(a)) + g->theta(g->ring(i)), pi, 1e-14);
        }
    }
}

TEST(SphericalGrid, NoPoleNodes) {
    const auto g = SphericalGrid::create(40, 80);
    for (int j = 0; j < g->n_theta(); ++j) {
        EXPECT_GT(g->theta(j), 0.0);
        EXPECT_LT(g->theta(j), pi);
    }
}

TEST(SphericalGrid, RejectsInvalidShapes) {
    EXPECT_THROW(SphericalGrid::create(8, 15), Error);
    EXPECT_THROW(SphericalGrid::create(8, 10), Error);
    EXPECT_THROW(SphericalGrid::create(1, 2), Error);
}

TEST(CovariantGradient, ConstantHasZeroGradient) {
    const auto grad = covariant_gradient(ScalarField(grid32(), 5.0));
    EXPECT_LT(grad.v1.abs().maxCoeff(), roundoff_floor(*grid32()));
    EXPECT_LT(grad.v2.abs().maxCoeff(), roundoff_floor(*grid32()));
}

TEST(CovariantGradient, CoordinateFunctions) {
    const auto g = grid32();
    const auto gz = covariant_gradient(x3(g));
    const auto gx = covariant_gradient(x1(g));
    for (Eigen::Index i = 0; i < g->size(); ++i) {
        const double th = g->theta(g->ring(i)), ph = g->phi(g->column(i));
        EXPECT_NEAR(gz.v1[i], -std::sin(th), roundoff_floor(*grid32()));
        EXPECT_NEAR(gz.v2[i], 0.0, roundoff_floor(*grid32()));
        EXPECT_NEAR(gx.v1[i], std::cos(th) * std::cos(ph), roundoff_floor(*grid32()));
        EXPECT_NEAR(gx.v2[i], -std::sin(ph), roundoff_floor(*grid32()));
    }
}

TEST(CovariantHessian, ConstantAndDegreeOne) {
    const auto g = grid32();
    const auto h0 = covariant_hessian(ScalarField(g, 3.0));
    EXPECT_LT(h0.t11.abs().maxCoeff() + h0.t12.abs().maxCoeff() + h0.t22.abs().maxCoeff(), 3.0 * roundoff_floor(*grid32()));
    const auto u = x3(g);
    const auto h = covariant_hessian(u);
    EXPECT_LT((h.t11 + u.values()).abs().maxCoeff(), roundoff_floor(*grid32()));
    EXPECT_LT((h.t22 + u.values()).abs().maxCoeff(), roundoff_floor(*grid32()));
    EXPECT_LT(h.t12.abs().maxCoeff(), roundoff_floor(*grid32()));
}

TEST(CovariantHessian, MatchesAmbientPolynomialOracle) {
    // For u = U|_S with U a polynomial, ∇²u(a, b) = D²U(a, b) - (x·∇U) <a, b> on tangent a, b.
    const auto g = grid32();
    auto U = [](const Eigen::Vector3d& x) { return x[0] * x[1] * x[2] + x[2] * x[2] + 0.3 * x[0] * x[0] * x[1]; };
    auto dU = [](const Eigen::Vector3d& x) {
        return Eigen::Vector3d(x[1] * x[2] + 0.6 * x[0] * x[1], x[0] * x[2] + 0.3 * x[0] * x[0], x[0] * x[1] + 2 * x[2]);
    };
    auto d2U = [](const Eigen::Vector3d& x) {
        Eigen::Matrix3d m;
        m << 0.6 * x[1], x[2] + 0.6 * x[0], x[1], x[2] + 0.6 * x[0], 0.0, x[0], x[1], x[0], 2.0;
        return m;
    };
    const auto u = ScalarField::from_function(g, U);
    const auto h = covariant_hessian(u);
    for (Eigen::Index i = 0; i < g->size(); ++i) {
        const Eigen::Vector3d x = g->unit_vector(i), a = g->e_theta(i), b = g->e_phi(i);
        const double radial = x.dot(dU(x));
        EXPECT_NEAR(h.t11[i], a.dot(d2U(x) * a) - radial, roundoff_floor(*grid32()));
        EXPECT_NEAR(h.t12[i], a.dot(d2U(x) * b), roundoff_floor(*grid32()));
        EXPECT_NEAR(h.t22[i], b.dot(d2U(x) * b) - radial, roundoff_floor(*grid32()));
    }
}

TEST(Laplacian, EigenvaluesOfLowDegrees) {
    const auto g = grid32();
    EXPECT_LT(laplacian(ScalarField(g, 7.0)).sup_norm(), 7.0 * roundoff_floor(*grid32()));
    const auto u1 = x3(g);
    EXPECT_LT((laplacian(u1).values() + 2.0 * u1.values()).abs().maxCoeff(), roundoff_floor(*grid32()));
    const auto u2 = ScalarField::from_function(g, [](const Eigen::Vector3d& x) { return 0.5 * (3 * x[2] * x[2] - 1); });
    EXPECT_LT((laplacian(u2).values() + 6.0 * u2.values()).abs().maxCoeff(), roundoff_floor(*grid32()));
    const auto h = covariant_hessian(u2);
    EXPECT_LT((h.trace() + 6.0 * u2.values()).abs().maxCoeff(), roundoff_floor(*grid32()));
}

TEST(Laplacian, EqualsHessianTraceNodewise) {
    std::mt19937 rng(3);
    const auto g = grid32();
    const auto u = random_field(g, rng, 20, 1.0, false);
    const auto lap = laplacian(u).values();
    const auto tr = covariant_hessian(u).trace();
    EXPECT_LE((lap - tr).abs().maxCoeff(), roundoff_floor(*grid32()) * lap.abs().maxCoeff());
}

TEST(Laplacian, ExactOnHarmonicsUpToDegreeFourUnderRefinement) {
    // spectral scheme: the error stays at round-off on every grid that resolves the degree
    for (int n : {8, 16, 32, 64}) {
        const auto g = SphericalGrid::create(n, 2 * n);
        for (int l = 0; l <= 4; ++l) {
            for (int m = 0; m <= l; ++m) {
                auto c = SpectralCoeffs::zero(g->lmax());
                c.cos(l, m) = 1.0;
                const auto u = synthesize(g, c);
                const double err = (laplacian(u).values() + l * (l + 1.0) * u.values()).abs().maxCoeff();
                EXPECT_LT(err, roundoff_floor(*g)) << "n=" << n << " l=" << l << " m=" << m;
            }
        }
    }
}

TEST(Laplacian, IntegratesToZero) {
    std::mt19937 rng(11);
    const auto g = grid32();
    for (int trial = 0; trial < 10; ++trial) {
        const auto u = random_field(g, rng, 25, 3.0, false);
        EXPECT_NEAR(integrate(laplacian(u)), 0.0, 1e-11);
    }
}

TEST(SymmetrizeEven, ExamplesAndIdempotence) {
    const auto g = grid32();
    const auto even = ScalarField::from_function(g, [](const Eigen::Vector3d& x) { return x[0] * x[2] + 2.0; });
    EXPECT_EQ(evenness_defect(even), 0.0);
    EXPECT_LT(max_rel_diff(symmetrize_even(even).values(), even.values()), 1e-15);
    EXPECT_EQ(symmetrize_even(x3(g)).sup_norm(), 0.0);
    const ScalarField shifted(g, 1.0 + x3(g).values());
    EXPECT_LT((symmetrize_even(shifted).values() - 1.0).abs().maxCoeff(), 1e-15);

    std::mt19937 rng(5);
    const auto u = random_field(g, rng, 12, 1.0, false);
    const auto once = symmetrize_even(u);
    const auto twice = symmetrize_even(once);
    EXPECT_TRUE((once.values() == twice.values()).all());
    EXPECT_EQ(evenness_defect(once), 0.0);
}

TEST(Integrate, Examples) {
    const auto g = grid32();
    EXPECT_NEAR(integrate(ScalarField(g, 1.0)), 4.0 * pi, 4.0 * pi * 1e-12);
    EXPECT_NEAR(integrate(x3(g)), 0.0, 1e-13);
    const ScalarField z2(g, x3(g).values().square());
    EXPECT_NEAR(integrate(z2), 4.0 * pi / 3.0, 1e-12);
}

TEST(SpectralTransform, AnalyzeSynthesizeRoundTrip) {
    std::mt19937 rng(17);
    const auto g = grid32();
    const auto u = random_field(g, rng, g->lmax(), 1.0, false);
    const auto back = synthesize(g, analyze(u));
    EXPECT_LT(max_rel_diff(back.values(), u.values()), 1e-12);
}

TEST(SpectralTransform, PointEvaluationMatchesNodes) {
    std::mt19937 rng(19);
    const auto g = grid32();
    const auto u = random_field(g, rng, 12, 1.0, false);
    const auto c = analyze(u);
    const auto grad = covariant_gradient(u);
    for (Eigen::Index i = 0; i < g->size(); i += 97) {
        const auto [val, gr] = g->transform().evaluate(c, g->theta(g->ring(i)), g->phi(g->column(i)));
        EXPECT_NEAR(val, u[i], 1e-12);
        EXPECT_NEAR(gr[0], grad.v1[i], 1e-11);
        EXPECT_NEAR(gr[1], grad.v2[i], 1e-11);
    }
}
