#include <gtest/gtest.h>

#include "support.hpp"

using namespace lpcurv;
using namespace lpcurv::testing;

namespace {

GridPtr grid32() {
    static const auto g = SphericalGrid::create(32, 64);
    return g;
}

ProblemSpec unit_spec(double p = 1.5) { return ProblemSpec::create(ScalarField(grid32(), 1.0), 1, p); }

const Solution& ellipsoid_solution() {
    static const Solution sol = [] {
        Ellipsoid e;
        e.axes = {1.3, 1.0, 0.8};
        return solve_main(ProblemSpec::create(e.manufactured_density(grid32(), 1.5, 1), 1, 1.5));
    }();
    return sol;
}

}  // namespace

TEST(C0Bounds, SphereHoldsWithEquality) {
    const auto b = c0_bounds_check(ScalarField(grid32(), 4.0), unit_spec());
    EXPECT_TRUE(b.upper_ok);
    EXPECT_TRUE(b.lower_ok);
    EXPECT_NEAR(b.upper_slack, 1.0, 1e-14);
    EXPECT_NEAR(b.lower_slack, 1.0, 1e-14);
    EXPECT_DOUBLE_EQ(b.constant, 0.5);
}

TEST(C0Bounds, EllipsoidHoldsStrictly) {
    const auto& sol = ellipsoid_solution();
    const auto b = c0_bounds_check(sol.s, sol.spec);
    EXPECT_TRUE(b.upper_ok && b.lower_ok);
    EXPECT_GT(b.upper_slack, 1.0);
    EXPECT_GT(b.lower_slack, 1.0);
}

TEST(C0Bounds, WrongSphereFails) {
    const auto b = c0_bounds_check(ScalarField(grid32(), 1.0), unit_spec());
    EXPECT_FALSE(b.upper_ok && b.lower_ok);
}

TEST(ChouWang, Constant) { EXPECT_NEAR(chou_wang_constant(2), 96.0 / std::sqrt(27.0), 1e-14); }

TEST(ChouWang, SphereUsesFirstBranch) {
    const auto r = chou_wang_check(ScalarField(grid32(), 2.0));
    EXPECT_EQ(r.branch, 1);
    EXPECT_NEAR(r.margin, std::sqrt(3.0), 1e-12);
}

TEST(ChouWang, LongEllipsoidUsesSecondBranch) {
    const auto g = SphericalGrid::create(64, 128);
    Ellipsoid e;
    e.axes = {4.0, 1.0, 1.0};
    const auto s = e.support_field(g);
    const auto r = chou_wang_check(s);
    EXPECT_EQ(r.branch, 2);
    EXPECT_NEAR(r.ratio, 4.0, 1e-2);
    EXPECT_NEAR(r.max_radius, 16.0, 1e-6 * 16.0);
    const double expected = chou_wang_constant(2) * 16.0 / (s.max() * s.max() / s.min());
    EXPECT_NEAR(r.margin, expected, 1e-6 * expected);
}

TEST(ChouWang, RandomEvenBodies) {
    std::mt19937 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_convex_even(grid32(), rng, 0.2 + 0.6 * (trial % 10) / 10.0);
        EXPECT_NO_THROW(chou_wang_check(s)) << trial;
    }
}

TEST(ChouWang, RejectsNonConvexInput) {
    const auto s = ScalarField::from_function(grid32(), [](const Eigen::Vector3d& x) {
        const double z2 = x[2] * x[2];
        return 1.0 + 0.8 * (35 * z2 * z2 - 30 * z2 + 3) / 8.0;
    });
    EXPECT_THROW(chou_wang_check(s), Error);
}

TEST(GradientBound, SphereGivesExactlyOne) {
    const auto spec = unit_spec();
    for (double gamma : {0.1, 0.5, 0.9}) EXPECT_EQ(gradient_bound_report(ScalarField(grid32(), 4.0), gamma, spec), 1.0);
}

TEST(GradientBound, EllipsoidIsFiniteAboveOne) {
    const auto& sol = ellipsoid_solution();
    const double beta = gradient_bound_report(sol.s, 0.5, sol.spec);
    EXPECT_TRUE(std::isfinite(beta));
    EXPECT_GT(beta, 1.0);
}

TEST(GradientBound, GammaOutsideOpenInterval) {
    const auto spec = unit_spec();
    const ScalarField s(grid32(), 4.0);
    for (double gamma : {0.0, 1.0, 1.5, -0.2}) {
        try {
            gradient_bound_report(s, gamma, spec);
            FAIL() << gamma;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::GammaOutOfRange);
        }
    }
}

TEST(NewtonMaclaurin, SphereIdentityAndEllipsoid) {
    const auto sphere = newton_maclaurin_check(ScalarField(grid32(), 4.0), unit_spec());
    EXPECT_TRUE(sphere.ok);
    EXPECT_NEAR(sphere.min_slack, 1.0, 1e-12);
    for (double p : {1.2, 1.5, 1.9}) {
        const auto id = newton_maclaurin_check(ScalarField(grid32(), 1.0), unit_spec(p));
        EXPECT_TRUE(id.ok);
        EXPECT_NEAR(id.min_slack, 1.0, 1e-12);
    }
    const auto& sol = ellipsoid_solution();
    const auto e = newton_maclaurin_check(sol.s, sol.spec);
    EXPECT_TRUE(e.ok);
    EXPECT_GT(e.min_slack, 1.0);
}

TEST(FullReport, SpherePassesEverything) {
    const auto rep = full_report(ScalarField(grid32(), 4.0), unit_spec());
    EXPECT_TRUE(rep.lemmas_pass());
    EXPECT_TRUE(rep.bounds_pass());
    EXPECT_EQ(rep.chou_wang.branch, 1);
    EXPECT_EQ(rep.beta_measured.at(0.5), 1.0);
    EXPECT_NEAR(rep.convexity_margin, 4.0, 4.0 * roundoff_floor(*grid32()));
    EXPECT_NEAR(rep.sigma1_max, 8.0, 8.0 * roundoff_floor(*grid32()));
    EXPECT_LT(rep.main_residual, roundoff_floor(*grid32()));
}

TEST(FullReport, FlagsNonEvenInput) {
    const auto s = ScalarField::from_function(grid32(), [](const Eigen::Vector3d& x) { return 2.0 + 0.3 * x[2]; });
    const auto rep = full_report(s, unit_spec());
    EXPECT_GT(rep.evenness_defect, 0.0);
    EXPECT_FALSE(rep.lemmas_pass());
}

TEST(FullReport, NonConvexSkipsChouWang) {
    const auto s = ScalarField::from_function(grid32(), [](const Eigen::Vector3d& x) {
        const double z2 = x[2] * x[2];
        return 1.0 + 0.8 * (35 * z2 * z2 - 30 * z2 + 3) / 8.0;
    });
    const auto rep = full_report(s, unit_spec());
    EXPECT_LT(rep.convexity_margin, 0.0);
    EXPECT_EQ(rep.chou_wang.branch, 0);
    EXPECT_FALSE(rep.chou_wang_note.empty());
    EXPECT_FALSE(rep.lemmas_pass());
}

TEST(FullReport, Deterministic) {
    const auto& sol = ellipsoid_solution();
    const auto a = full_report(sol);
    const auto b = full_report(sol);
    EXPECT_EQ(a.beta_measured, b.beta_measured);
    EXPECT_EQ(a.chou_wang.margin, b.chou_wang.margin);
    EXPECT_EQ(a.newton_maclaurin.min_slack, b.newton_maclaurin.min_slack);
    EXPECT_EQ(a.main_residual, b.main_residual);
}
