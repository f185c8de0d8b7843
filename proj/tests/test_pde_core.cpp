#include <gtest/gtest.h>

#include "support.hpp"

using namespace lpcurv;
using namespace lpcurv::testing;

namespace {

GridPtr grid24() {
    static const auto g = SphericalGrid::create(24, 48);
    return g;
}

ProblemSpec unit_spec(const GridPtr& g, double p = 1.5) { return ProblemSpec::create(ScalarField(g, 1.0), 1, p); }

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no lpcurv::Error thrown";
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(ProblemSpec, DerivedQuantities) {
    const auto g = grid24();
    const auto spec = ProblemSpec::create(ScalarField(g, 3.0), 1, 1.5);
    EXPECT_DOUBLE_EQ(spec.q, 1.5);
    EXPECT_TRUE(spec.guarantee_regime);
    EXPECT_NEAR(spec.g_aux[0], 6.0, 1e-15);
}

TEST(ProblemSpec, RegimeGate) {
    const auto g = grid24();
    const ScalarField one(g, 1.0);
    EXPECT_EQ(kind_of([&] { ProblemSpec::create(one, 1, 2.0); }), ErrorKind::RegimeRejected);
    EXPECT_EQ(kind_of([&] { ProblemSpec::create(one, 1, 1.0); }), ErrorKind::RegimeRejected);
    EXPECT_EQ(kind_of([&] { ProblemSpec::create(one, 1, 0.5, true); }), ErrorKind::RegimeRejected);
    const auto forced = ProblemSpec::create(one, 1, 2.5, true);
    EXPECT_FALSE(forced.guarantee_regime);
    EXPECT_DOUBLE_EQ(forced.q, 2.5);
}

TEST(ProblemSpec, RejectsBadDensities) {
    const auto g = grid24();
    EXPECT_EQ(kind_of([&] { ProblemSpec::create(ScalarField(g, 0.0), 1, 1.5); }), ErrorKind::InvalidArgument);
    const auto odd = ScalarField::from_function(g, [](const Eigen::Vector3d& x) { return 1.0 + 0.5 * x[2]; });
    EXPECT_EQ(kind_of([&] { ProblemSpec::create(odd, 1, 1.5); }), ErrorKind::InvalidArgument);
    EXPECT_EQ(kind_of([&] { ProblemSpec::create(ScalarField(g, 1.0), 2, 1.5); }), ErrorKind::InvalidArgument);
}

TEST(MainResidual, Examples) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    EXPECT_LT(main_residual(ScalarField(g, 4.0), spec).sup_norm(), 4.0 * roundoff_floor(*g));
    const auto r1 = main_residual(ScalarField(g, 1.0), spec);
    EXPECT_LT((r1.values() + 0.5).abs().maxCoeff(), 4.0 * roundoff_floor(*g));

    std::mt19937 rng(1);
    const auto s = random_convex_even(g, rng, 0.4);
    const auto ev = curvature_quotient(tau_field(s), 1);
    const ScalarField f(g, ev.raw.values() / s.values().pow(0.5));
    EXPECT_LT(main_residual(s, ProblemSpec::create(f, 1, 1.5)).sup_norm(), 4.0 * roundoff_floor(*g));
}

TEST(AuxResidual, Examples) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    const ScalarField one(g, 1.0);
    EXPECT_LT(aux_residual({one, one, 0.0, 0.0}, spec, one).sup_norm(), 4.0 * roundoff_floor(*g));
    const double a = 2.7;
    const ScalarField s(g, std::pow(a, 2.0 / spec.q));
    EXPECT_LT(aux_residual({s, ScalarField(g, a), 0.0, 0.0}, spec, one).sup_norm(), 4.0 * roundoff_floor(*g));

    std::mt19937 rng(2);
    const auto target = random_convex_even(g, rng, 0.3);
    const ScalarField v(g, (0.2 * random_field(g, rng, 4, 1.0, true).values()).exp());
    const auto ev = curvature_quotient(shifted_hessian(target, v), 1);
    const ScalarField ft(g, v.values() * target.values().pow(-spec.q) * ev.F_value.values());
    EXPECT_LT(aux_residual({target, v, 0.0, 0.0}, spec, ft).sup_norm(), 4.0 * roundoff_floor(*g));
}

TEST(LinearizedOperator, ModelState) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    const ScalarField one(g, 1.0);
    const LinearizedOperator op({one, one, 0.0, 0.0}, spec, one);
    EXPECT_LT((op.apply(one).values() + spec.q).abs().maxCoeff(), 4.0 * roundoff_floor(*g));
    const auto z = ScalarField::from_function(g, [](const Eigen::Vector3d& x) { return x[2]; });
    EXPECT_LT((op.apply(z).values() + (1.0 + spec.q) * z.values()).abs().maxCoeff(), 4.0 * roundoff_floor(*g));
}

TEST(LinearizedOperator, MatchesDirectionalFiniteDifferences) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    std::mt19937 rng(3);
    const double eps = 1e-6;
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_convex_even(g, rng, 0.3);
        const ScalarField v(g, (0.1 * random_field(g, rng, 4, 1.0, true).values()).exp());
        const ScalarField ft(g, 1.0 + 0.3 * random_field(g, rng, 4, 1.0, true).values().abs());
        const auto eta = random_field(g, rng, 8, 1.0, false);
        const LinearizedOperator op({s, v, 0.0, 0.0}, spec, ft);
        const ScalarField sp(g, s.values() + eps * eta.values()), sm(g, s.values() - eps * eta.values());
        const Eigen::ArrayXd fd = (aux_residual({sp, v, 0.0, 0.0}, spec, ft).values() -
                                   aux_residual({sm, v, 0.0, 0.0}, spec, ft).values()) /
                                  (2 * eps);
        EXPECT_LT(max_rel_diff(op.apply(eta).values(), fd), 1e-5);
    }
}

TEST(SolveAuxiliary, TrivialAndConstantData) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    const ScalarField one(g, 1.0);
    const auto s1 = solve_auxiliary(one, one, spec, {});
    EXPECT_LT((s1.s.values() - 1.0).abs().maxCoeff(), 1e-13);
    const auto s2 = solve_auxiliary(ScalarField(g, 2.0), one, spec, {});
    EXPECT_NEAR(s2.s.max(), std::pow(2.0, 4.0 / 3.0), 1e-12);
    EXPECT_NEAR(s2.s.min(), std::pow(2.0, 4.0 / 3.0), 1e-12);
}

TEST(SolveAuxiliary, RecoversManufacturedSolution) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    std::mt19937 rng(4);
    for (int trial = 0; trial < 3; ++trial) {
        const auto target = random_convex_even(g, rng, 0.4);
        const ScalarField v(g, (0.3 * random_field(g, rng, 4, 1.0, true).values()).exp());
        const auto ev = curvature_quotient(shifted_hessian(target, v), 1);
        const ScalarField ft(g, v.values() * target.values().pow(-spec.q) * ev.F_value.values());
        const auto sol = solve_auxiliary(v, ft, spec, {});
        EXPECT_LT(max_rel_diff(sol.s.values(), target.values()), 1e-10);
        EXPECT_LE(sol.residual, std::max(SolverConfig{}.newton_tol, roundoff_floor(*g)));
        EXPECT_EQ(evenness_defect(sol.s), 0.0);
        EXPECT_TRUE(in_aux_cone(sol.s, v));
    }
}

TEST(SolveAuxiliary, EveryAcceptedIterateStaysInCone) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    std::mt19937 rng(5);
    const auto target = random_convex_even(g, rng, 0.5);
    const ScalarField v(g, (0.4 * random_field(g, rng, 4, 1.0, true).values()).exp());
    const auto ev = curvature_quotient(shifted_hessian(target, v), 1);
    const ScalarField ft(g, v.values() * target.values().pow(-spec.q) * ev.F_value.values());
    const auto sol = solve_auxiliary(v, ft, spec, {});
    for (const auto& step : sol.trace.steps) {
        if (!step.accepted) continue;
        EXPECT_GT(step.convexity_margin, 0.0);
        for (double r : step.residuals) EXPECT_TRUE(std::isfinite(r));
    }
}

TEST(SolveAuxiliary, QuadraticConvergence) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    std::mt19937 rng(6);
    const auto target = random_convex_even(g, rng, 0.3);
    const ScalarField v(g, (0.2 * random_field(g, rng, 4, 1.0, true).values()).exp());
    const auto ev = curvature_quotient(shifted_hessian(target, v), 1);
    const ScalarField ft(g, v.values() * target.values().pow(-spec.q) * ev.F_value.values());
    const auto sol = solve_auxiliary(v, ft, spec, {});
    double worst = 0.0;
    for (const auto& step : sol.trace.steps) {
        const auto& r = step.residuals;
        for (std::size_t j = 0; j + 1 < r.size(); ++j)
            if (r[j] < 1e-3 && r[j + 1] > 1e3 * roundoff_floor(*g)) worst = std::max(worst, r[j + 1] / (r[j] * r[j]));
    }
    EXPECT_LT(worst, 1e3);
}

TEST(SolveAuxiliary, ConstantDataIgnoresPerturbedInitialGuess) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    std::mt19937 rng(7);
    const ScalarField v(g, 1.7), f(g, 1.3);
    const double exact = std::pow(1.7 * 1.7 / 1.3, 1.0 / spec.q);
    for (int trial = 0; trial < 3; ++trial) {
        const auto pert = random_field(g, rng, 6, 1.0, true);
        const ScalarField guess(g, exact * (1.0 + 1e-2 * pert.values() / pert.sup_norm()));
        const auto sol = solve_auxiliary(v, f, spec, {}, &guess);
        EXPECT_LT((sol.s.values() - exact).abs().maxCoeff(), 1e-12 * exact);
    }
}

TEST(SolveAuxiliary, InputValidation) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    const ScalarField one(g, 1.0);
    EXPECT_EQ(kind_of([&] { solve_auxiliary(ScalarField(g, -1.0), one, spec, {}); }), ErrorKind::InvalidArgument);
    const auto odd = ScalarField::from_function(g, [](const Eigen::Vector3d& x) { return 1.0 + 0.3 * x[0]; });
    EXPECT_EQ(kind_of([&] { solve_auxiliary(odd, one, spec, {}); }), ErrorKind::InvalidArgument);
}

TEST(SolveAuxiliary, InterpolationInequalityAndBoundedLaplacian) {
    const auto g = grid24();
    const auto spec = unit_spec(g);
    std::mt19937 rng(8);
    const ScalarField v(g, (0.3 * random_field(g, rng, 4, 1.0, true).values()).exp());
    const ScalarField f(g, 1.0 + 0.2 * random_field(g, rng, 4, 1.0, true).values().abs());
    const auto sol = solve_auxiliary(v, f, spec, {});
    const auto rep = full_report(sol.s, spec);
    EXPECT_TRUE(std::isfinite(rep.max_laplacian));
    EXPECT_TRUE(rep.interpolation_ok);
}

TEST(Gmres, SolvesNonsymmetricSystem) {
    std::mt19937 rng(9);
    std::normal_distribution<double> n;
    const int size = 60;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(size, size) * 4.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) a(i, j) += 0.2 * n(rng);
    Eigen::VectorXd b(size);
    for (int i = 0; i < size; ++i) b[i] = n(rng);
    Eigen::VectorXd x;
    const auto res = gmres([&](const Eigen::VectorXd& y) { return Eigen::VectorXd(a * y); },
                           [](const Eigen::VectorXd& y) { return y; }, b, x, 1e-12, 20, 500);
    EXPECT_TRUE(res.converged);
    const Eigen::VectorXd direct = a.partialPivLu().solve(b);
    EXPECT_LT((x - direct).norm() / direct.norm(), 1e-10);
}
