#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "lpcurv/convex_geom.hpp"
#include "lpcurv/errors.hpp"
#include "lpcurv/pde_core.hpp"
#include "lpcurv/sphere_grid.hpp"

namespace lpcurv {

/// Relative slack allowed on inequalities that are sharp (equality on spheres).
inline constexpr double sharp_inequality_tolerance = 1e-8;

struct C0Bounds {
    bool upper_ok = false;      ///< R^{p-k-1} <= c / min f
    bool lower_ok = false;      ///< r^{p-k-1} >= c / max f
    double upper_slack = 0.0;   ///< (c / min f) / R^{p-k-1}; >= 1 when the bound holds
    double lower_slack = 0.0;   ///< r^{p-k-1} / (c / max f)
    double constant = 0.0;      ///< c = 1 / C(n,k)
};

inline C0Bounds c0_bounds_check(const ScalarField& s, const ProblemSpec& spec) {
    require_same_grid(s.grid(), spec.grid());
    C0Bounds b;
    b.constant = 1.0 / binomial(spec.n, spec.k);
    const double e = spec.p - spec.k - 1.0;
    b.upper_slack = (b.constant / spec.f.min()) / std::pow(s.max(), e);
    b.lower_slack = std::pow(s.min(), e) / (b.constant / spec.f.max());
    b.upper_ok = b.upper_slack >= 1.0 - sharp_inequality_tolerance;
    b.lower_ok = b.lower_slack >= 1.0 - sharp_inequality_tolerance;
    return b;
}

/// C_n = 32(n+1)/sqrt(27).
inline double chou_wang_constant(int n) { return 32.0 * (n + 1) / std::sqrt(27.0); }

struct ChouWangResult {
    int branch = 0;       ///< 1: R/r <= sqrt(n+1); 2: R^2/r <= C_n max λ_n; 0: not evaluated
    double margin = 0.0;  ///< bound / measured quantity for the held branch
    double ratio = 0.0;   ///< R / r
    double max_radius = 0.0;
};

/// Checks the dichotomy for an origin-symmetric strictly convex body. Throws LemmaViolated when
/// neither branch holds, InvalidArgument when the input is not strictly convex.
inline ChouWangResult chou_wang_check(const ScalarField& s) {
    constexpr int n = 2;
    const auto radii = principal_radii(tau_field(s));
    if (!(radii.lambda1.minCoeff() > 0.0) || !(s.min() > 0.0))
        throw Error(ErrorKind::InvalidArgument, "chou_wang_check needs a positive strictly convex support function");
    ChouWangResult out;
    const double big_r = s.max(), small_r = s.min();
    out.ratio = big_r / small_r;
    out.max_radius = radii.lambda2.maxCoeff();
    const double m1 = std::sqrt(n + 1.0) / out.ratio;
    const double m2 = chou_wang_constant(n) * out.max_radius / (big_r * big_r / small_r);
    if (m1 >= 1.0) {
        out.branch = 1;
        out.margin = m1;
    } else if (m2 >= 1.0) {
        out.branch = 2;
        out.margin = m2;
    } else {
        throw Error(ErrorKind::LemmaViolated, "R/r = " + std::to_string(out.ratio) + " and C_n max lambda / (R^2/r) = " +
                                                  std::to_string(m2));
    }
    return out;
}

/// β = max over nodes of (s^2 + |∇s|^2) / (s^γ R^{2-γ}), for 0 < γ < 2(p-1)/k.
inline double gradient_bound_report(const ScalarField& s, double gamma, const ProblemSpec& spec) {
    const double hi = 2.0 * (spec.p - 1.0) / spec.k;
    if (!(gamma > 0.0 && gamma < hi))
        throw Error(ErrorKind::GammaOutOfRange,
                    "gamma = " + std::to_string(gamma) + " outside (0, " + std::to_string(hi) + ")");
    const double big_r = s.max();
    const auto grad = covariant_gradient(s);
    // (s/R)^{2-γ} (1 + |∇s|^2/s^2) is the same quantity; it is exactly 1 at the node attaining R
    // when ∇s vanishes there
    const Eigen::ArrayXd zeta =
        (s.values() / big_r).pow(2.0 - gamma) * (1.0 + grad.norm_squared() / s.values().square());
    return zeta.maxCoeff();
}

struct NewtonMaclaurinResult {
    bool ok = false;
    double min_slack = 0.0;  ///< min over nodes of lhs / rhs
    double constant = 0.0;   ///< C(n,k)
};

/// Nodewise f s^{p-1} σ_{n-k} >= C(n,k) (min f) r^{p-1} σ_n^{(n-k)/n}. On a solution the left side
/// equals σ_n. Equality holds at umbilic points with s = r and f = min f.
inline NewtonMaclaurinResult newton_maclaurin_check(const ScalarField& s, const ProblemSpec& spec) {
    const auto ev = curvature_quotient(tau_field(s), spec.k);
    const int n = spec.n;
    const Eigen::ArrayXd& sn = ev.sigma[n - 1];
    const Eigen::ArrayXd& snk = ev.sigma[n - spec.k - 1];
    NewtonMaclaurinResult out;
    out.constant = binomial(n, spec.k);
    const Eigen::ArrayXd lhs = spec.f.values() * s.values().pow(spec.p - 1.0) * snk;
    const Eigen::ArrayXd rhs =
        out.constant * spec.f.min() * std::pow(s.min(), spec.p - 1.0) * sn.pow(double(n - spec.k) / n);
    out.min_slack = (lhs / rhs).minCoeff();
    out.ok = out.min_slack >= 1.0 - sharp_inequality_tolerance;
    return out;
}

struct EstimateReport {
    double R = 0.0;
    double r = 0.0;
    C0Bounds c0;
    ChouWangResult chou_wang;
    bool chou_wang_ok = false;
    std::string chou_wang_note;
    std::map<double, double> beta_measured;  ///< γ -> β
    double convexity_margin = 0.0;
    double sigma1_max = 0.0;
    NewtonMaclaurinResult newton_maclaurin;
    double evenness_defect = 0.0;
    double main_residual = std::numeric_limits<double>::infinity();  ///< relative, see main_residual_relative
    double c0_norm = 0.0;
    double c1_norm = 0.0;   ///< sup |s| + sup |∇s|
    double c2_norm = 0.0;   ///< c1_norm + sup of the Hessian spectral norm
    double max_laplacian = 0.0;
    bool interpolation_ok = false;  ///< ||s||_{C1}^2 <= 4 ||s||_{C0} ||s||_{C2}

    /// Explicit inequalities that hold on every valid input.
    bool lemmas_pass() const {
        return chou_wang_ok && newton_maclaurin.ok && convexity_margin > 0.0 && evenness_defect == 0.0;
    }
    /// Bounds that hold on solutions.
    bool bounds_pass() const {
        bool beta_ok = !beta_measured.empty();
        for (const auto& [g, b] : beta_measured) beta_ok = beta_ok && std::isfinite(b);
        return c0.upper_ok && c0.lower_ok && beta_ok;
    }
};

/// Runs every checker on s. Lemma failures are recorded, not thrown; a non-convex input skips
/// Chou–Wang and the curvature-based checks.
inline EstimateReport full_report(const ScalarField& s, const ProblemSpec& spec) {
    require_same_grid(s.grid(), spec.grid());
    EstimateReport rep;
    rep.R = s.max();
    rep.r = s.min();
    rep.evenness_defect = evenness_defect(s);
    rep.c0 = c0_bounds_check(s, spec);

    const auto grad = covariant_gradient(s);
    const auto hess = covariant_hessian(s);
    const auto tau = tau_field(s);
    const auto radii = principal_radii(tau);
    rep.convexity_margin = radii.lambda1.minCoeff();
    rep.sigma1_max = (radii.lambda1 + radii.lambda2).maxCoeff();
    rep.max_laplacian = hess.trace().maxCoeff();

    const auto hess_radii = principal_radii(hess);
    rep.c0_norm = s.sup_norm();
    rep.c1_norm = rep.c0_norm + std::sqrt(grad.norm_squared().maxCoeff());
    rep.c2_norm = rep.c1_norm + hess_radii.lambda1.abs().max(hess_radii.lambda2.abs()).maxCoeff();
    rep.interpolation_ok = rep.c1_norm * rep.c1_norm <= 4.0 * rep.c0_norm * rep.c2_norm;

    const double gamma = (spec.p - 1.0) / spec.k;
    rep.beta_measured[gamma] = gradient_bound_report(s, gamma, spec);

    if (rep.convexity_margin > 0.0 && rep.r > 0.0) {
        rep.main_residual = main_residual_relative(s, spec);
        rep.newton_maclaurin = newton_maclaurin_check(s, spec);
        if (rep.evenness_defect > even_input_tolerance * rep.c0_norm) {
            rep.chou_wang_note = "skipped: input is not even";
        } else {
            try {
                rep.chou_wang = chou_wang_check(s);
                rep.chou_wang_ok = true;
            } catch (const Error& e) {
                rep.chou_wang_note = e.what();
                spdlog::error("{}", e.what());
            }
        }
    } else {
        rep.chou_wang_note = "skipped: input is not strictly convex";
    }
    return rep;
}

}  // namespace lpcurv
