#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "lpcurv/convex_geom.hpp"
#include "lpcurv/errors.hpp"
#include "lpcurv/gmres.hpp"
#include "lpcurv/sphere_grid.hpp"

namespace lpcurv {

/// Relative antipodal mismatch tolerated on inputs declared even; they are then symmetrized exactly.
inline constexpr double even_input_tolerance = 1e-8;

/// Smallest relative residual the spectral derivatives can resolve on this grid. Quadrature
/// round-off of order eps leaks into every coefficient and second derivatives amplify degree l
/// by l(l+1).
inline double roundoff_floor(const SphericalGrid& grid) {
    const double l = grid.lmax() + 1.0;
    return 50.0 * std::numeric_limits<double>::epsilon() * l * l;
}

/// Problem data (n, k, p, f) with derived exponent q and the homotopy density g_aux.
struct ProblemSpec {
    int n = 2;
    int k = 1;
    double p = 1.5;
    ScalarField f;
    double q = 1.5;          ///< (p - 1)/k + 1
    ScalarField g_aux;       ///< (C(n,k) f)^{1/k}; the t = 1 fixed point then solves the main equation
    bool guarantee_regime = true;  ///< 1 < p < k + 1

    const GridPtr& grid() const { return f.grid(); }

    static ProblemSpec create(const ScalarField& f, int k, double p, bool force = false) {
        constexpr int n = 2;
        if (k < 1 || k >= n) throw Error(ErrorKind::InvalidArgument, "k must satisfy 1 <= k < n = 2");
        if (!std::isfinite(p)) throw Error(ErrorKind::InvalidArgument, "p must be finite");
        if (p <= 1.0) throw Error(ErrorKind::RegimeRejected, "p <= 1 is not supported");
        const bool regime = p < k + 1.0;
        if (!regime && !force)
            throw Error(ErrorKind::RegimeRejected, "p = " + std::to_string(p) +
                                                       " is outside the guarantee regime 1 < p < k+1; pass force to proceed");
        if (!regime) spdlog::warn("p = {} is outside 1 < p < k+1: no existence guarantee", p);
        if (!f.all_finite()) throw Error(ErrorKind::InvalidArgument, "f has non-finite values");
        if (f.min() <= 0.0) throw Error(ErrorKind::InvalidArgument, "f must be positive at every node");
        if (evenness_defect(f) > even_input_tolerance * f.sup_norm()) throw Error(ErrorKind::InvalidArgument, "f must be even");
        ProblemSpec spec;
        spec.n = n;
        spec.k = k;
        spec.p = p;
        spec.f = symmetrize_even(f);
        spec.q = (p - 1.0) / k + 1.0;
        spec.g_aux = ScalarField(f.grid(), (binomial(n, k) * spec.f.values()).pow(1.0 / k));
        spec.guarantee_regime = regime;
        return spec;
    }
};

struct SolverConfig {
    double newton_tol = 1e-12;      ///< relative to max |s^q f / v|; raised to the grid's round-off floor
    int max_newton_iters = 30;
    double initial_step = 1.0;      ///< first continuation step in the inner parameter
    double min_step = 1e-4;
    int max_continuation_steps = 400;
    double min_damping = 1.0 / 64.0;
    int gmres_restart = 80;
    int gmres_max_iters = 800;
};

/// Iterate of the auxiliary problem: s, the coefficient field v and the homotopy parameter.
struct AuxState {
    ScalarField s;
    ScalarField v;
    double t = 0.0;
    double residual_norm = 0.0;
};

struct NewtonStepRecord {
    double t = 0.0;
    int newton_iterations = 0;
    std::vector<double> residuals;  ///< relative projected residual before each Newton step
    int gmres_iterations = 0;
    double convexity_margin = 0.0;  ///< min λ_1(∇²s + v g) at the end of the step
    double min_damping = 1.0;
    bool accepted = false;
};

struct OuterRecord {
    double t = 0.0;
    int iteration = 0;
    double fixed_point_residual = 0.0;  ///< ||w - φ_t(w)||_∞
    bool newton = false;
};

struct SolveTrace {
    std::vector<NewtonStepRecord> steps;
    std::vector<OuterRecord> outer;

    int total_newton_iterations() const {
        int n = 0;
        for (const auto& s : steps) n += s.newton_iterations;
        return n;
    }
};

/// Raw main-equation residual σ_n/σ_{n-k}(τ[s]) - s^{p-1} f.
inline ScalarField main_residual(const ScalarField& s, const ProblemSpec& spec) {
    require_same_grid(s.grid(), spec.grid());
    const auto ev = curvature_quotient(tau_field(s), spec.k);
    return {s.grid(), ev.raw.values() - s.values().pow(spec.p - 1.0) * spec.f.values()};
}

/// sup |main_residual| / max(s^{p-1} f).
inline double main_residual_relative(const ScalarField& s, const ProblemSpec& spec) {
    const auto r = main_residual(s, spec);
    return r.sup_norm() / (s.values().pow(spec.p - 1.0) * spec.f.values()).maxCoeff();
}

/// F(∇²s + v g) - s^q f_t / v with normalized F.
inline ScalarField aux_residual(const AuxState& state, const ProblemSpec& spec, const ScalarField& f_t) {
    require_same_grid(state.s.grid(), f_t.grid());
    const auto ev = curvature_quotient(shifted_hessian(state.s, state.v), spec.k);
    return {state.s.grid(), ev.F_value.values() - state.s.values().pow(spec.q) * f_t.values() / state.v.values()};
}

inline bool in_aux_cone(const ScalarField& s, const ScalarField& v) {
    if (!(s.min() > 0.0) || !s.all_finite()) return false;
    return principal_radii(shifted_hessian(s, v)).lambda1.minCoeff() > 0.0;
}

/// η ↦ F^{ij}(∇²s + v g) η_{;ij} - q s^{q-1} (f_t / v) η at a cone state.
class LinearizedOperator {
public:
    LinearizedOperator(const AuxState& state, const ProblemSpec& spec, const ScalarField& f_t)
        : grid_(state.s.grid()) {
        const auto ev = curvature_quotient(shifted_hessian(state.s, state.v), spec.k);
        a11_ = ev.F_matrix.t11;
        a12_ = ev.F_matrix.t12;
        a22_ = ev.F_matrix.t22;
        zeroth_ = spec.q * state.s.values().pow(spec.q - 1.0) * f_t.values() / state.v.values();
        trace_F_ = a11_ + a22_;
    }

    ScalarField apply(const ScalarField& eta) const {
        require_same_grid(grid_, eta.grid());
        return {grid_, apply_spectral(analyze(eta))};
    }

    /// Action on a band-limited η given by its coefficients, as grid values.
    Eigen::ArrayXd apply_spectral(const SpectralCoeffs& c) const {
        const auto d = grid_->transform().derivatives(c);
        return a11_ * d.h11 + 2.0 * a12_ * d.h12 + a22_ * d.h22 - zeroth_ * d.value;
    }

    /// Isotropic model a Δ - c with a, c the grid means of tr F^{ij} / 2 and the zeroth-order
    /// coefficient; diagonal in spherical harmonics.
    double mean_diffusion() const { return 0.5 * trace_F_.mean(); }
    double mean_zeroth_order() const { return zeroth_.mean(); }

    const Eigen::ArrayXd& trace_F() const { return trace_F_; }
    const GridPtr& grid() const { return grid_; }

private:
    GridPtr grid_;
    Eigen::ArrayXd a11_, a12_, a22_, zeroth_, trace_F_;
};

/// Galerkin solve P L synth(δ) = P rhs over the given modes, by preconditioned GMRES.
/// Returns δ as grid values. Throws LinearSolveFailure if GMRES stalls.
inline ScalarField solve_linearized(const LinearizedOperator& op, const ScalarField& rhs, const ModeSet& modes,
                                    double rel_tol, const SolverConfig& cfg, int* iterations = nullptr) {
    const auto& grid = op.grid();
    const auto& tr = grid->transform();
    const Eigen::VectorXd b = modes.pack(tr.analyze(rhs.values()));
    const double a = op.mean_diffusion(), c = op.mean_zeroth_order();
    Eigen::VectorXd diag(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const double l = modes[i].l;
        diag[static_cast<Eigen::Index>(i)] = -a * l * (l + 1.0) - c;
    }
    auto apply = [&](const Eigen::VectorXd& x) { return modes.pack(tr.analyze(op.apply_spectral(modes.unpack(x)))); };
    auto precond = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.cwiseQuotient(diag)); };
    Eigen::VectorXd x = b.cwiseQuotient(diag);
    const auto res = gmres(apply, precond, b, x, rel_tol, cfg.gmres_restart, cfg.gmres_max_iters);
    if (iterations) *iterations = res.iterations;
    if (!res.converged && res.relative_residual > 1e-3)
        throw Error(ErrorKind::LinearSolveFailure,
                    "GMRES reached relative residual " + std::to_string(res.relative_residual));
    return {grid, tr.synthesize(modes.unpack(x))};
}

struct AuxSolution {
    ScalarField s;
    SolveTrace trace;
    double residual = 0.0;       ///< relative projected residual at exit
    double grid_residual = 0.0;  ///< relative nodewise residual at exit
};

namespace detail {

enum class NewtonFailure { None, Cone, NoConvergence, Linear };

struct NewtonOutcome {
    ScalarField s;
    NewtonFailure failure = NewtonFailure::None;
    double residual = 0.0;
    std::string message;
};

inline double residual_scale(const ScalarField& s, const ScalarField& v, const ScalarField& f, double q) {
    return (s.values().pow(q) * f.values() / v.values()).abs().maxCoeff();
}

/// Damped Newton on the even-mode Galerkin system of the auxiliary equation.
inline NewtonOutcome aux_newton(ScalarField s, const ScalarField& v, const ScalarField& f, double t,
                                const ProblemSpec& spec, const SolverConfig& cfg, NewtonStepRecord& rec) {
    const auto& grid = s.grid();
    const auto& tr = grid->transform();
    const ModeSet modes(grid->lmax(), Parity::Even);
    const double tol = std::max(cfg.newton_tol, roundoff_floor(*grid));
    rec.t = t;
    NewtonOutcome out;
    if (!in_aux_cone(s, v)) {
        out.failure = NewtonFailure::Cone;
        out.message = "initial iterate outside the admissible cone";
        return out;
    }
    auto projected_residual = [&](const ScalarField& x, ScalarField* raw) {
        auto r = aux_residual(AuxState{x, v, t, 0.0}, spec, f);
        const double scale = residual_scale(x, v, f, spec.q);
        const auto pr = tr.synthesize(modes.unpack(modes.pack(tr.analyze(r.values()))));
        if (raw) *raw = std::move(r);
        return pr.abs().maxCoeff() / scale;
    };
    ScalarField r;
    double rnorm = projected_residual(s, &r);
    for (int it = 0;; ++it) {
        rec.residuals.push_back(rnorm);
        if (rnorm <= tol) break;
        if (it >= cfg.max_newton_iters) {
            out.failure = NewtonFailure::NoConvergence;
            out.message = "Newton did not converge in " + std::to_string(cfg.max_newton_iters) + " iterations";
            out.s = s;
            out.residual = rnorm;
            return out;
        }
        const LinearizedOperator op(AuxState{s, v, t, rnorm}, spec, f);
        ScalarField delta;
        int gm = 0;
        try {
            const double eta = std::clamp(0.1 * rnorm, 1e-14, 1e-4);
            ScalarField minus_r(grid, -r.values());
            delta = solve_linearized(op, minus_r, modes, eta, cfg, &gm);
        } catch (const Error& e) {
            out.failure = NewtonFailure::Linear;
            out.message = e.what();
            return out;
        }
        rec.gmres_iterations += gm;
        ++rec.newton_iterations;
        double alpha = 1.0;
        bool accepted = false;
        for (; alpha >= cfg.min_damping; alpha *= 0.5) {
            ScalarField trial = symmetrize_even(ScalarField(grid, s.values() + alpha * delta.values()));
            if (!in_aux_cone(trial, v)) continue;
            ScalarField rt;
            const double tn = projected_residual(trial, &rt);
            if (tn < (1.0 - 1e-4 * alpha) * rnorm || tn <= tol) {
                s = std::move(trial);
                r = std::move(rt);
                rnorm = tn;
                accepted = true;
                break;
            }
        }
        rec.min_damping = std::min(rec.min_damping, alpha);
        if (!accepted) {
            // a full step that only fails sufficient decrease at round-off level is still converged
            if (rnorm <= 10.0 * tol) break;
            out.failure = NewtonFailure::Cone;
            out.message = "line search failed to stay in the cone with decrease";
            out.s = s;
            out.residual = rnorm;
            return out;
        }
    }
    rec.accepted = true;
    rec.convexity_margin = principal_radii(shifted_hessian(s, v)).lambda1.minCoeff();
    out.s = std::move(s);
    out.residual = rnorm;
    return out;
}

}  // namespace detail

/// Solves F(∇²s + v g) = s^q f_target / v in the admissible cone by continuation along
/// v^τ = τ v + (1-τ), f^τ = τ f_target + (1-τ) from the exact τ = 0 solution s ≡ 1, with damped
/// Newton at each τ and step halving on failure.
///
/// If `initial_guess` is given and lies in the cone, Newton is first attempted directly at τ = 1;
/// the continuation is the fallback. Either path returns the same (unique) solution.
inline AuxSolution solve_auxiliary(const ScalarField& v, const ScalarField& f_target, const ProblemSpec& spec,
                                   const SolverConfig& cfg, const ScalarField* initial_guess = nullptr) {
    const auto& grid = v.grid();
    require_same_grid(grid, f_target.grid());
    if (!(v.min() > 0.0)) throw Error(ErrorKind::InvalidArgument, "solve_auxiliary: v must be positive");
    if (!(f_target.min() > 0.0)) throw Error(ErrorKind::InvalidArgument, "solve_auxiliary: f must be positive");
    if (evenness_defect(v) > even_input_tolerance * v.sup_norm() ||
        evenness_defect(f_target) > even_input_tolerance * f_target.sup_norm())
        throw Error(ErrorKind::InvalidArgument, "solve_auxiliary: v and f must be even");
    const ScalarField ve = symmetrize_even(v), fe = symmetrize_even(f_target);

    AuxSolution sol;
    auto finish = [&](ScalarField s, double residual) {
        sol.s = std::move(s);
        sol.residual = residual;
        const auto r = aux_residual(AuxState{sol.s, ve, 1.0, residual}, spec, fe);
        sol.grid_residual = r.sup_norm() / detail::residual_scale(sol.s, ve, fe, spec.q);
        return sol;
    };

    if (initial_guess && in_aux_cone(*initial_guess, ve)) {
        NewtonStepRecord rec;
        auto out = detail::aux_newton(symmetrize_even(*initial_guess), ve, fe, 1.0, spec, cfg, rec);
        sol.trace.steps.push_back(rec);
        if (out.failure == detail::NewtonFailure::None) return finish(std::move(out.s), out.residual);
        spdlog::debug("solve_auxiliary: warm start failed ({}), falling back to continuation", out.message);
    }

    ScalarField s(grid, 1.0);
    double tau = 0.0;
    double step = std::clamp(cfg.initial_step, cfg.min_step, 1.0);
    double last_residual = 0.0;
    int steps = 0;
    detail::NewtonFailure last_failure = detail::NewtonFailure::None;
    std::string last_message;
    while (tau < 1.0) {
        if (++steps > cfg.max_continuation_steps)
            throw Error(ErrorKind::MaxStepsExceeded, "solve_auxiliary: continuation exceeded " +
                                                         std::to_string(cfg.max_continuation_steps) + " steps");
        const double tn = std::min(1.0, tau + step);
        const ScalarField vt(grid, tn * ve.values() + (1.0 - tn));
        const ScalarField ft(grid, tn * fe.values() + (1.0 - tn));
        NewtonStepRecord rec;
        auto out = detail::aux_newton(s, vt, ft, tn, spec, cfg, rec);
        sol.trace.steps.push_back(rec);
        if (out.failure == detail::NewtonFailure::None) {
            s = std::move(out.s);
            tau = tn;
            last_residual = out.residual;
            step = std::min(1.0, 2.0 * step);
            continue;
        }
        last_failure = out.failure;
        last_message = out.message;
        step *= 0.5;
        spdlog::debug("solve_auxiliary: step to {} failed ({}), halving to {}", tn, out.message, step);
        if (step < cfg.min_step) {
            const auto kind = last_failure == detail::NewtonFailure::Cone     ? ErrorKind::ConeExit
                              : last_failure == detail::NewtonFailure::Linear ? ErrorKind::LinearSolveFailure
                                                                              : ErrorKind::MaxStepsExceeded;
            throw Error(kind, "solve_auxiliary stalled at tau = " + std::to_string(tau) + ": " + last_message);
        }
    }
    return finish(std::move(s), last_residual);
}

}  // namespace lpcurv
