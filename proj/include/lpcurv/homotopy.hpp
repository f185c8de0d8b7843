#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "lpcurv/convex_geom.hpp"
#include "lpcurv/errors.hpp"
#include "lpcurv/gmres.hpp"
#include "lpcurv/pde_core.hpp"
#include "lpcurv/sphere_grid.hpp"
#include "lpcurv/validators.hpp"

namespace lpcurv {

struct HomotopyConfig {
    double initial_t_step = 0.5;
    double min_t_step = 1e-4;
    double damping = 1.0;            ///< Picard weight α on the non-constant part
    double outer_tol = 1e-10;        ///< on ||w - φ_1(w)||_∞; raised to 10x the grid's round-off floor
    double intermediate_tol = 1e-6;  ///< same, for t < 1
    int max_outer_iters = 200;       ///< Picard iterations per t-step
    int max_newton_iters = 20;       ///< fallback Newton iterations per t-step
    double stagnation_ratio = 0.9;   ///< Picard is abandoned once ||w - φ(w)|| shrinks slower than this
    SolverConfig inner;

    void validate() const {
        if (!(damping > 0.0 && damping <= 1.0)) throw Error(ErrorKind::InvalidArgument, "damping must lie in (0, 1]");
        if (!(outer_tol > 0.0 && intermediate_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerances must be positive");
        if (!(initial_t_step > 0.0 && min_t_step > 0.0 && min_t_step <= initial_t_step))
            throw Error(ErrorKind::InvalidArgument, "need 0 < min_t_step <= initial_t_step");
        if (max_outer_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_outer_iters must be positive");
    }
};

/// Derivative of w ↦ log s at a solved auxiliary state (s, v = e^w, f_t), applied to η:
///   L δs = -(tr F^{ij} + s^q f_t / v^2) v η,   result δs / s.
/// `modes` selects the Galerkin space; Parity::All admits odd directions.
inline ScalarField fixed_point_derivative(const ScalarField& s, const ScalarField& v, const ScalarField& f_t,
                                          const ProblemSpec& spec, const ScalarField& eta, Parity parity,
                                          const SolverConfig& cfg, double rel_tol = 1e-12) {
    const auto& grid = s.grid();
    const LinearizedOperator op(AuxState{s, v, 1.0, 0.0}, spec, f_t);
    const Eigen::ArrayXd coef = op.trace_F() + s.values().pow(spec.q) * f_t.values() / v.values().square();
    const ScalarField rhs(grid, -coef * v.values() * eta.values());
    const ModeSet modes(grid->lmax(), parity);
    const auto ds = solve_linearized(op, rhs, modes, rel_tol, cfg);
    return {grid, ds.values() / s.values()};
}

/// φ_t(w) = log s^t, where s^t solves the auxiliary equation with v = e^w and density
/// t g_aux + (1 - t). Successive calls are warm-started from the previous solution.
class FixedPointMap {
public:
    FixedPointMap(ProblemSpec spec, SolverConfig cfg) : spec_(std::move(spec)), cfg_(cfg) {}

    ScalarField operator()(const ScalarField& w, double t) {
        if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::InvalidArgument, "phi_map: t must lie in [0, 1]");
        require_same_grid(w.grid(), spec_.grid());
        const auto& grid = w.grid();
        ScalarField v(grid, symmetrize_even(w).values().exp());
        ScalarField f_t(grid, t * spec_.g_aux.values() + (1.0 - t));
        auto sol = solve_auxiliary(v, f_t, spec_, cfg_, warm_ ? &*warm_ : nullptr);
        for (auto& st : sol.trace.steps) trace_.steps.push_back(std::move(st));
        warm_ = sol.s;
        state_ = State{sol.s, std::move(v), std::move(f_t)};
        ++evaluations_;
        return symmetrize_even(sol.s.map([](double x) { return std::log(x); }));
    }

    /// Derivative of the map at the point of the last evaluation.
    ScalarField derivative(const ScalarField& eta, Parity parity = Parity::Even, double rel_tol = 1e-12) const {
        if (!state_) throw Error(ErrorKind::InvalidArgument, "FixedPointMap::derivative before any evaluation");
        return fixed_point_derivative(state_->s, state_->v, state_->f_t, spec_, eta, parity, cfg_, rel_tol);
    }

    /// Auxiliary solution s of the last evaluation.
    const ScalarField& last_solution() const {
        if (!state_) throw Error(ErrorKind::InvalidArgument, "FixedPointMap: no evaluation yet");
        return state_->s;
    }

    const ProblemSpec& spec() const { return spec_; }
    SolveTrace& trace() { return trace_; }
    int evaluations() const { return evaluations_; }

private:
    struct State {
        ScalarField s, v, f_t;
    };
    ProblemSpec spec_;
    SolverConfig cfg_;
    std::optional<ScalarField> warm_;
    std::optional<State> state_;
    SolveTrace trace_;
    int evaluations_ = 0;
};

inline ScalarField phi_map(const ScalarField& w, double t, const ProblemSpec& spec, const SolverConfig& cfg = {}) {
    FixedPointMap phi(spec, cfg);
    return phi(w, t);
}

struct Solution {
    ScalarField s;
    ProblemSpec spec;
    EstimateReport diagnostics;
    SolveTrace trace;
    double fixed_point_residual = 0.0;  ///< ||w - φ_1(w)||_∞ at the last iterate
    double outer_tol = 0.0;             ///< effective tolerance used at t = 1
};

/// First-order bound on main_residual_relative(s) for the auxiliary solution s = e^{φ_1(w)} when
/// ||w - φ_1(w)||_∞ <= tol:
///   k (1 + max(tr F^{ij}(τ[s]) s / F(τ[s]))) tol.
inline double implied_residual_tolerance(const ScalarField& s, const ProblemSpec& spec, double tol) {
    const auto ev = curvature_quotient(tau_field(s), spec.k);
    const double m = (ev.F_matrix.trace() * s.values() / ev.F_value.values()).maxCoeff();
    return spec.k * (1.0 + m) * tol;
}

namespace detail {

struct StepResult {
    bool converged = false;
    ScalarField w;
    double residual = 0.0;
    std::string message;
};

/// Drives ||w - φ_t(w)||_∞ below tol at fixed t: damped Picard on the non-constant part with an
/// exact Newton correction of the mean, then Newton–Krylov on w - φ_t(w) if Picard stagnates.
inline StepResult converge_at(FixedPointMap& phi, ScalarField w, double t, double tol, const HomotopyConfig& cfg,
                              SolveTrace& trace) {
    const auto& grid = w.grid();
    const ScalarField ones(grid, 1.0);
    StepResult out;
    auto record = [&](int it, double r, bool newton) { trace.outer.push_back({t, it, r, newton}); };

    ScalarField phi_w;
    double prev = std::numeric_limits<double>::infinity();
    double best = prev;
    int slow = 0;
    int it = 0;
    try {
        for (; it < cfg.max_outer_iters; ++it) {
            phi_w = phi(w, t);
            const ScalarField d(grid, phi_w.values() - w.values());
            const double r = d.sup_norm();
            record(it, r, false);
            spdlog::debug("t = {:.4f} picard {:3d}: |w - phi(w)| = {:.3e}", t, it, r);
            if (r <= tol) {
                out.converged = true;
                out.w = std::move(w);
                out.residual = r;
                return out;
            }
            slow = (it >= 2 && r > cfg.stagnation_ratio * prev) ? slow + 1 : 0;
            if (slow >= 2 || r > 1e3 * best) break;
            prev = r;
            best = std::min(best, r);
            const double mu = mean(phi.derivative(ones));
            const double dbar = mean(d);
            const double shift = std::abs(1.0 - mu) > 1e-3 ? dbar / (1.0 - mu) : dbar;
            w = symmetrize_even(ScalarField(grid, w.values() + cfg.damping * (d.values() - dbar) + shift));
        }
    } catch (const Error& e) {
        if (!e.is_solve_failure()) throw;
        out.message = e.what();
        return out;
    }

    spdlog::debug("t = {:.4f}: Picard stagnated after {} iterations, switching to Newton", t, it);
    try {
        if (it == cfg.max_outer_iters) phi_w = phi(w, t);  // the map's state must sit at w
        ScalarField g(grid, w.values() - phi_w.values());
        double gnorm = g.sup_norm();
        for (int k = 0; k < cfg.max_newton_iters; ++k) {
            const Eigen::VectorXd b = -g.values().matrix();
            Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
            auto apply = [&](const Eigen::VectorXd& y) {
                const ScalarField eta(grid, y.array());
                return Eigen::VectorXd(y - phi.derivative(eta, Parity::Even, 1e-10).values().matrix());
            };
            auto identity = [](const Eigen::VectorXd& y) { return y; };
            gmres(apply, identity, b, x, 1e-4, 40, 200);
            const ScalarField delta = symmetrize_even(ScalarField(grid, x.array()));
            bool accepted = false;
            for (double lambda = 1.0; lambda >= 1.0 / 32.0; lambda *= 0.5) {
                ScalarField trial = symmetrize_even(ScalarField(grid, w.values() + lambda * delta.values()));
                ScalarField pt;
                try {
                    pt = phi(trial, t);
                } catch (const Error& e) {
                    if (!e.is_solve_failure()) throw;
                    continue;
                }
                ScalarField gt(grid, trial.values() - pt.values());
                const double tn = gt.sup_norm();
                if (tn < (1.0 - 1e-4 * lambda) * gnorm) {
                    w = std::move(trial);
                    g = std::move(gt);
                    gnorm = tn;
                    accepted = true;
                    break;
                }
            }
            record(it + k, gnorm, true);
            spdlog::debug("t = {:.4f} newton {:2d}: |w - phi(w)| = {:.3e}", t, k, gnorm);
            if (gnorm <= tol) {
                out.converged = true;
                out.w = std::move(w);
                out.residual = gnorm;
                return out;
            }
            if (!accepted) {
                out.message = "Newton line search failed on the fixed-point residual";
                return out;
            }
        }
        out.message = "fixed-point iteration did not converge";
    } catch (const Error& e) {
        if (!e.is_solve_failure()) throw;
        out.message = e.what();
    }
    return out;
}

}  // namespace detail

/// Solves σ_n/σ_{n-k}(τ[s]) = s^{p-1} f by continuation in t from the sphere s ≡ 1 at t = 0,
/// converging the fixed-point equation w = φ_t(w) at each t. Throws HomotopyStalled when the
/// t-step falls below cfg.min_t_step.
inline Solution solve_main(const ProblemSpec& spec, const HomotopyConfig& cfg = {}) {
    cfg.validate();
    if (!spec.guarantee_regime) spdlog::warn("solving outside 1 < p < k+1: no existence guarantee");
    const auto& grid = spec.grid();
    const double final_tol = std::max(cfg.outer_tol, 10.0 * roundoff_floor(*grid));
    FixedPointMap phi(spec, cfg.inner);
    SolveTrace trace;

    ScalarField w(grid, 0.0);  // the t = 0 fixed point
    double t = 0.0;
    double step = std::min(cfg.initial_t_step, 1.0);
    double residual = 0.0;
    std::string last_message;
    while (t < 1.0) {
        const double tn = std::min(1.0, t + step);
        const double tol = tn >= 1.0 ? final_tol : std::max(cfg.intermediate_tol, final_tol);
        auto res = detail::converge_at(phi, w, tn, tol, cfg, trace);
        if (res.converged) {
            w = std::move(res.w);
            t = tn;
            residual = res.residual;
            spdlog::debug("t = {:.4f} reached, |w - phi(w)| = {:.3e}", t, residual);
            step = std::min(1.0, 2.0 * step);
            continue;
        }
        last_message = res.message;
        step *= 0.5;
        spdlog::info("t-step to {:.4f} failed ({}); step now {:.3e}", tn, res.message, step);
        if (step < cfg.min_t_step)
            throw Error(ErrorKind::HomotopyStalled,
                        "minimum t-step reached at t = " + std::to_string(t) + ": " + last_message);
    }

    Solution sol;
    sol.s = phi.last_solution();  // e^{φ_1(w)}
    sol.spec = spec;
    sol.fixed_point_residual = residual;
    sol.outer_tol = final_tol;
    for (auto& st : phi.trace().steps) trace.steps.push_back(std::move(st));
    sol.trace = std::move(trace);
    if (!(convexity_margin(sol.s) > 0.0)) throw Error(ErrorKind::ConeExit, "solution is not strictly convex");
    sol.diagnostics = full_report(sol.s, spec);
    spdlog::debug("solve_main: main residual {:.3e}, {} map evaluations", sol.diagnostics.main_residual,
                 phi.evaluations());
    return sol;
}

inline EstimateReport full_report(const Solution& sol) { return full_report(sol.s, sol.spec); }

struct SpectrumRow {
    int l = 0;
    double analytic = 0.0;   ///< 2 / (q + l(l+1)/2)
    double measured = 0.0;   ///< Rayleigh quotient, averaged over the 2l+1 harmonics of degree l
    double max_error = 0.0;  ///< max over m of |Rayleigh - analytic|
    double eigen_residual = 0.0;  ///< max over m of ||A Y - λ Y|| / ||Y||
};

struct SpectrumReport {
    double q = 0.0;
    std::vector<SpectrumRow> rows;
    int count_above_one = 0;  ///< from power iteration with deflation on the full operator
    double leading = 0.0;     ///< largest eigenvalue found
    double max_error = 0.0;
};

/// Linearization of φ_0 at its fixed point w = 0 (s = v = f = 1), with odd directions admitted.
/// Each degree-l harmonic should be an eigenvector with eigenvalue 2/(q + l(l+1)/2).
inline SpectrumReport model_spectrum_check(const GridPtr& grid, double q, int lmax_rows = 4) {
    if (!(q > 0.0)) throw Error(ErrorKind::InvalidArgument, "model_spectrum_check: q must be positive");
    lmax_rows = std::min(lmax_rows, grid->lmax());
    ProblemSpec spec;
    spec.n = 2;
    spec.k = 1;
    spec.q = q;
    spec.p = q;
    spec.f = ScalarField(grid, 1.0);
    spec.g_aux = ScalarField(grid, 2.0);
    spec.guarantee_regime = q > 1.0 && q < 2.0;
    const ScalarField one(grid, 1.0);
    const SolverConfig cfg;
    const auto& tr = grid->transform();
    const ModeSet modes(grid->lmax(), Parity::All);

    auto apply = [&](const Eigen::VectorXd& x) {
        const ScalarField eta(grid, tr.synthesize(modes.unpack(x)));
        const auto y = fixed_point_derivative(one, one, one, spec, eta, Parity::All, cfg, 1e-13);
        return Eigen::VectorXd(modes.pack(tr.analyze(y.values())));
    };

    SpectrumReport rep;
    rep.q = q;
    for (int l = 0; l <= lmax_rows; ++l) {
        SpectrumRow row;
        row.l = l;
        row.analytic = 2.0 / (q + 0.5 * l * (l + 1.0));
        int count = 0;
        for (std::size_t i = 0; i < modes.size(); ++i) {
            if (modes[i].l != l) continue;
            Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(modes.size()));
            e[static_cast<Eigen::Index>(i)] = 1.0;
            const Eigen::VectorXd y = apply(e);
            const double lambda = e.dot(y);
            row.measured += lambda;
            row.max_error = std::max(row.max_error, std::abs(lambda - row.analytic));
            row.eigen_residual = std::max(row.eigen_residual, (y - lambda * e).norm());
            ++count;
        }
        row.measured /= count;
        rep.max_error = std::max(rep.max_error, row.max_error);
        rep.rows.push_back(row);
    }

    // eigenvalues above one, by power iteration with deflation of those found
    std::mt19937 rng(7);
    std::normal_distribution<double> normal;
    std::vector<Eigen::VectorXd> found;
    const auto n = static_cast<Eigen::Index>(modes.size());
    auto deflate = [&](Eigen::VectorXd& x) {
        for (const auto& u : found) x -= u.dot(x) * u;
    };
    for (int round = 0; round < 8; ++round) {
        Eigen::VectorXd x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = normal(rng);
        deflate(x);
        x.normalize();
        double lambda = 0.0;
        for (int it = 0; it < 500; ++it) {
            Eigen::VectorXd y = apply(x);
            deflate(y);
            const double next = x.dot(y);
            x = y.normalized();
            if (it > 5 && std::abs(next - lambda) <= 1e-13 * std::abs(next)) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        if (round == 0) rep.leading = lambda;
        if (lambda <= 1.0) break;
        found.push_back(x);
        ++rep.count_above_one;
    }
    return rep;
}

}  // namespace lpcurv
