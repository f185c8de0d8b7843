#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "lpcurv/errors.hpp"
#include "lpcurv/sphere_grid.hpp"

namespace lpcurv {

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double b = 1.0;
    for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
    return b;
}

/// σ_m(λ) = sum over m-subsets of products; σ_0 = 1.
inline double elementary_symmetric(std::span<const double> lambda, int m) {
    const int n = static_cast<int>(lambda.size());
    if (m < 0 || m > n)
        throw Error(ErrorKind::InvalidArgument, "elementary_symmetric: degree " + std::to_string(m) +
                                                    " out of range for n = " + std::to_string(n));
    std::vector<double> e(static_cast<std::size_t>(m) + 1, 0.0);
    e[0] = 1.0;
    for (double x : lambda)
        for (int j = m; j >= 1; --j) e[j] += x * e[j - 1];
    return e[m];
}

/// σ_m of λ with the entries at the listed positions removed; zero for m < 0.
inline double elementary_symmetric_without(std::span<const double> lambda, int m, std::initializer_list<int> skip) {
    if (m < 0) return 0.0;
    std::vector<double> rest;
    for (int i = 0; i < static_cast<int>(lambda.size()); ++i)
        if (std::find(skip.begin(), skip.end(), i) == skip.end()) rest.push_back(lambda[i]);
    if (m > static_cast<int>(rest.size())) return 0.0;
    return elementary_symmetric(rest, m);
}

/// Curvature quotient on an eigenvalue vector: the raw σ_n/σ_{n-k}, the normalized
/// F = (C(n,k) σ_n/σ_{n-k})^{1/k} with F(1,...,1) = 1, and ∂F/∂λ_i.
struct QuotientValue {
    double raw = 0.0;
    double F = 0.0;
    std::vector<double> dF;
};

inline QuotientValue curvature_quotient_of(std::span<const double> lambda, int k) {
    const int n = static_cast<int>(lambda.size());
    if (k < 1 || k >= n) throw Error(ErrorKind::InvalidArgument, "curvature quotient needs 1 <= k < n");
    QuotientValue out;
    const double sn = elementary_symmetric(lambda, n);
    const double snk = elementary_symmetric(lambda, n - k);
    out.raw = sn / snk;
    out.F = std::pow(binomial(n, k) * out.raw, 1.0 / k);
    out.dF.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double dsn = elementary_symmetric_without(lambda, n - 1, {i});
        const double dsnk = elementary_symmetric_without(lambda, n - k - 1, {i});
        out.dF[static_cast<std::size_t>(i)] = out.F / k * (dsn / sn - dsnk / snk);
    }
    return out;
}

/// (∂F/∂λ_i - ∂F/∂λ_j) / (λ_i - λ_j) in closed form, finite at λ_i = λ_j.
inline double quotient_divided_difference(std::span<const double> lambda, int k, int i, int j) {
    const int n = static_cast<int>(lambda.size());
    const double sn = elementary_symmetric(lambda, n);
    const double snk = elementary_symmetric(lambda, n - k);
    const double F = std::pow(binomial(n, k) * sn / snk, 1.0 / k);
    return -(F / (k * sn) * elementary_symmetric_without(lambda, n - 2, {i, j}) -
             F / (k * snk) * elementary_symmetric_without(lambda, n - k - 2, {i, j}));
}

/// Sorted eigenvalues of a symmetric 2x2 matrix [[a, b], [b, c]].
inline std::pair<double, double> sym2_eigenvalues(double a, double b, double c) {
    const double mid = 0.5 * (a + c);
    const double rad = std::hypot(0.5 * (a - c), b);
    const double hi = mid + rad;
    double lo = mid - rad;
    // the smaller root via the determinant avoids cancellation when both are positive
    if (mid > 0.0 && hi > 0.0) lo = (a * c - b * b) / hi;
    return {lo, hi};
}

struct RadiiField {
    GridPtr grid;
    Eigen::ArrayXd lambda1, lambda2;  ///< ascending per node
};

/// τ[s] = ∇²s + s g.
inline SymTensorField tau_field(const ScalarField& s) {
    auto h = covariant_hessian(s);
    h.t11 += s.values();
    h.t22 += s.values();
    return h;
}

/// ∇²s + v g for a separate coefficient field v.
inline SymTensorField shifted_hessian(const ScalarField& s, const ScalarField& v) {
    require_same_grid(s.grid(), v.grid());
    auto h = covariant_hessian(s);
    h.t11 += v.values();
    h.t22 += v.values();
    return h;
}

inline RadiiField principal_radii(const SymTensorField& t) {
    RadiiField r{t.grid, Eigen::ArrayXd(t.t11.size()), Eigen::ArrayXd(t.t11.size())};
    for (Eigen::Index i = 0; i < t.t11.size(); ++i) {
        const auto [lo, hi] = sym2_eigenvalues(t.t11[i], t.t12[i], t.t22[i]);
        r.lambda1[i] = lo;
        r.lambda2[i] = hi;
    }
    return r;
}

struct CurvatureEval {
    ScalarField F_value;             ///< normalized quotient, F(I) = 1
    ScalarField raw;                 ///< σ_n / σ_{n-k}
    SymTensorField F_matrix;         ///< ∂F/∂T_ij in the frame
    std::vector<Eigen::ArrayXd> sigma;  ///< sigma[m - 1] = σ_m per node, m = 1..n
};

/// Evaluates F and its derivative nodewise. Throws NotInCone if any node has λ_1 <= 0.
///
/// With T = λ_1 P_1 + λ_2 P_2 the derivative is Σ ∂F/∂λ_i P_i, written as
///   (f_1 + f_2)/2 I + (f_1 - f_2)/(λ_1 - λ_2) (T - tr T / 2 I)
/// where the divided difference is evaluated in closed form, so umbilic nodes need no
/// special casing.
inline CurvatureEval curvature_quotient(const SymTensorField& t, int k) {
    constexpr int n = 2;
    if (k < 1 || k >= n) throw Error(ErrorKind::InvalidArgument, "curvature_quotient needs 1 <= k < n = 2");
    const Eigen::Index size = t.t11.size();
    CurvatureEval ev{ScalarField(t.grid), ScalarField(t.grid), SymTensorField{t.grid, {}, {}, {}}, {}};
    ev.F_matrix.t11.resize(size);
    ev.F_matrix.t12.resize(size);
    ev.F_matrix.t22.resize(size);
    ev.sigma.assign(n, Eigen::ArrayXd(size));
    for (Eigen::Index i = 0; i < size; ++i) {
        const auto [lo, hi] = sym2_eigenvalues(t.t11[i], t.t12[i], t.t22[i]);
        if (!(lo > 0.0)) {
            const auto& g = *t.grid;
            throw Error(ErrorKind::NotInCone, "lambda_1 = " + std::to_string(lo) + " at node (theta=" +
                                                  std::to_string(g.theta(g.ring(i))) +
                                                  ", phi=" + std::to_string(g.phi(g.column(i))) + ")");
        }
        const double lam[n] = {lo, hi};
        const auto q = curvature_quotient_of(lam, k);
        const double dd = quotient_divided_difference(lam, k, 0, 1);
        const double avg = 0.5 * (q.dF[0] + q.dF[1]);
        const double half_tr = 0.5 * (t.t11[i] + t.t22[i]);
        ev.F_value[i] = q.F;
        ev.raw[i] = q.raw;
        ev.F_matrix.t11[i] = avg + dd * (t.t11[i] - half_tr);
        ev.F_matrix.t22[i] = avg + dd * (t.t22[i] - half_tr);
        ev.F_matrix.t12[i] = dd * t.t12[i];
        ev.sigma[0][i] = lo + hi;
        ev.sigma[1][i] = lo * hi;
    }
    return ev;
}

/// Points s(x) x + ∇s(x) of the hypersurface with support function s, one per node.
inline std::vector<Eigen::Vector3d> embed(const ScalarField& s) {
    const auto& g = *s.grid();
    const auto grad = covariant_gradient(s);
    const auto radii = principal_radii(tau_field(s));
    if (radii.lambda1.minCoeff() <= 0.0)
        spdlog::warn("embed: support function is not strictly convex (min lambda_1 = {})", radii.lambda1.minCoeff());
    std::vector<Eigen::Vector3d> pts(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i)
        pts[static_cast<std::size_t>(i)] = s[i] * g.unit_vector(i) + grad.v1[i] * g.e_theta(i) + grad.v2[i] * g.e_phi(i);
    return pts;
}

/// min over nodes of λ_1(τ[s]); positive iff s is discretely strictly convex.
inline double convexity_margin(const ScalarField& s) { return principal_radii(tau_field(s)).lambda1.minCoeff(); }

}  // namespace lpcurv
