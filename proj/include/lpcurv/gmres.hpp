#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace lpcurv {

struct GmresResult {
    bool converged = false;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Restarted GMRES(m) with right preconditioning, modified Gram-Schmidt Arnoldi and Givens
/// rotations. `apply(v)` returns A v; `precondition(v)` returns M^{-1} v. On entry x holds the
/// initial guess.
template <class Apply, class Precondition>
GmresResult gmres(const Apply& apply, const Precondition& precondition, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                  double rel_tol, int restart = 60, int max_iterations = 600) {
    GmresResult res;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero(b.size());
        res.converged = true;
        return res;
    }
    if (x.size() != b.size()) x.setZero(b.size());
    const Eigen::Index n = b.size();
    const int m = static_cast<int>(std::min<Eigen::Index>(restart, n));

    while (res.iterations < max_iterations) {
        Eigen::VectorXd r = b - apply(x);
        double beta = r.norm();
        res.relative_residual = beta / bnorm;
        if (res.relative_residual <= rel_tol) {
            res.converged = true;
            return res;
        }
        Eigen::MatrixXd v(n, m + 1);
        Eigen::MatrixXd z(n, m);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
        Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
        v.col(0) = r / beta;
        g[0] = beta;
        int k = 0;
        for (; k < m && res.iterations < max_iterations; ++k) {
            ++res.iterations;
            z.col(k) = precondition(Eigen::VectorXd(v.col(k)));
            Eigen::VectorXd w = apply(Eigen::VectorXd(z.col(k)));
            for (int i = 0; i <= k; ++i) {
                h(i, k) = w.dot(v.col(i));
                w -= h(i, k) * v.col(i);
            }
            h(k + 1, k) = w.norm();
            if (h(k + 1, k) > 0.0) v.col(k + 1) = w / h(k + 1, k);
            for (int i = 0; i < k; ++i) {
                const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
                h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
                h(i, k) = t;
            }
            const double denom = std::hypot(h(k, k), h(k + 1, k));
            cs[k] = denom == 0.0 ? 1.0 : h(k, k) / denom;
            sn[k] = denom == 0.0 ? 0.0 : h(k + 1, k) / denom;
            h(k, k) = denom;
            h(k + 1, k) = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            res.relative_residual = std::abs(g[k + 1]) / bnorm;
            if (res.relative_residual <= rel_tol) {
                ++k;
                break;
            }
        }
        const Eigen::VectorXd y =
            h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        x += z.leftCols(k) * y;
        if (res.relative_residual <= rel_tol) {
            // confirm with the true residual; the recurrence can drift
            res.relative_residual = (b - apply(x)).norm() / bnorm;
            if (res.relative_residual <= 10.0 * rel_tol) {
                res.converged = true;
                return res;
            }
        }
    }
    return res;
}

}  // namespace lpcurv
