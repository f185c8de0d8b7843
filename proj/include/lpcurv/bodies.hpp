#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "lpcurv/convex_geom.hpp"
#include "lpcurv/sphere_grid.hpp"

namespace lpcurv {

/// Origin-centred ellipsoid { y : Σ (R^T y)_i^2 / a_i^2 <= 1 }, with closed-form support
/// function h(x) = sqrt(x^T A x), A = R diag(a^2) R^T.
struct Ellipsoid {
    Eigen::Vector3d axes{1.0, 1.0, 1.0};
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

    Eigen::Matrix3d shape() const {
        return rotation * axes.cwiseProduct(axes).asDiagonal() * rotation.transpose();
    }

    double support(const Eigen::Vector3d& x) const { return std::sqrt(x.dot(shape() * x)); }

    /// Boundary point with outer normal x (inverse Gauss map).
    Eigen::Vector3d point(const Eigen::Vector3d& x) const {
        const Eigen::Vector3d ax = shape() * x;
        return ax / std::sqrt(x.dot(ax));
    }

    /// Ambient Hessian of the 1-homogeneous extension, restricted to the tangent plane.
    Eigen::Matrix2d tau(const Eigen::Vector3d& x, const Eigen::Vector3d& e1, const Eigen::Vector3d& e2) const {
        const Eigen::Matrix3d a = shape();
        const Eigen::Vector3d ax = a * x;
        const double h = std::sqrt(x.dot(ax));
        const Eigen::Matrix3d d2 = a / h - ax * ax.transpose() / (h * h * h);
        Eigen::Matrix2d t;
        t << e1.dot(d2 * e1), e1.dot(d2 * e2), e2.dot(d2 * e1), e2.dot(d2 * e2);
        return t;
    }

    double max_radius_of_curvature() const { return axes.maxCoeff() * axes.maxCoeff() / axes.minCoeff(); }

    /// Quadric residual Σ (R^T y)_i^2 / a_i^2 - 1.
    double quadric(const Eigen::Vector3d& y) const {
        const Eigen::Vector3d z = rotation.transpose() * y;
        return (z.array() / axes.array()).square().sum() - 1.0;
    }

    ScalarField support_field(const GridPtr& grid) const {
        return ScalarField::from_function(grid, [this](const Eigen::Vector3d& x) { return support(x); });
    }

    SymTensorField tau_field_exact(const GridPtr& grid) const {
        SymTensorField t{grid, Eigen::ArrayXd(grid->size()), Eigen::ArrayXd(grid->size()), Eigen::ArrayXd(grid->size())};
        for (Eigen::Index i = 0; i < grid->size(); ++i) {
            const auto m = tau(grid->unit_vector(i), grid->e_theta(i), grid->e_phi(i));
            t.t11[i] = m(0, 0);
            t.t12[i] = 0.5 * (m(0, 1) + m(1, 0));
            t.t22[i] = m(1, 1);
        }
        return t;
    }

    /// Density f for which this body solves σ_n/σ_{n-k}(τ[s]) = s^{p-1} f, from the exact τ.
    ScalarField manufactured_density(const GridPtr& grid, double p, int k) const {
        const auto s = support_field(grid);
        const auto ev = curvature_quotient(tau_field_exact(grid), k);
        return {grid, ev.raw.values() / s.values().pow(p - 1.0)};
    }
};

}  // namespace lpcurv
