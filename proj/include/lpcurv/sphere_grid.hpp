#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpcurv/errors.hpp"
#include "lpcurv/spherical_harmonics.hpp"

namespace lpcurv {

/// Tensor-product grid on S^2: Gauss-Legendre colatitudes x uniform longitudes.
///
/// Node i = j * n_phi + m sits at (θ_j, φ_m). No node lies on a pole, the θ-nodes are
/// mirror-symmetric about the equator and n_phi is even, so the antipode of every node is
/// itself a node. Differentiation is spectral: fields are projected onto real spherical
/// harmonics of degree <= n_theta - 1, which is exact for band-limited fields.
class SphericalGrid {
public:
    /// Spectral scheme; see the README for what "order" means for the refinement checks.
    static constexpr const char* scheme = "spherical-harmonic (Gauss-Legendre x Fourier)";

    static std::shared_ptr<const SphericalGrid> create(int n_theta, int n_phi) {
        return std::shared_ptr<const SphericalGrid>(new SphericalGrid(n_theta, n_phi));
    }

    int n_theta() const { return n_theta_; }
    int n_phi() const { return n_phi_; }
    int lmax() const { return n_theta_ - 1; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(n_theta_) * n_phi_; }

    double theta(int j) const { return theta_[j]; }
    double phi(int m) const { return 2.0 * std::numbers::pi * m / n_phi_; }
    double cos_theta(int j) const { return cos_t_[j]; }
    double sin_theta(int j) const { return sin_t_[j]; }
    int ring(Eigen::Index i) const { return static_cast<int>(i / n_phi_); }
    int column(Eigen::Index i) const { return static_cast<int>(i % n_phi_); }
    Eigen::Index index(int j, int m) const { return static_cast<Eigen::Index>(j) * n_phi_ + m; }

    const Eigen::ArrayXd& weights() const { return weights_; }
    Eigen::Index antipode(Eigen::Index i) const { return antipode_[static_cast<std::size_t>(i)]; }

    /// Unit position vector x of node i; x(antipode(i)) == -x(i) exactly.
    Eigen::Vector3d unit_vector(Eigen::Index i) const {
        const int j = ring(i), m = column(i);
        return {sin_t_[j] * cos_p_[m], sin_t_[j] * sin_p_[m], cos_t_[j]};
    }
    /// Frame vector e1 = ∂θ at node i.
    Eigen::Vector3d e_theta(Eigen::Index i) const {
        const int j = ring(i), m = column(i);
        return {cos_t_[j] * cos_p_[m], cos_t_[j] * sin_p_[m], -sin_t_[j]};
    }
    /// Frame vector e2 = ∂φ / sin θ at node i.
    Eigen::Vector3d e_phi(Eigen::Index i) const {
        const int m = column(i);
        return {-sin_p_[m], cos_p_[m], 0.0};
    }

    const SphericalHarmonicTransform& transform() const { return *transform_; }

private:
    SphericalGrid(int n_theta, int n_phi) : n_theta_(n_theta), n_phi_(n_phi) {
        if (n_theta < 2) throw Error(ErrorKind::InvalidArgument, "grid needs n_theta >= 2");
        if (n_phi % 2 != 0) throw Error(ErrorKind::InvalidArgument, "grid needs an even n_phi");
        if (n_phi < 2 * n_theta)
            throw Error(ErrorKind::InvalidArgument, "grid needs n_phi >= 2 n_theta for exact analysis");
        auto [x, w] = gauss_legendre(n_theta);
        theta_.resize(n_theta);
        cos_t_ = x;
        sin_t_.resize(n_theta);
        for (int j = 0; j < n_theta; ++j) {
            sin_t_[j] = std::sqrt((1.0 - x[j]) * (1.0 + x[j]));
            theta_[j] = std::acos(x[j]);
        }
        cos_p_.resize(n_phi);
        sin_p_.resize(n_phi);
        for (int m = 0; m < n_phi / 2; ++m) {
            cos_p_[m] = std::cos(phi(m));
            sin_p_[m] = std::sin(phi(m));
            cos_p_[m + n_phi / 2] = -cos_p_[m];
            sin_p_[m + n_phi / 2] = -sin_p_[m];
        }
        weights_.resize(size());
        antipode_.resize(static_cast<std::size_t>(size()));
        const double dphi = 2.0 * std::numbers::pi / n_phi;
        for (int j = 0; j < n_theta; ++j)
            for (int m = 0; m < n_phi; ++m) {
                weights_[index(j, m)] = w[j] * dphi;
                antipode_[static_cast<std::size_t>(index(j, m))] = index(n_theta - 1 - j, (m + n_phi / 2) % n_phi);
            }
        transform_ = std::make_unique<SphericalHarmonicTransform>(cos_t_, sin_t_, w, n_phi);
    }

    int n_theta_;
    int n_phi_;
    std::vector<double> theta_, cos_t_, sin_t_, cos_p_, sin_p_;
    Eigen::ArrayXd weights_;
    std::vector<Eigen::Index> antipode_;
    std::unique_ptr<SphericalHarmonicTransform> transform_;
};

using GridPtr = std::shared_ptr<const SphericalGrid>;

/// Scalar function sampled at the grid nodes.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(GridPtr grid, double value = 0.0)
        : grid_(std::move(grid)), values_(Eigen::ArrayXd::Constant(grid_->size(), value)) {}
    ScalarField(GridPtr grid, Eigen::ArrayXd values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_->size()) throw Error(ErrorKind::InvalidArgument, "field size does not match grid");
    }

    template <class Fn>
    static ScalarField from_function(GridPtr grid, Fn&& fn) {
        Eigen::ArrayXd v(grid->size());
        for (Eigen::Index i = 0; i < grid->size(); ++i) v[i] = fn(grid->unit_vector(i));
        return {grid, std::move(v)};
    }

    const GridPtr& grid() const { return grid_; }
    const Eigen::ArrayXd& values() const { return values_; }
    Eigen::ArrayXd& values() { return values_; }
    double operator[](Eigen::Index i) const { return values_[i]; }
    double& operator[](Eigen::Index i) { return values_[i]; }
    Eigen::Index size() const { return values_.size(); }

    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }
    double sup_norm() const { return values_.abs().maxCoeff(); }
    bool all_finite() const { return values_.allFinite(); }

    ScalarField map(double (*fn)(double)) const { return {grid_, values_.unaryExpr(fn)}; }

private:
    GridPtr grid_;
    Eigen::ArrayXd values_;
};

/// Symmetric 2-tensor per node in the orthonormal frame (∂θ, ∂φ / sin θ).
struct SymTensorField {
    GridPtr grid;
    Eigen::ArrayXd t11, t12, t22;

    Eigen::Matrix2d at(Eigen::Index i) const {
        Eigen::Matrix2d m;
        m << t11[i], t12[i], t12[i], t22[i];
        return m;
    }
    Eigen::ArrayXd trace() const { return t11 + t22; }
};

/// Tangent vector per node in the orthonormal frame.
struct VectorField {
    GridPtr grid;
    Eigen::ArrayXd v1, v2;

    Eigen::ArrayXd norm_squared() const { return v1.square() + v2.square(); }
};

inline void require_same_grid(const GridPtr& a, const GridPtr& b) {
    if (a.get() != b.get()) throw Error(ErrorKind::InvalidArgument, "fields live on different grids");
}

inline SpectralCoeffs analyze(const ScalarField& u) { return u.grid()->transform().analyze(u.values()); }

inline ScalarField synthesize(const GridPtr& grid, const SpectralCoeffs& c) {
    return {grid, grid->transform().synthesize(c)};
}

inline VectorField covariant_gradient(const ScalarField& u) {
    const auto d = u.grid()->transform().derivatives(analyze(u));
    return {u.grid(), d.d_theta, d.d_phi_over_sin};
}

inline SymTensorField covariant_hessian(const ScalarField& u) {
    auto d = u.grid()->transform().derivatives(analyze(u));
    return {u.grid(), std::move(d.h11), std::move(d.h12), std::move(d.h22)};
}

/// Trace of the covariant Hessian; identical to hessian.trace() nodewise.
inline ScalarField laplacian(const ScalarField& u) {
    const auto h = covariant_hessian(u);
    return {u.grid(), h.trace()};
}

inline ScalarField symmetrize_even(const ScalarField& u) {
    const auto& g = *u.grid();
    Eigen::ArrayXd out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = 0.5 * (u[i] + u[g.antipode(i)]);
    return {u.grid(), std::move(out)};
}

/// max |u(x) - u(-x)| over the nodes.
inline double evenness_defect(const ScalarField& u) {
    const auto& g = *u.grid();
    double d = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) d = std::max(d, std::abs(u[i] - u[g.antipode(i)]));
    return d;
}

inline double integrate(const ScalarField& u) { return (u.values() * u.grid()->weights()).sum(); }

inline double mean(const ScalarField& u) { return integrate(u) / (4.0 * std::numbers::pi); }

}  // namespace lpcurv
