#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lpcurv/errors.hpp"

namespace lpcurv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gauss-Legendre nodes on [-1, 1] in descending order (so that θ = acos(x) ascends),
/// with weights summing to 2. Nodes are mirrored exactly: x[n-1-j] == -x[j].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "gauss_legendre: n must be positive");
    std::vector<double> x(n), w(n);
    const double pi = std::numbers::pi;
    for (int j = 0; j < (n + 1) / 2; ++j) {
        double z = std::cos(pi * (j + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int l = 2; l <= n; ++l) {
                const double p2 = ((2.0 * l - 1.0) * z * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) { p1 = z; p0 = 1.0; }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute the derivative at the converged node for the weight
        double p0 = 1.0, p1 = z;
        for (int l = 2; l <= n; ++l) {
            const double p2 = ((2.0 * l - 1.0) * z * p1 - (l - 1.0) * p0) / l;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        if (n == 1) { z = 0.0; dp = 1.0; }
        const double weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[j] = z;
        w[j] = weight;
        x[n - 1 - j] = -z;
        w[n - 1 - j] = weight;
    }
    if (n % 2 == 1) x[n / 2] = 0.0;
    return {std::move(x), std::move(w)};
}

/// Real spherical-harmonic coefficients, orthonormal on the unit sphere.
/// cos(l, m) multiplies P̄_lm(cos θ) cos(mφ); sin(l, m) multiplies P̄_lm(cos θ) sin(mφ).
/// Entries with m > l, and the sin column m = 0, are unused and kept at zero.
struct SpectralCoeffs {
    int lmax = 0;
    Eigen::MatrixXd cos;
    Eigen::MatrixXd sin;

    static SpectralCoeffs zero(int lmax) {
        return {lmax, Eigen::MatrixXd::Zero(lmax + 1, lmax + 1), Eigen::MatrixXd::Zero(lmax + 1, lmax + 1)};
    }
};

/// One real basis function Y_lm; kind 0 = cos(mφ), kind 1 = sin(mφ).
struct Mode {
    int l;
    int m;
    int kind;
};

enum class Parity { All, Even };

/// Ordered selection of modes, used to flatten coefficients into solver vectors.
class ModeSet {
public:
    ModeSet(int lmax, Parity parity) : lmax_(lmax) {
        for (int m = 0; m <= lmax; ++m) {
            for (int kind = 0; kind < (m == 0 ? 1 : 2); ++kind) {
                for (int l = m; l <= lmax; ++l) {
                    if (parity == Parity::Even && l % 2 != 0) continue;
                    modes_.push_back({l, m, kind});
                }
            }
        }
    }

    int lmax() const { return lmax_; }
    std::size_t size() const { return modes_.size(); }
    const Mode& operator[](std::size_t i) const { return modes_[i]; }
    const std::vector<Mode>& modes() const { return modes_; }

    Eigen::VectorXd pack(const SpectralCoeffs& c) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(modes_.size()));
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            const auto& md = modes_[i];
            v[static_cast<Eigen::Index>(i)] = md.kind == 0 ? c.cos(md.l, md.m) : c.sin(md.l, md.m);
        }
        return v;
    }

    SpectralCoeffs unpack(const Eigen::VectorXd& v) const {
        auto c = SpectralCoeffs::zero(lmax_);
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            const auto& md = modes_[i];
            (md.kind == 0 ? c.cos : c.sin)(md.l, md.m) = v[static_cast<Eigen::Index>(i)];
        }
        return c;
    }

private:
    int lmax_;
    std::vector<Mode> modes_;
};

/// Orthonormal real associated Legendre values P̄_lm(θ) and dP̄_lm/dθ at a single colatitude,
/// stored as (l, m) matrices. No Condon-Shortley phase.
struct LegendreColumn {
    Eigen::MatrixXd p;
    Eigen::MatrixXd dp;
};

inline LegendreColumn legendre_column(int lmax, double cos_t, double sin_t) {
    LegendreColumn out{Eigen::MatrixXd::Zero(lmax + 1, lmax + 1), Eigen::MatrixXd::Zero(lmax + 1, lmax + 1)};
    auto& p = out.p;
    const double pi = std::numbers::pi;
    p(0, 0) = 1.0 / std::sqrt(4.0 * pi);
    for (int m = 1; m <= lmax; ++m) {
        p(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_t * p(m - 1, m - 1);
    }
    for (int m = 0; m < lmax; ++m) {
        p(m + 1, m) = std::sqrt(2.0 * m + 3.0) * cos_t * p(m, m);
        for (int l = m + 2; l <= lmax; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
            const double b = std::sqrt(((l - 1.0) * (l - 1.0) - double(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
            p(l, m) = a * (cos_t * p(l - 1, m) - b * p(l - 2, m));
        }
    }
    auto& dp = out.dp;
    const bool at_pole = std::abs(sin_t) < 1e-300;
    for (int m = 0; m <= lmax; ++m) {
        for (int l = m; l <= lmax; ++l) {
            if (!at_pole) {
                const double lower =
                    l > m ? std::sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0) * (double(l) * l - double(m) * m)) * p(l - 1, m)
                          : 0.0;
                dp(l, m) = (l * cos_t * p(l, m) - lower) / sin_t;
            } else if (m == 1) {
                // p_l1 ~ c_l sinθ P_l'(cosθ) near the pole
                const double c = std::sqrt((2.0 * l + 1.0) / (4.0 * pi * l * (l + 1.0)));
                const double half = 0.5 * l * (l + 1.0);
                dp(l, m) = cos_t > 0 ? c * half : c * half * ((l % 2 == 0) ? 1.0 : -1.0);
            }
        }
    }
    for (int m = 1; m <= lmax; ++m) {
        p.col(m) *= std::numbers::sqrt2;
        dp.col(m) *= std::numbers::sqrt2;
    }
    return out;
}

/// Grid-valued derivative data of a band-limited field, node order j * n_phi + m.
struct SpectralDerivatives {
    Eigen::ArrayXd value;
    Eigen::ArrayXd d_theta;          ///< u_θ
    Eigen::ArrayXd d_phi_over_sin;   ///< u_φ / sin θ
    Eigen::ArrayXd h11, h12, h22;    ///< covariant Hessian in the frame (∂θ, ∂φ / sin θ)
    Eigen::ArrayXd laplacian;
};

/// Analysis/synthesis between a Gauss-Legendre x uniform-longitude grid and real spherical
/// harmonics of degree <= n_theta - 1. Analysis is exact for band-limited fields because
/// n_phi >= 2 n_theta.
class SphericalHarmonicTransform {
public:
    SphericalHarmonicTransform(const std::vector<double>& cos_theta, const std::vector<double>& sin_theta,
                               const std::vector<double>& ring_weights, int n_phi)
        : n_theta_(static_cast<int>(cos_theta.size())), n_phi_(n_phi), lmax_(n_theta_ - 1),
          cos_t_(cos_theta), sin_t_(sin_theta), ring_w_(ring_weights) {
        const double pi = std::numbers::pi;
        for (auto* t : {&p_, &dp_, &q_, &e_, &g_}) {
            t->resize(lmax_ + 1);
            for (int m = 0; m <= lmax_; ++m) (*t)[m].resize(n_theta_, lmax_ + 1 - m);
        }
        // northern half (and equator) by recurrence, southern half by exact parity
        for (int j = 0; j < (n_theta_ + 1) / 2; ++j) {
            const auto col = legendre_column(lmax_, cos_t_[j], sin_t_[j]);
            const int jm = n_theta_ - 1 - j;
            const double st = sin_t_[j];
            const double cot = cos_t_[j] / st;
            for (int m = 0; m <= lmax_; ++m) {
                for (int l = m; l <= lmax_; ++l) {
                    const double sgn = ((l + m) % 2 == 0) ? 1.0 : -1.0;
                    const double pv = col.p(l, m), dv = col.dp(l, m);
                    const double qv = pv / st;
                    const double ev = -double(m) * m * qv / st + cot * dv;
                    const double gv = (dv - cot * pv) / st;
                    p_[m](j, l - m) = pv;
                    dp_[m](j, l - m) = dv;
                    q_[m](j, l - m) = qv;
                    e_[m](j, l - m) = ev;
                    g_[m](j, l - m) = gv;
                    p_[m](jm, l - m) = sgn * pv;
                    dp_[m](jm, l - m) = -sgn * dv;
                    q_[m](jm, l - m) = sgn * qv;
                    e_[m](jm, l - m) = sgn * ev;
                    g_[m](jm, l - m) = -sgn * gv;
                }
            }
        }
        if (n_theta_ % 2 == 1) {
            // equator: odd (l + m) vanish, even (l + m) have zero θ-derivative
            const int je = n_theta_ / 2;
            for (int m = 0; m <= lmax_; ++m)
                for (int l = m; l <= lmax_; ++l) {
                    if ((l + m) % 2 != 0) {
                        p_[m](je, l - m) = 0.0;
                        q_[m](je, l - m) = 0.0;
                        e_[m](je, l - m) = 0.0;
                    } else {
                        dp_[m](je, l - m) = 0.0;
                        g_[m](je, l - m) = 0.0;
                    }
                }
        }
        cos_mphi_.resize(lmax_ + 1, n_phi_);
        sin_mphi_.resize(lmax_ + 1, n_phi_);
        for (int m = 0; m <= lmax_; ++m) {
            for (int i = 0; i < n_phi_; ++i) {
                // integer reduction keeps cos(m(φ + π)) = (-1)^m cos(mφ) exact
                const long r = (static_cast<long>(m) * i) % n_phi_;
                const double ang = 2.0 * pi * static_cast<double>(r) / n_phi_;
                cos_mphi_(m, i) = std::cos(ang);
                sin_mphi_(m, i) = std::sin(ang);
            }
        }
        for (int m = 0; m <= lmax_; ++m) {
            for (int i = 0; i < n_phi_ / 2; ++i) {
                const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
                cos_mphi_(m, i + n_phi_ / 2) = sgn * cos_mphi_(m, i);
                sin_mphi_(m, i + n_phi_ / 2) = sgn * sin_mphi_(m, i);
            }
        }
    }

    int lmax() const { return lmax_; }
    int n_theta() const { return n_theta_; }
    int n_phi() const { return n_phi_; }

    SpectralCoeffs analyze(const Eigen::ArrayXd& values) const {
        check_size(values);
        Eigen::Map<const RowMatrix> u(values.data(), n_theta_, n_phi_);
        const Eigen::MatrixXd fc = u * cos_mphi_.transpose();
        const Eigen::MatrixXd fs = u * sin_mphi_.transpose();
        const double dphi = 2.0 * std::numbers::pi / n_phi_;
        auto out = SpectralCoeffs::zero(lmax_);
        Eigen::VectorXd wc(n_theta_), ws(n_theta_);
        for (int m = 0; m <= lmax_; ++m) {
            for (int j = 0; j < n_theta_; ++j) {
                wc[j] = ring_w_[j] * dphi * fc(j, m);
                ws[j] = ring_w_[j] * dphi * fs(j, m);
            }
            out.cos.col(m).segment(m, lmax_ + 1 - m) = p_[m].transpose() * wc;
            if (m > 0) out.sin.col(m).segment(m, lmax_ + 1 - m) = p_[m].transpose() * ws;
        }
        return out;
    }

    Eigen::ArrayXd synthesize(const SpectralCoeffs& c) const {
        Eigen::MatrixXd a(n_theta_, lmax_ + 1), b(n_theta_, lmax_ + 1);
        for (int m = 0; m <= lmax_; ++m) {
            a.col(m) = p_[m] * c.cos.col(m).segment(m, lmax_ + 1 - m);
            b.col(m) = p_[m] * c.sin.col(m).segment(m, lmax_ + 1 - m);
        }
        RowMatrix u = a * cos_mphi_ + b * sin_mphi_;
        return Eigen::Map<const Eigen::ArrayXd>(u.data(), u.size());
    }

    /// Gradient, Hessian and Laplacian on the grid. The 1/sin θ factors are folded into
    /// per-mode tables, so no grid-level division by sin θ occurs.
    SpectralDerivatives derivatives(const SpectralCoeffs& c) const {
        const int nl = lmax_ + 1;
        auto make = [&] { return Eigen::MatrixXd(n_theta_, nl); };
        Eigen::MatrixXd a = make(), b = make(), da = make(), db = make(), la = make(), lb = make();
        Eigen::MatrixXd qa = make(), qb = make(), ea = make(), eb = make(), ga = make(), gb = make();
        for (int m = 0; m <= lmax_; ++m) {
            const int len = nl - m;
            const Eigen::VectorXd cc = c.cos.col(m).segment(m, len);
            const Eigen::VectorXd cs = c.sin.col(m).segment(m, len);
            Eigen::VectorXd eig(len);
            for (int l = m; l <= lmax_; ++l) eig[l - m] = -double(l) * (l + 1.0);
            a.col(m) = p_[m] * cc;
            b.col(m) = p_[m] * cs;
            da.col(m) = dp_[m] * cc;
            db.col(m) = dp_[m] * cs;
            la.col(m) = p_[m] * eig.cwiseProduct(cc);
            lb.col(m) = p_[m] * eig.cwiseProduct(cs);
            qa.col(m) = double(m) * (q_[m] * cc);
            qb.col(m) = double(m) * (q_[m] * cs);
            ea.col(m) = e_[m] * cc;
            eb.col(m) = e_[m] * cs;
            ga.col(m) = double(m) * (g_[m] * cc);
            gb.col(m) = double(m) * (g_[m] * cs);
        }
        const RowMatrix u = a * cos_mphi_ + b * sin_mphi_;
        const RowMatrix ut = da * cos_mphi_ + db * sin_mphi_;
        const RowMatrix upo = qb * cos_mphi_ - qa * sin_mphi_;
        const RowMatrix h22 = ea * cos_mphi_ + eb * sin_mphi_;
        const RowMatrix h12 = gb * cos_mphi_ - ga * sin_mphi_;
        const RowMatrix lap = la * cos_mphi_ + lb * sin_mphi_;

        const Eigen::Index n = static_cast<Eigen::Index>(n_theta_) * n_phi_;
        auto flat = [n](const RowMatrix& mtx) { return Eigen::ArrayXd(Eigen::Map<const Eigen::ArrayXd>(mtx.data(), n)); };
        SpectralDerivatives d;
        d.value = flat(u);
        d.d_theta = flat(ut);
        d.d_phi_over_sin = flat(upo);
        d.h22 = flat(h22);
        d.h12 = flat(h12);
        d.laplacian = flat(lap);
        d.h11 = d.laplacian - d.h22;
        return d;
    }

    /// Value and frame gradient (u_θ, u_φ / sin θ) at an arbitrary point. At the poles the
    /// frame is taken at φ = 0 and the gradient is the pole limit.
    std::pair<double, Eigen::Vector2d> evaluate(const SpectralCoeffs& c, double theta, double phi) const {
        const double ct = std::cos(theta);
        const double st = (theta == 0.0 || theta == std::numbers::pi) ? 0.0 : std::sin(theta);
        const auto col = legendre_column(lmax_, ct, st);
        double val = 0.0, dt = 0.0, dpo = 0.0;
        for (int m = 0; m <= lmax_; ++m) {
            const double cm = std::cos(m * phi), sm = std::sin(m * phi);
            for (int l = m; l <= lmax_; ++l) {
                const double ampl = c.cos(l, m) * cm + c.sin(l, m) * sm;
                val += col.p(l, m) * ampl;
                dt += col.dp(l, m) * ampl;
                const double dphi = m * (c.sin(l, m) * cm - c.cos(l, m) * sm);
                if (st != 0.0) dpo += col.p(l, m) * dphi / st;
                else if (m == 1) dpo += col.dp(l, m) * dphi * (ct > 0 ? 1.0 : -1.0);
            }
        }
        return {val, Eigen::Vector2d(dt, dpo)};
    }

private:
    void check_size(const Eigen::ArrayXd& values) const {
        if (values.size() != static_cast<Eigen::Index>(n_theta_) * n_phi_)
            throw Error(ErrorKind::InvalidArgument, "field size does not match grid");
    }

    int n_theta_;
    int n_phi_;
    int lmax_;
    std::vector<double> cos_t_, sin_t_, ring_w_;
    // per m, (n_theta, lmax + 1 - m): P̄, dP̄/dθ, P̄/sinθ, H22 kernel, H12 kernel / m
    std::vector<Eigen::MatrixXd> p_, dp_, q_, e_, g_;
    Eigen::MatrixXd cos_mphi_, sin_mphi_;  // (lmax + 1, n_phi)
};

}  // namespace lpcurv
