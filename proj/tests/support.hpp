#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "lpcurv/lpcurv.hpp"

namespace lpcurv::testing {

inline constexpr double pi = std::numbers::pi;

/// Band-limited field Σ c_lm Y_lm with random coefficients, amplitude ~ scale / (1 + l)^2.
inline ScalarField random_field(const GridPtr& grid, std::mt19937& rng, int lmax, double scale, bool even_only) {
    std::normal_distribution<double> normal;
    auto c = SpectralCoeffs::zero(grid->lmax());
    for (int l = 1; l <= lmax; ++l) {
        if (even_only && l % 2) continue;
        for (int m = 0; m <= l; ++m) {
            const double a = scale / ((1.0 + l) * (1.0 + l));
            c.cos(l, m) = a * normal(rng);
            if (m > 0) c.sin(l, m) = a * normal(rng);
        }
    }
    return synthesize(grid, c);
}

/// Strictly convex even support function 1 + small even perturbation, rejection sampled.
inline ScalarField random_convex_even(const GridPtr& grid, std::mt19937& rng, double scale) {
    for (;;) {
        ScalarField s(grid, 1.0 + random_field(grid, rng, 6, scale, true).values());
        s = symmetrize_even(s);
        if (convexity_margin(s) > 0.05 && s.min() > 0.0) return s;
    }
}

inline double max_rel_diff(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    return (a - b).abs().maxCoeff() / std::max(1e-300, b.abs().maxCoeff());
}

}  // namespace lpcurv::testing
