#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfb/constants.hpp"
#include "mfb/grid.hpp"
#include "mfb/numerics.hpp"

namespace mfb {

// Spherical solution of (-Delta)^m u = (2m-1)! e^{2mu} on R^{2m}:
//   eta(x) = log(2*scale / (1 + scale^2 |x - center|^2)).
// Stored by parameters, never sampled, so derivatives stay analytic.
struct Bubble {
    double scale = 1.0;
    std::vector<double> center;  // empty means origin
};

inline double bubble_eval_radius(const Bubble& b, double dist) {
    return std::log(2.0 * b.scale) - std::log1p(b.scale * b.scale * dist * dist);
}

inline double bubble_eval(const Bubble& b, const std::vector<double>& x) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = i < b.center.size() ? b.center[i] : 0.0;
        d2 += (x[i] - c) * (x[i] - c);
    }
    return std::log(2.0 * b.scale) - std::log1p(b.scale * b.scale * d2);
}

// Mass of the bubble over B_radius(center):
//   int e^{2m eta} dx = |S^{2m-1}| 4^m int_0^{scale*radius} t^{2m-1}(1+t^2)^{-2m} dt.
// The substitution v = t^2/(1+t^2) turns the integrand into the polynomial
// v^{m-1}(1-v)^{m-1}/2, integrated exactly by Gauss-Legendre.  radius = inf
// (any non-finite value) returns the closed form |S^{2m}|.
inline double bubble_mass(const Bubble& b, const Dimension& dim, double radius) {
    if (std::isnan(radius) || radius <= 0.0)
        throw std::invalid_argument("bubble_mass: radius must be positive");
    if (std::isinf(radius)) return sphere_area(2 * dim.m);
    const double T = b.scale * radius;
    const double X = T * T / (1.0 + T * T);
    const QuadratureRule rule = gauss_legendre(64, 0.0, X);
    double J = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double v = rule.nodes[i];
        J += rule.weights[i] * std::pow(v, dim.m - 1) * std::pow(1.0 - v, dim.m - 1);
    }
    J *= 0.5;
    return sphere_area(2 * dim.m - 1) * std::pow(4.0, dim.m) * J;
}

// Max over the sample radii of |(-Delta)^m eta - (2m-1)! e^{2m eta}|, the
// polyharmonic operator applied through the radial differentiation stack.
// Only origin-centered bubbles are radial.
inline double bubble_residual(const Bubble& b, const Dimension& dim,
                              const std::vector<double>& sample_points) {
    for (double c : b.center)
        if (c != 0.0) throw std::invalid_argument("bubble_residual: bubble must be origin-centered");
    if (sample_points.empty()) return 0.0;
    double r_max = 0.0;
    for (double r : sample_points) {
        if (r < 0.0) throw std::invalid_argument("bubble_residual: negative sample radius");
        r_max = std::max(r_max, r);
    }
    if (r_max == 0.0) r_max = 1.0;
    // Unmapped grid unless the bubble has a genuine interior layer.
    const double kappa = (b.scale * r_max > 4.0) ? std::log(b.scale * r_max) + 2.0 : 0.0;
    const RadialGrid grid(dim, 96, r_max, kappa);

    Eigen::VectorXd eta(grid.size());
    for (int j = 0; j < grid.size(); ++j) eta[j] = bubble_eval_radius(b, grid.r()[j]);
    const Eigen::VectorXd lhs = grid.polyharmonic(eta, dim.m);
    const double fac = static_cast<double>(factorial(2 * dim.m - 1));
    Eigen::VectorXd res(grid.size());
    for (int j = 0; j < grid.size(); ++j) res[j] = lhs[j] - fac * std::exp(2.0 * dim.m * eta[j]);

    double worst = 0.0;
    for (double r : sample_points) {
        const double v = grid.interp_row(r, +1).dot(res);
        worst = std::max(worst, std::abs(v));
    }
    return worst;
}

}  // namespace mfb
