#pragma once

#include <cmath>
#include <stdexcept>

#include "mfb/numerics.hpp"

namespace mfb {

inline constexpr double pi = 3.14159265358979323846;

// Operator order m; the ambient space is R^{2m} so everything conformal
// lines up (the exponent 2m in the nonlinearity equals the dimension).
struct Dimension {
    int m = 1;

    explicit Dimension(int order) : m(order) {
        if (m < 1 || m > 6) throw std::invalid_argument("Dimension: order out of range");
    }
    int space() const { return 2 * m; }
};

// Surface measure of the unit k-sphere S^k embedded in R^{k+1}.
inline double sphere_area(int k) {
    if (k < 0) throw std::invalid_argument("sphere_area: negative k");
    // |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2)
    return 2.0 * std::pow(pi, 0.5 * (k + 1)) / std::tgamma(0.5 * (k + 1));
}

// The constants that organize the whole theory:
//   mass_quantum: total mass carried by one standard bubble, (2m-1)!|S^{2m}|
//   gamma: normalizer making log(1/|x|)/gamma the fundamental solution of (-Delta)^m
struct GeometricConstants {
    int m = 1;
    double sphere_area_2m = 0.0;        // |S^{2m}|
    double sphere_area_boundary = 0.0;  // |S^{2m-1}|
    double mass_quantum = 0.0;          // Lambda_1
    double gamma = 0.0;

    double half_mass() const { return 0.5 * mass_quantum; }
};

inline GeometricConstants constants_for(const Dimension& dim) {
    GeometricConstants c;
    c.m = dim.m;
    c.sphere_area_2m = sphere_area(2 * dim.m);
    c.sphere_area_boundary = sphere_area(2 * dim.m - 1);
    c.mass_quantum = static_cast<double>(factorial(2 * dim.m - 1)) * c.sphere_area_2m;
    c.gamma = 0.5 * c.mass_quantum;
    return c;
}

// Flux form of gamma: what actually comes out when you integrate the normal
// derivative of Delta^{m-1} log(1/|x|) over a small sphere.  Equals gamma.
inline double gamma_flux_form(const Dimension& dim) {
    const double df = double_factorial(2 * dim.m - 2);
    return sphere_area(2 * dim.m - 1) * df * df;
}

}  // namespace mfb
