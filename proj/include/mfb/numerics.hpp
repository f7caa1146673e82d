#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mfb {

// Error-free transformations. two_prod relies on a hardware fma.
inline void two_sum(double a, double b, double& s, double& e) {
    s = a + b;
    const double z = s - a;
    e = (a - (s - z)) + (b - z);
}

inline void two_prod(double a, double b, double& p, double& e) {
    p = a * b;
    e = std::fma(a, b, -p);
}

// Dot product with twice-working-precision accumulation (Ogita/Rump/Oishi).
// The differentiation matrices have rows with huge cancellation; plain dot
// products put an O(||row||_inf * eps) noise floor on every derivative, which
// is what ultimately limits Newton near blow-up.  This costs ~4x flops and
// removes that floor almost entirely.
inline double dot2(const double* a, const double* b, std::ptrdiff_t n) {
    double s = 0.0, comp = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double p, ep;
        two_prod(a[i], b[i], p, ep);
        double t, es;
        two_sum(s, p, t, es);
        s = t;
        comp += ep + es;
    }
    return s + comp;
}

inline double dot2(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot2: size mismatch");
    return dot2(a.data(), b.data(), static_cast<std::ptrdiff_t>(a.size()));
}

// y = A x with each row accumulated by dot2.  A must be row-major for the
// row pointers to be contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::VectorXd apply_compensated(const RowMatrix& A, const Eigen::VectorXd& x) {
    if (A.cols() != x.size()) throw std::invalid_argument("apply_compensated: shape mismatch");
    Eigen::VectorXd y(A.rows());
    const auto n = static_cast<std::ptrdiff_t>(A.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        y[i] = dot2(A.data() + i * A.cols(), x.data(), n);
    return y;
}

// Gauss-Legendre rule on [-1,1] by Newton iteration on the recurrence.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return rule;
}

// Rescale a [-1,1] rule to [a,b].
inline QuadratureRule gauss_legendre(int n, double a, double b) {
    QuadratureRule rule = gauss_legendre(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (auto& x : rule.nodes) x = mid + half * x;
    for (auto& w : rule.weights) w *= half;
    return rule;
}

// Tanh-sinh (double exponential) rule on (0,1), tolerant of endpoint
// singularities that are integrable.  Fixed fill: level h = 2^-k with the
// node set truncated where the weights underflow.
template <typename F>
double tanh_sinh_01(F&& f, int levels = 7, double t_max = 4.8) {
    const double pi_half = 1.57079632679489661923;
    const double h = 1.0 / static_cast<double>(1 << levels);
    double sum = 0.0;
    const auto n_steps = static_cast<long>(t_max / h);
    for (long k = -n_steps; k <= n_steps; ++k) {
        const double t = h * static_cast<double>(k);
        const double u = pi_half * std::sinh(t);
        const double x = 0.5 * (1.0 + std::tanh(u));       // node in (0,1)
        const double ch = std::cosh(u);
        const double w = pi_half * std::cosh(t) / (2.0 * ch * ch);
        if (w < 1e-320 || x <= 0.0 || x >= 1.0) continue;
        sum += w * f(x);
    }
    return sum * h;
}

inline long factorial(int n) {
    if (n < 0) throw std::invalid_argument("factorial: negative argument");
    long r = 1;
    for (int k = 2; k <= n; ++k) r *= k;
    return r;
}

// Double factorial with the empty-product conventions 0!! = (-1)!! = 1.
// The boundary-term coefficients below also need (-2)!! which we likewise
// send to 1 (it only ever appears in ratios that are genuinely 1).
inline double double_factorial(int n) {
    if (n <= 0) {
        if (n >= -2) return 1.0;
        throw std::invalid_argument("double_factorial: argument below -2");
    }
    double r = 1.0;
    for (int k = n; k > 1; k -= 2) r *= k;
    return r;
}

}  // namespace mfb
