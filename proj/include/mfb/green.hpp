#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mfb/constants.hpp"
#include "mfb/grid.hpp"
#include "mfb/numerics.hpp"

namespace mfb {

// g(r) = (1/gamma) log(1/r), the fundamental solution of (-Delta)^m at the
// origin of R^{2m}.
struct FundamentalSolution {
    Dimension dim;
    double gamma;
};

inline FundamentalSolution fundamental_solution(const Dimension& dim) {
    return {dim, constants_for(dim).gamma};
}

struct FundamentalDerivatives {
    double lap;     // Delta^k g (r)
    double dr_lap;  // d/dr Delta^k g (r)
};

// Closed forms, valid for 0 <= k <= m-1:
//   gamma Delta^k g      = (-1)^k   (2k-2)!! (2m-2)!! / (2m-2k-2)!! r^{-2k}
//   gamma d/dr Delta^k g = (-1)^{k+1} (2k)!! (2m-2)!! / (2m-2k-2)!! r^{-2k-1}
// with the conventions (-2)!! = 0!! = 1 so k = 0 degenerates correctly
// (k = 0 value is log(1/r)/gamma itself).
inline FundamentalDerivatives fundamental_derivatives(const Dimension& dim, int k, double r) {
    if (r <= 0.0) throw std::domain_error("fundamental_derivatives: r must be positive");
    if (k < 0 || k > dim.m - 1)
        throw std::invalid_argument("fundamental_derivatives: k out of range [0, m-1]");
    const double gamma = constants_for(dim).gamma;
    const double common = double_factorial(2 * dim.m - 2) / double_factorial(2 * dim.m - 2 * k - 2);
    FundamentalDerivatives out;
    if (k == 0)
        out.lap = std::log(1.0 / r) / gamma;
    else
        out.lap = ((k % 2 == 0) ? 1.0 : -1.0) * double_factorial(2 * k - 2) * common *
                  std::pow(r, -2 * k) / gamma;
    out.dr_lap = ((k % 2 == 0) ? -1.0 : 1.0) * double_factorial(2 * k) * common *
                 std::pow(r, -2 * k - 1) / gamma;
    return out;
}

namespace detail {

// Polynomial in even powers of r, the natural space of radial polyharmonic
// functions smooth at the origin.  coeffs[j] multiplies r^{2j}.
struct EvenPoly {
    std::vector<double> coeffs;

    double eval(double r) const {
        double acc = 0.0;
        const double r2 = r * r;
        for (std::size_t j = coeffs.size(); j-- > 0;) acc = acc * r2 + coeffs[j];
        return acc;
    }
    // l-th radial derivative
    double eval_deriv(double r, int l) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < coeffs.size(); ++j) {
            const int p = 2 * static_cast<int>(j);
            if (p < l) continue;
            double fall = 1.0;
            for (int i = 0; i < l; ++i) fall *= (p - i);
            acc += coeffs[j] * fall * std::pow(r, p - l);
        }
        return acc;
    }
    // Laplacian in R^{2m}: Delta r^{2j} = 2j(2j + 2m - 2) r^{2j-2}
    EvenPoly laplacian(int m) const {
        EvenPoly out;
        if (coeffs.size() <= 1) return out;
        out.coeffs.resize(coeffs.size() - 1);
        for (std::size_t j = 1; j < coeffs.size(); ++j) {
            const double p = 2.0 * static_cast<double>(j);
            out.coeffs[j - 1] = coeffs[j] * p * (p + 2.0 * m - 2.0);
        }
        return out;
    }
};

}  // namespace detail

// Dirichlet Green function of (-Delta)^m on B_R centered at the pole 0:
// G = g + P with P(r) = sum_j c_j r^{2j} fixed by G(R) = d_r^k G(R) = 0,
// k = 1..m-1.  P is automatically polyharmonic (degree <= 2m-2 in r).
class GreenFunctionBall {
  public:
    GreenFunctionBall(Dimension dim, double radius, Eigen::VectorXd coeffs)
        : dim_(dim), gc_(constants_for(dim)), R_(radius), c_(std::move(coeffs)) {
        lap_stack_.resize(dim_.m);
        detail::EvenPoly p;
        p.coeffs.assign(c_.data(), c_.data() + c_.size());
        for (int k = 0; k < dim_.m; ++k) {
            lap_stack_[k] = p;
            p = p.laplacian(dim_.m);
        }
        // Delta^m of the regular part must be identically zero.
        if (!p.coeffs.empty())
            for (double a : p.coeffs)
                if (a != 0.0) throw std::logic_error("GreenFunctionBall: regular part not polyharmonic");
    }

    const Dimension& dim() const { return dim_; }
    double radius() const { return R_; }
    const Eigen::VectorXd& regular_coeffs() const { return c_; }

    double regular_value(double r) const { return lap_stack_[0].eval(r); }
    double value(double r) const {
        if (r <= 0.0) throw std::domain_error("GreenFunctionBall: r must be positive");
        return std::log(1.0 / r) / gc_.gamma + regular_value(r);
    }

    // Delta^k G and d/dr Delta^k G, 0 <= k <= m-1
    double lap_power(int k, double r) const {
        return fundamental_derivatives(dim_, k, r).lap + lap_stack_[k].eval(r);
    }
    double dr_lap_power(int k, double r) const {
        return fundamental_derivatives(dim_, k, r).dr_lap + lap_stack_[k].eval_deriv(r, 1);
    }

    // Radial representation of Delta^{p/2} G: even p gives Delta^{p/2} G,
    // odd p gives d/dr Delta^{(p-1)/2} G.
    double half_power_value(int p, double r) const {
        if (p % 2 == 0) return lap_power(p / 2, r);
        return dr_lap_power((p - 1) / 2, r);
    }

    // l-th radial derivative of G
    double radial_derivative(int l, double r) const {
        if (r <= 0.0) throw std::domain_error("GreenFunctionBall: r must be positive");
        double log_part;
        if (l == 0)
            log_part = std::log(1.0 / r) / gc_.gamma;
        else
            log_part = ((l % 2 == 0) ? 1.0 : -1.0) * factorial(l - 1) * std::pow(r, -l) / gc_.gamma;
        return log_part + lap_stack_[0].eval_deriv(r, l);
    }

  private:
    Dimension dim_;
    GeometricConstants gc_;
    double R_;
    Eigen::VectorXd c_;
    std::vector<detail::EvenPoly> lap_stack_;  // Delta^k of the regular part
};

inline GreenFunctionBall build_green(const Dimension& dim, double radius) {
    if (radius <= 0.0) throw std::invalid_argument("build_green: radius must be positive");
    const int m = dim.m;
    const double gamma = constants_for(dim).gamma;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs(m);
    // row k: d_r^k [sum c_j r^{2j}] (R) = -d_r^k g(R)
    for (int k = 0; k < m; ++k) {
        for (int j = 0; j < m; ++j) {
            const int p = 2 * j;
            if (p < k) continue;
            double fall = 1.0;
            for (int i = 0; i < k; ++i) fall *= (p - i);
            A(k, j) = fall * std::pow(radius, p - k);
        }
        if (k == 0)
            rhs[k] = -std::log(1.0 / radius) / gamma;
        else
            rhs[k] = -((k % 2 == 0) ? 1.0 : -1.0) * factorial(k - 1) * std::pow(radius, -k) / gamma;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd c = lu.solve(rhs);
    if (!c.allFinite()) throw std::logic_error("build_green: singular boundary system");
    GreenFunctionBall G(dim, radius, c);
    // boundary-condition invariants
    for (int k = 0; k < m; ++k) {
        const double v = (k == 0) ? G.value(radius) : G.radial_derivative(k, radius);
        if (std::abs(v) > 1e-12 * std::max(1.0, std::abs(rhs[k])))
            throw std::logic_error("build_green: boundary conditions not satisfied");
    }
    return G;
}

// (-1)^m |S^{2m-1}| r^{2m-1} d/dr Delta^{m-1} G — the flux through the sphere
// of radius r, i.e. the computable meaning of (-Delta)^m G = delta_0.
// Equals 1 for every 0 < r < R.
inline double flux_check(const GreenFunctionBall& G, double r) {
    if (r <= 0.0 || r >= G.radius()) throw std::domain_error("flux_check: need 0 < r < R");
    const int m = G.dim().m;
    const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
    return sgn * sphere_area(2 * m - 1) * std::pow(r, 2 * m - 1) * G.dr_lap_power(m - 1, r);
}

// (2m-1)! int_{B_R} G(y) e^{2m u_hat(y)} dy - alpha, the Green representation
// of u_hat at the pole x = 0.
//
// The integrand spans ~1e12 in magnitude near blow-up and has the log
// singularity of G at 0, so it is integrated in the map coordinate s with a
// tanh-sinh rule, evaluating exp(2m * interpolant) pointwise.  Interpolating
// e^{2m u} itself would destroy the small outer values.
inline double representation(const RadialField& u_hat, double alpha, const GreenFunctionBall& G) {
    const RadialGrid& grid = *u_hat.grid;
    const int m = grid.dim().m;
    if (std::abs(grid.radius() - G.radius()) > 1e-12 * G.radius())
        throw std::invalid_argument("representation: field and Green function radii differ");
    const double area = sphere_area(2 * m - 1);
    const double gamma = constants_for(grid.dim()).gamma;
    auto integrand = [&](double s) {
        const double r = grid.phi(s);
        if (r <= 0.0) return 0.0;
        const double uh = u_hat.eval_s(s);
        const double Gv = std::log(1.0 / r) / gamma + G.regular_value(r);
        return Gv * std::exp(2.0 * m * uh) * std::pow(r, 2 * m - 1) * grid.phi_prime(s);
    };
    const double integral = area * tanh_sinh_01(integrand);
    return factorial(2 * m - 1) * integral - alpha;
}

// max over samples of r^l |d_r^l G(r)| — bounded-constant diagnostic for the
// derivative decay |grad^l G| <= C |x|^{-l}.
inline double decay_estimate_probe(const GreenFunctionBall& G, int l,
                                   const std::vector<double>& samples) {
    if (l < 1 || l > 2 * G.dim().m - 1)
        throw std::invalid_argument("decay_estimate_probe: l out of range");
    double worst = 0.0;
    for (double r : samples) {
        if (r <= 0.0 || r > G.radius())
            throw std::domain_error("decay_estimate_probe: sample outside (0, R]");
        worst = std::max(worst, std::pow(r, l) * std::abs(G.radial_derivative(l, r)));
    }
    return worst;
}

}  // namespace mfb
