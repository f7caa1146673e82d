#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mfb/bubble.hpp"
#include "mfb/constants.hpp"
#include "mfb/green.hpp"
#include "mfb/grid.hpp"
#include "mfb/solver.hpp"

namespace mfb {

struct ConcentrationPoint {
    std::vector<double> location;          // in R^{2m}
    double scale = 0.0;                    // mu = 2 e^{-u_hat(x)}
    double local_mass = 0.0;               // (2m-1)! int_{B_{R mu}} e^{2m u_hat}
    double profile_dev = std::numeric_limits<double>::quiet_NaN();
    double boundary_ratio = 0.0;           // dist(x, boundary) / mu
    std::vector<double> separation_ratios;  // |x_i - x_j| / mu_i over j != i
};

struct ConcentrationReport {
    std::vector<ConcentrationPoint> points;
    int N = 0;
    double rho = 0.0;
    double quantization_residual = 0.0;
    double a5_sup = 0.0;  // sup_x min_i |x-x_i|^{2m} e^{2m u_hat(x)} at termination
    double green_limit_dev = std::numeric_limits<double>::quiet_NaN();
    double min_boundary_ratio = std::numeric_limits<double>::infinity();
    double collar_mass = 0.0;
    bool extraction_complete = true;
    bool inconsistent = false;  // no points found on a large-amplitude state
};

// Peak amplitude of the canonical profile is independent of scale, so the
// plateau of w on a single bubble is exactly 1; thresholds meant to count
// bubbles should sit above that.  This formula is a domain-scaled heuristic
// and deliberately a plain config default, not a derived constant.
inline double default_threshold_c(Dimension dim, double radius) {
    return std::pow(2.0 * radius / std::numbers::e, 2 * dim.m);
}

// Uniform view over the two sample layouts the analyzer accepts.  Sample
// order is part of the contract (deterministic argmax tie-breaking): the
// radial backend lists r = 0 first and then the nodes by increasing radius;
// the cartesian backend is row-major with x fastest.
class SampledField {
  public:
    enum class Backend { radial, cartesian2d };

    static SampledField from_radial(RadialField f) {
        SampledField s;
        s.backend_ = Backend::radial;
        s.m_ = f.grid->dim().m;
        const int H = f.grid->size();
        s.radii_.resize(H + 1);
        s.vals_.resize(H + 1);
        s.radii_[0] = 0.0;
        s.vals_[0] = f.eval(0.0);
        for (int j = 0; j < H; ++j) {
            s.radii_[1 + j] = f.grid->r()[H - 1 - j];
            s.vals_[1 + j] = f.values[H - 1 - j];
        }
        s.field_ = std::move(f);
        return s;
    }

    static SampledField from_cartesian2d(double x0, double y0, int nx, int ny, double h,
                                         Eigen::MatrixXd values) {
        if (values.rows() != ny || values.cols() != nx || nx < 2 || ny < 2 || h <= 0.0)
            throw std::invalid_argument("cartesian2d field: bad table shape or spacing");
        SampledField s;
        s.backend_ = Backend::cartesian2d;
        s.m_ = 1;  // planar tables only make sense for the second-order problem
        s.x0_ = x0;
        s.y0_ = y0;
        s.nx_ = nx;
        s.ny_ = ny;
        s.h_ = h;
        s.table_ = std::move(values);
        return s;
    }

    Backend backend() const { return backend_; }
    int order() const { return m_; }
    int space_dim() const { return 2 * m_; }

    std::size_t samples() const {
        return backend_ == Backend::radial ? radii_.size()
                                           : static_cast<std::size_t>(nx_) * ny_;
    }

    double value(std::size_t i) const {
        if (backend_ == Backend::radial) return vals_[i];
        return table_(static_cast<int>(i) / nx_, static_cast<int>(i) % nx_);
    }

    std::vector<double> location(std::size_t i) const {
        if (backend_ == Backend::radial) {
            std::vector<double> x(space_dim(), 0.0);
            x[0] = radii_[i];
            return x;
        }
        const int iy = static_cast<int>(i) / nx_, ix = static_cast<int>(i) % nx_;
        return {x0_ + ix * h_, y0_ + iy * h_};
    }

    double sample_distance(std::size_t i, const std::vector<double>& p) const {
        if (backend_ == Backend::radial) {
            double rest = 0.0;
            for (std::size_t k = 1; k < p.size(); ++k) rest += p[k] * p[k];
            const double d0 = radii_[i] - p[0];
            return std::sqrt(d0 * d0 + rest);
        }
        const int iy = static_cast<int>(i) / nx_, ix = static_cast<int>(i) % nx_;
        return std::hypot(x0_ + ix * h_ - p[0], y0_ + iy * h_ - p[1]);
    }

    double eval(const std::vector<double>& x) const {
        if (backend_ == Backend::radial) {
            double r2 = 0.0;
            for (double c : x) r2 += c * c;
            return field_.eval(std::sqrt(r2));
        }
        double fx = (x[0] - x0_) / h_, fy = (x[1] - y0_) / h_;
        int ix = std::clamp(static_cast<int>(std::floor(fx)), 0, nx_ - 2);
        int iy = std::clamp(static_cast<int>(std::floor(fy)), 0, ny_ - 2);
        fx = std::clamp(fx - ix, 0.0, 1.0);
        fy = std::clamp(fy - iy, 0.0, 1.0);
        return (1 - fx) * (1 - fy) * table_(iy, ix) + fx * (1 - fy) * table_(iy, ix + 1) +
               (1 - fx) * fy * table_(iy + 1, ix) + fx * fy * table_(iy + 1, ix + 1);
    }

    double boundary_distance(const std::vector<double>& x) const {
        if (backend_ == Backend::radial) {
            double r2 = 0.0;
            for (double c : x) r2 += c * c;
            return std::max(0.0, field_.grid->radius() - std::sqrt(r2));
        }
        const double x1 = x0_ + (nx_ - 1) * h_, y1 = y0_ + (ny_ - 1) * h_;
        return std::max(0.0, std::min(std::min(x[0] - x0_, x1 - x[0]),
                                      std::min(x[1] - y0_, y1 - x[1])));
    }

    // int e^{2m u_hat} over the whole domain
    double mass_exp() const {
        if (backend_ == Backend::radial) {
            const RadialGrid& g = *field_.grid;
            Eigen::VectorXd ex(g.size());
            for (int j = 0; j < g.size(); ++j) ex[j] = std::exp(2.0 * m_ * field_.values[j]);
            return g.ball_integral(ex, g.radius());
        }
        double acc = 0.0;
        for (int iy = 0; iy < ny_; ++iy)
            for (int ix = 0; ix < nx_; ++ix)
                acc += trapezoid_weight(ix, iy) * std::exp(2.0 * table_(iy, ix));
        return acc * h_ * h_;
    }

    // int_{B_rad(center) ∩ domain} e^{2m u_hat}.  The radial backend supports
    // origin-centered balls: those are the only ones arising from radial
    // extraction, and the quadrature exploits the symmetry.  Integrands are
    // exponentiated pointwise after interpolation; interpolating e^{2mu}
    // directly would destroy accuracy near a peak.
    double ball_mass_exp(const std::vector<double>& center, double rad) const {
        if (rad <= 0.0) return 0.0;
        if (backend_ == Backend::radial) {
            double c2 = 0.0;
            for (double c : center) c2 += c * c;
            if (std::sqrt(c2) > 1e-12 * field_.grid->radius())
                throw std::invalid_argument(
                    "radial field: ball mass only for origin-centered balls");
            const RadialGrid& g = *field_.grid;
            if (rad >= g.radius()) return mass_exp();
            const double s_max = g.s_of_r(rad);
            QuadratureRule q = gauss_legendre(200, 0.0, s_max);
            double acc = 0.0;
            for (std::size_t k = 0; k < q.nodes.size(); ++k) {
                const double s = q.nodes[k];
                const double r = g.phi(s);
                acc += q.weights[k] * std::exp(2.0 * m_ * field_.eval_s(s)) *
                       std::pow(r, 2 * m_ - 1) * g.phi_prime(s);
            }
            return acc * sphere_area(2 * m_ - 1);
        }
        double acc = 0.0;
        for (int iy = 0; iy < ny_; ++iy)
            for (int ix = 0; ix < nx_; ++ix) {
                const double dx = x0_ + ix * h_ - center[0], dy = y0_ + iy * h_ - center[1];
                if (dx * dx + dy * dy <= rad * rad)
                    acc += trapezoid_weight(ix, iy) * std::exp(2.0 * table_(iy, ix));
            }
        return acc * h_ * h_;
    }

    // int over {dist(x, boundary) < width} of e^{2m u_hat}
    double collar_mass_exp(double width) const {
        if (backend_ == Backend::radial) {
            const double R = field_.grid->radius();
            std::vector<double> origin(space_dim(), 0.0);
            return mass_exp() - ball_mass_exp(origin, std::max(0.0, R - width));
        }
        double acc = 0.0;
        for (int iy = 0; iy < ny_; ++iy)
            for (int ix = 0; ix < nx_; ++ix) {
                if (boundary_distance({x0_ + ix * h_, y0_ + iy * h_}) < width)
                    acc += trapezoid_weight(ix, iy) * std::exp(2.0 * table_(iy, ix));
            }
        return acc * h_ * h_;
    }

    const RadialField& radial_field() const {
        if (backend_ != Backend::radial)
            throw std::logic_error("sampled field has no radial representation");
        return field_;
    }

  private:
    SampledField() = default;

    double trapezoid_weight(int ix, int iy) const {
        const double wx = (ix == 0 || ix == nx_ - 1) ? 0.5 : 1.0;
        const double wy = (iy == 0 || iy == ny_ - 1) ? 0.5 : 1.0;
        return wx * wy;
    }

    Backend backend_ = Backend::radial;
    int m_ = 1;
    RadialField field_;
    std::vector<double> radii_, vals_;  // ascending radii, r = 0 first
    double x0_ = 0.0, y0_ = 0.0, h_ = 0.0;
    int nx_ = 0, ny_ = 0;
    Eigen::MatrixXd table_;
};

struct ExtractionResult {
    std::vector<ConcentrationPoint> points;
    double a5_sup = 0.0;
    bool complete = true;
    // min over insertions of |y - x_i|/mu_i - (w(y)/2^{2m})^{1/(2m)}; the
    // construction keeps this nonnegative up to sampling slack
    double min_separation_margin = std::numeric_limits<double>::infinity();
};

// Inductive peak extraction.  Start at the global maximum of u_hat; while
// w(x) = min_i |x - x_i|^{2m} e^{2m u_hat(x)} exceeds threshold_c somewhere
// on the sample set, adjoin its argmax as a new concentration point.
// Discrete argmax stands in for the continuum sup; ties break to the
// lexicographically smallest sample index.
inline ExtractionResult extract_points_detailed(const SampledField& f, double threshold_c,
                                                int max_points) {
    if (!(threshold_c > 0.0)) throw std::invalid_argument("threshold_c must be positive");
    if (max_points < 1) throw std::invalid_argument("max_points must be at least 1");
    const std::size_t S = f.samples();
    const int m = f.order();
    ExtractionResult res;

    std::size_t seed = 0;
    for (std::size_t i = 1; i < S; ++i)
        if (f.value(i) > f.value(seed)) seed = i;
    auto add_point = [&](std::size_t idx) {
        ConcentrationPoint p;
        p.location = f.location(idx);
        p.scale = 2.0 * std::exp(-f.value(idx));
        res.points.push_back(std::move(p));
    };
    add_point(seed);

    std::vector<double> dmin(S);
    for (std::size_t i = 0; i < S; ++i) dmin[i] = f.sample_distance(i, res.points[0].location);

    for (;;) {
        std::size_t best = 0;
        double w_best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < S; ++i) {
            const double w = std::pow(dmin[i], 2 * m) * std::exp(2.0 * m * f.value(i));
            if (w > w_best) {
                w_best = w;
                best = i;
            }
        }
        res.a5_sup = w_best;
        if (w_best <= threshold_c) break;
        if (static_cast<int>(res.points.size()) >= max_points) {
            res.complete = false;
            break;
        }
        const double bound = std::pow(w_best, 1.0 / (2 * m)) / 2.0;
        const std::vector<double> y = f.location(best);
        for (const ConcentrationPoint& p : res.points) {
            double d = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k)
                d += (y[k] - p.location[k]) * (y[k] - p.location[k]);
            d = std::sqrt(d);
            res.min_separation_margin =
                std::min(res.min_separation_margin, d / p.scale - bound);
        }
        add_point(best);
        for (std::size_t i = 0; i < S; ++i)
            dmin[i] = std::min(dmin[i], f.sample_distance(i, res.points.back().location));
    }

    for (std::size_t i = 0; i < res.points.size(); ++i) {
        for (std::size_t j = 0; j < res.points.size(); ++j) {
            if (i == j) continue;
            double d = 0.0;
            for (std::size_t k = 0; k < res.points[i].location.size(); ++k) {
                const double t = res.points[i].location[k] - res.points[j].location[k];
                d += t * t;
            }
            res.points[i].separation_ratios.push_back(std::sqrt(d) / res.points[i].scale);
        }
    }
    return res;
}

inline std::vector<ConcentrationPoint> extract_points(const SampledField& f, double threshold_c,
                                                      int max_points) {
    return extract_points_detailed(f, threshold_c, max_points).points;
}

// sup over |x| <= R_cmp of |u_hat(p + mu x) + log mu - eta0(x)| where
// eta0(x) = log(2/(1+|x|^2)) is the canonical profile.
inline double rescaled_profile_dev(const SampledField& f, const ConcentrationPoint& p,
                                   double r_cmp) {
    if (!(r_cmp > 0.0)) throw std::invalid_argument("r_cmp must be positive");
    const double mu = p.scale;
    if (f.boundary_distance(p.location) < r_cmp * mu)
        throw std::domain_error("profile window exits the domain (boundary_ratio too small)");
    auto eta0 = [](double t) { return std::log(2.0) - std::log1p(t * t); };
    double dev = 0.0;
    const int n_rad = 256;
    if (f.backend() == SampledField::Backend::radial) {
        for (int sgn : {-1, +1}) {
            for (int k = 0; k <= n_rad; ++k) {
                const double t = r_cmp * k / n_rad;
                std::vector<double> x = p.location;
                x[0] += sgn * mu * t;
                dev = std::max(dev, std::abs(f.eval(x) + std::log(mu) - eta0(t)));
            }
            if (p.location[0] == 0.0) break;  // both rays coincide from the origin
        }
        return dev;
    }
    const int n_dir = 32;
    for (int d = 0; d < n_dir; ++d) {
        const double th = 2.0 * pi * d / n_dir;
        for (int k = 0; k <= n_rad; ++k) {
            const double t = r_cmp * k / n_rad;
            std::vector<double> x = {p.location[0] + mu * t * std::cos(th),
                                     p.location[1] + mu * t * std::sin(th)};
            dev = std::max(dev, std::abs(f.eval(x) + std::log(mu) - eta0(t)));
        }
    }
    return dev;
}

// (2m-1)! int_{B_{R_loc mu}(x_i)} e^{2m u_hat}: the per-bubble mass candidate.
inline double local_mass(const SampledField& f, const ConcentrationPoint& p, double r_loc) {
    if (!(r_loc >= 1.0)) throw std::invalid_argument("r_loc must be at least 1");
    const int m = f.order();
    return static_cast<double>(factorial(2 * m - 1)) *
           f.ball_mass_exp(p.location, r_loc * p.scale);
}

inline double quantization_check(const SolutionState& s, const ConcentrationReport& report) {
    const double quantum = constants_for(s.u.grid->dim()).mass_quantum;
    return std::abs(s.rho - report.N * quantum) / quantum;
}

// sup over the annulus [r1, r2] of |u - Lambda_1 N G|, evaluated at the
// grid nodes inside the annulus (nodal values are exact for the state).
inline double green_limit_dev(const SolutionState& s, const ConcentrationReport& report,
                              const GreenFunctionBall& G, double r1, double r2) {
    const RadialGrid& g = *s.u.grid;
    if (!(0.0 < r1 && r1 < r2 && r2 <= g.radius() + 1e-12))
        throw std::invalid_argument("green_limit_dev: need 0 < r1 < r2 <= R");
    const double quantum = constants_for(g.dim()).mass_quantum;
    double dev = 0.0;
    int hits = 0;
    for (int j = 0; j < g.size(); ++j) {
        const double r = g.r()[j];
        if (r < r1 || r > r2) continue;
        dev = std::max(dev, std::abs(s.u.values[j] - quantum * report.N * G.value(r)));
        ++hits;
    }
    if (hits == 0) {
        // interpolating u at an off-node radius would smear the origin
        // singularity of G across the domain; the node nearest the midpoint
        // carries the state exactly and the comparison is continuous in r
        const double rm = 0.5 * (r1 + r2);
        int jn = 0;
        for (int j = 1; j < g.size(); ++j)
            if (std::abs(g.r()[j] - rm) < std::abs(g.r()[jn] - rm)) jn = j;
        dev = std::abs(s.u.values[jn] - quantum * report.N * G.value(g.r()[jn]));
    }
    return dev;
}

struct BoundaryDiagnostics {
    double min_boundary_ratio = std::numeric_limits<double>::infinity();
    double collar_mass = 0.0;  // (2m-1)! int over {dist(x, boundary) < width}
};

inline BoundaryDiagnostics boundary_diagnostics(const SampledField& f,
                                                const std::vector<ConcentrationPoint>& points,
                                                double collar_width) {
    BoundaryDiagnostics d;
    for (const ConcentrationPoint& p : points)
        d.min_boundary_ratio =
            std::min(d.min_boundary_ratio, f.boundary_distance(p.location) / p.scale);
    d.collar_mass =
        static_cast<double>(factorial(2 * f.order() - 1)) * f.collar_mass_exp(collar_width);
    return d;
}

// u_hat(x) = (1/2m) log sum_i e^{2m B_i(x)}: pointwise superposition of
// bubbles in the density, used to manufacture multi-peak test fields.
inline double superpose_bubbles(const std::vector<Bubble>& bubbles, const std::vector<double>& x,
                                int m) {
    if (bubbles.empty()) throw std::invalid_argument("need at least one bubble");
    double top = -std::numeric_limits<double>::infinity();
    std::vector<double> b(bubbles.size());
    for (std::size_t i = 0; i < bubbles.size(); ++i) {
        b[i] = bubble_eval(bubbles[i], x);
        top = std::max(top, b[i]);
    }
    double acc = 0.0;
    for (double v : b) acc += std::exp(2.0 * m * (v - top));
    return top + std::log(acc) / (2.0 * m);
}

template <typename F>
SampledField sample_cartesian2d(F&& f, double x0, double y0, int nx, int ny, double h) {
    Eigen::MatrixXd t(ny, nx);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) t(iy, ix) = f(x0 + ix * h, y0 + iy * h);
    return SampledField::from_cartesian2d(x0, y0, nx, ny, h, std::move(t));
}

struct AnalyzerOptions {
    double threshold_c = 0.0;  // <= 0 means: use default_threshold_c
    int max_points = 8;
    double r_loc = 50.0;
    double r_cmp = 5.0;
    double collar_width_fraction = 0.1;
    double annulus_r1 = 0.3;
    double annulus_r2 = 0.9;
};

// Full per-state report for a radial solver state: normalize, extract,
// attach per-point diagnostics, and compare against N copies of the Green
// function.  Profile deviation is NaN when the comparison window does not
// fit inside the domain (early branch states, where mu is O(1)).
inline ConcentrationReport analyze_state(const SolutionState& s, const GreenFunctionBall& G,
                                         const AnalyzerOptions& opt) {
    const RadialGrid& g = *s.u.grid;
    auto [u_hat, alpha] = normalize(s);
    (void)alpha;
    SampledField f = SampledField::from_radial(std::move(u_hat));
    const double thr = opt.threshold_c > 0.0
                           ? opt.threshold_c
                           : default_threshold_c(g.dim(), g.radius());
    ExtractionResult ex = extract_points_detailed(f, thr, opt.max_points);

    ConcentrationReport rep;
    rep.points = std::move(ex.points);
    rep.N = static_cast<int>(rep.points.size());
    rep.rho = s.rho;
    rep.a5_sup = ex.a5_sup;
    rep.extraction_complete = ex.complete;
    if (!(opt.r_loc >= 1.0)) throw std::invalid_argument("r_loc must be at least 1");
    for (ConcentrationPoint& p : rep.points) {
        try {
            p.local_mass = local_mass(f, p, opt.r_loc);
        } catch (const std::invalid_argument&) {
            // the radial backend only integrates origin-centered balls; a
            // sub-plateau threshold can seed an off-center point (e.g. the
            // boundary maximizer), whose mass is then simply unavailable
            p.local_mass = std::numeric_limits<double>::quiet_NaN();
        }
        p.boundary_ratio = f.boundary_distance(p.location) / p.scale;
        try {
            p.profile_dev = rescaled_profile_dev(f, p, opt.r_cmp);
        } catch (const std::domain_error&) {
            p.profile_dev = std::numeric_limits<double>::quiet_NaN();
        }
    }
    rep.quantization_residual = quantization_check(s, rep);
    rep.inconsistent = rep.N == 0 && s.u_max > 3.0;
    rep.green_limit_dev = green_limit_dev(s, rep, G, opt.annulus_r1, opt.annulus_r2);
    const BoundaryDiagnostics bd =
        boundary_diagnostics(f, rep.points, opt.collar_width_fraction * g.radius());
    rep.min_boundary_ratio = bd.min_boundary_ratio;
    rep.collar_mass = bd.collar_mass;
    return rep;
}

}  // namespace mfb
