#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mfb/constants.hpp"
#include "mfb/grid.hpp"
#include "mfb/numerics.hpp"

namespace mfb {

struct ProblemSpec {
    Dimension dim{1};
    double radius = 1.0;
    std::shared_ptr<const RadialGrid> grid;
};

inline ProblemSpec make_problem(int m, int node_count, double radius, double kappa) {
    Dimension dim(m);
    return {dim, radius, std::make_shared<RadialGrid>(dim, node_count, radius, kappa)};
}

struct SolutionState {
    RadialField u;
    double lambda = 0.0;
    double sigma = 0.0;
    double rho = 0.0;
    double alpha = 0.0;
    double u_max = 0.0;
    double residual_norm = 0.0;
};

enum class Termination { max_u_reached, step_limit, newton_failure };

inline const char* termination_name(Termination t) {
    switch (t) {
        case Termination::max_u_reached: return "max_u_reached";
        case Termination::step_limit: return "step_limit";
        case Termination::newton_failure: return "newton_failure";
    }
    return "unknown";
}

struct Branch {
    std::vector<SolutionState> states;
    std::vector<double> arclength;  // cumulative, aligned with states
    std::vector<double> step_used;  // accepted step per state (0 for the seed)
    Termination termination = Termination::newton_failure;
    double fold_lambda = std::numeric_limits<double>::quiet_NaN();
    double fold_u_max = std::numeric_limits<double>::quiet_NaN();
};

struct TraceLimits {
    double step_min = 1e-6;
    double step_max = 0.25;
    int max_steps = 2000;
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
};

// Interior rows: (-Delta)^m u - lambda e^{2mu}; the m rows nearest the
// boundary are replaced by the Dirichlet stack u(R), d_r^k u(R).
// This is the diagnostic form; the solver itself works on the mixed
// first-order-in-Delta system below, which avoids composing the
// differentiation matrix m times.
inline RadialField residual(const RadialField& u, double lambda, const ProblemSpec& spec) {
    const RadialGrid& grid = *spec.grid;
    const int m = spec.dim.m, H = grid.size();
    Eigen::VectorXd F = grid.polyharmonic(u.values, m);
    for (int i = 0; i < H; ++i) F[i] -= lambda * std::exp(2.0 * m * u.values[i]);
    for (int k = 0; k < m; ++k)
        F[k] = grid.boundary_derivative_row(k).dot(u.values);
    return {spec.grid, F, +1};
}

class NewtonFailure : public std::runtime_error {
  public:
    NewtonFailure(std::string msg, SolutionState last, int iters)
        : std::runtime_error(std::move(msg)), last_iterate(std::move(last)), iterations(iters) {}
    SolutionState last_iterate;
    int iterations;
};

namespace detail {

// Mixed formulation: unknown blocks w_0 = u, w_k = (-Delta)^k u.  Equations
//   -Delta w_{k-1} - w_k = 0                   (k = 1..m-1, all rows)
//   -Delta w_{m-1} - lambda e^{2m w_0} = 0     (interior rows of last block)
//   Dirichlet stack on w_0                     (first m rows of last block)
// Never forming Delta^m keeps the matrix norms ~1e10 instead of ~1e20 and
// with compensated residual evaluation Newton converges to ~1e-12 scaled
// residuals even at u(0) ~ 12.
class MixedSystem {
  public:
    explicit MixedSystem(const ProblemSpec& spec)
        : spec_(spec), grid_(*spec.grid), m_(spec.dim.m), H_(grid_.size()), n_(m_ * H_) {
        bc_rows_.resize(m_);
        for (int k = 0; k < m_; ++k) bc_rows_[k] = grid_.boundary_derivative_row(k);
        u0_row_ = grid_.interp_row(0.0, +1);
        abs_lap_ = grid_.lap().cwiseAbs();
        // constant part of the bordered Jacobian, copied each iteration
        J_const_ = Eigen::MatrixXd::Zero(n_ + 1, n_ + 1);
        for (int k = 0; k + 1 < m_; ++k) {
            J_const_.block(k * H_, k * H_, H_, H_) = -grid_.lap();
            J_const_.block(k * H_, (k + 1) * H_, H_, H_) -=
                Eigen::MatrixXd::Identity(H_, H_);
        }
        const int lb = (m_ - 1) * H_;
        J_const_.block(lb + m_, lb, H_ - m_, H_) = -grid_.lap().bottomRows(H_ - m_);
        for (int k = 0; k < m_; ++k) J_const_.row(lb + k).segment(0, H_) = bc_rows_[k];
    }

    const ProblemSpec& spec() const { return spec_; }
    int blocks() const { return m_; }
    int block_size() const { return H_; }
    int size() const { return n_; }

    double u_center(const Eigen::VectorXd& W) const {
        return dot2(u0_row_.data(), W.data(), H_);
    }

    Eigen::VectorXd residual_vec(const Eigen::VectorXd& W, double lambda) const {
        Eigen::VectorXd F(n_);
        for (int k = 0; k + 1 < m_; ++k) {
            F.segment(k * H_, H_) =
                -apply_compensated(grid_.lap(), W.segment(k * H_, H_)) - W.segment((k + 1) * H_, H_);
        }
        const int lb = (m_ - 1) * H_;
        Eigen::VectorXd last = -apply_compensated(grid_.lap(), W.segment(lb, H_));
        for (int i = 0; i < H_; ++i) last[i] -= lambda * std::exp(2.0 * m_ * W[i]);
        for (int k = 0; k < m_; ++k)
            last[k] = dot2(bc_rows_[k].data(), W.data(), H_);
        F.segment(lb, H_) = last;
        return F;
    }

    // Componentwise backward error: each row's residual is measured against
    // the magnitudes actually summed to produce it (|Lap||w| + the block
    // coupling / forcing term).  The differentiation rows span ~1e9 on a
    // sinh-clustered grid, so any fixed global scale either drowns genuine
    // residuals or sits above the evaluation rounding floor; this scaling
    // keeps the achievable floor near machine epsilon at every amplitude.
    double scaled_norm(const Eigen::VectorXd& F, const Eigen::VectorXd& W, double lambda) const {
        double worst = 0.0;
        auto rate = [&](double f, double den) {
            if (f == 0.0) return;
            worst = std::max(worst, std::abs(f) / den);  // den = 0 forces inf; f should be 0 too
        };
        for (int k = 0; k + 1 < m_; ++k) {
            Eigen::VectorXd den = abs_lap_ * W.segment(k * H_, H_).cwiseAbs();
            den += W.segment((k + 1) * H_, H_).cwiseAbs();
            for (int i = 0; i < H_; ++i) rate(F[k * H_ + i], den[i]);
        }
        const int lb = (m_ - 1) * H_;
        Eigen::VectorXd den = abs_lap_ * W.segment(lb, H_).cwiseAbs();
        const double u_scale = W.segment(0, H_).cwiseAbs().maxCoeff();
        for (int i = m_; i < H_; ++i)
            rate(F[lb + i], den[i] + std::abs(lambda) * std::exp(2.0 * m_ * W[i]));
        for (int k = 0; k < m_; ++k) {
            // boundary rows: anchor on the field scale so an exactly-hit
            // boundary value (a single-entry row) is not measured against
            // its own vanishing magnitude
            double s = u_scale * bc_rows_[k].cwiseAbs().maxCoeff();
            for (int j = 0; j < H_; ++j) s += std::abs(bc_rows_[k][j] * W[j]);
            rate(F[lb + k], s);
        }
        return worst;
    }

    // Bordered Newton step on (W, lambda).  The border row closes the system:
    //   fixed lambda:  d lambda = 0
    //   fixed center:  u(0) = target
    //   arclength:     t_u (u(0)-u0_ref) + t_l (lambda-l_ref) = ds
    struct Border {
        enum class Kind { fixed_lambda, fixed_center, arclength } kind;
        double target = 0.0;  // center target
        double t_u = 0.0, t_l = 1.0, u0_ref = 0.0, l_ref = 0.0, ds = 0.0;
    };

    struct Outcome {
        bool converged = false;
        int iterations = 0;
        double residual_norm = std::numeric_limits<double>::infinity();
    };

    Outcome newton(Eigen::VectorXd& W, double& lambda, const Border& border, double tol,
                   int max_iter) const {
        Outcome out;
        double last_update = std::numeric_limits<double>::infinity();
        Eigen::VectorXd F = residual_vec(W, lambda);
        double bres = border_residual(border, W, lambda);
        for (int it = 0; it < max_iter; ++it) {
            const double rnorm = scaled_norm(F, W, lambda);
            if (!std::isfinite(rnorm) || rnorm > 1e12) return out;
            if (it > 0 && last_update < tol && rnorm <= tol && std::abs(bres) <= 10.0 * tol) {
                out.converged = true;
                out.iterations = it;
                out.residual_norm = rnorm;
                return out;
            }
            Eigen::MatrixXd J = J_const_;
            const int lb = (m_ - 1) * H_;
            for (int i = m_; i < H_; ++i) {
                const double e = std::exp(2.0 * m_ * W[i]);
                J(lb + i, i) += -2.0 * m_ * lambda * e;
                J(lb + i, n_) = -e;  // d/d lambda
            }
            switch (border.kind) {
                case Border::Kind::fixed_lambda:
                    J.row(n_).setZero();
                    J(n_, n_) = 1.0;
                    break;
                case Border::Kind::fixed_center:
                case Border::Kind::arclength: {
                    const double coef = border.kind == Border::Kind::fixed_center ? 1.0 : border.t_u;
                    J.row(n_).setZero();
                    J.row(n_).segment(0, H_) = coef * u0_row_;
                    J(n_, n_) = border.kind == Border::Kind::fixed_center ? 0.0 : border.t_l;
                    break;
                }
            }
            Eigen::VectorXd rhs(n_ + 1);
            rhs.segment(0, n_) = -F;
            rhs[n_] = -bres;
            Eigen::VectorXd d = Eigen::PartialPivLU<Eigen::MatrixXd>(J).solve(rhs);
            if (!d.allFinite()) return out;
            W += d.segment(0, n_);
            lambda += d[n_];
            last_update = std::max(d.segment(0, H_).cwiseAbs().maxCoeff(), std::abs(d[n_]));
            F = residual_vec(W, lambda);
            bres = border_residual(border, W, lambda);
            out.iterations = it + 1;
        }
        const double rnorm = scaled_norm(F, W, lambda);
        if (std::isfinite(rnorm)) out.residual_norm = rnorm;
        if (last_update < tol && rnorm <= tol && std::abs(bres) <= 10.0 * tol)
            out.converged = true;
        return out;
    }

    SolutionState make_state(const Eigen::VectorXd& W, double lambda, double residual_norm) const {
        SolutionState s;
        s.u = {spec_.grid, W.segment(0, H_), +1};
        s.lambda = lambda;
        Eigen::VectorXd ex(H_);
        for (int i = 0; i < H_; ++i) ex[i] = std::exp(2.0 * m_ * W[i]);
        const double mass = grid_.ball_integral(ex, grid_.radius());  // int e^{2mu}
        s.sigma = lambda * mass;
        s.rho = s.sigma;
        s.alpha = s.rho > 0.0
                      ? std::log(static_cast<double>(factorial(2 * m_ - 1)) * mass / s.rho) /
                            (2.0 * m_)
                      : 0.0;
        s.u_max = u_center(W);
        s.residual_norm = residual_norm;
        return s;
    }

    // Rebuild the block vector from u alone (checkpoint resume): chain the
    // Laplacian, then let the caller polish with a Newton solve.
    Eigen::VectorXd lift(const Eigen::VectorXd& u) const {
        Eigen::VectorXd W(n_);
        W.segment(0, H_) = u;
        for (int k = 1; k < m_; ++k)
            W.segment(k * H_, H_) = -apply_compensated(grid_.lap(), W.segment((k - 1) * H_, H_));
        return W;
    }

  private:
    double border_residual(const Border& b, const Eigen::VectorXd& W, double lambda) const {
        switch (b.kind) {
            case Border::Kind::fixed_lambda: return 0.0;
            case Border::Kind::fixed_center: return u_center(W) - b.target;
            case Border::Kind::arclength:
                return b.t_u * (u_center(W) - b.u0_ref) + b.t_l * (lambda - b.l_ref) - b.ds;
        }
        return 0.0;
    }

    ProblemSpec spec_;
    const RadialGrid& grid_;
    int m_, H_, n_;
    std::vector<Eigen::RowVectorXd> bc_rows_;
    Eigen::RowVectorXd u0_row_;
    Eigen::MatrixXd J_const_;
    Eigen::MatrixXd abs_lap_;
};

}  // namespace detail

struct NewtonOutcome {
    SolutionState state;
    int iterations = 0;
};

inline NewtonOutcome newton_solve_detailed(const RadialField& guess, double lambda,
                                           const ProblemSpec& spec, double tol,
                                           int max_iter = 25) {
    detail::MixedSystem sys(spec);
    Eigen::VectorXd W = sys.lift(guess.values);
    double lam = lambda;
    detail::MixedSystem::Border border{detail::MixedSystem::Border::Kind::fixed_lambda};
    auto out = sys.newton(W, lam, border, tol, max_iter);
    SolutionState s = sys.make_state(W, lam, out.residual_norm);
    if (!out.converged)
        throw NewtonFailure("newton_solve did not converge", std::move(s), out.iterations);
    return {std::move(s), out.iterations};
}

inline SolutionState newton_solve(const RadialField& guess, double lambda, const ProblemSpec& spec,
                                  double tol, int max_iter = 25) {
    return newton_solve_detailed(guess, lambda, spec, tol, max_iter).state;
}

inline std::pair<RadialField, double> normalize(const SolutionState& s) {
    RadialField u_hat = s.u;
    u_hat.values.array() -= s.alpha;
    return {std::move(u_hat), s.alpha};
}

namespace detail {

// Locate the fold by iterated parabolic refinement on lambda(u0), each probe
// a fixed-center Newton solve seeded from the nearest branch state.
inline void refine_fold(const MixedSystem& sys, Branch& branch,
                        const std::vector<Eigen::VectorXd>& Ws, const TraceLimits& lim) {
    const auto& st = branch.states;
    std::size_t i_max = 0;
    for (std::size_t i = 1; i < st.size(); ++i)
        if (st[i].lambda > st[i_max].lambda) i_max = i;
    if (i_max == 0 || i_max + 1 == st.size()) return;  // no interior fold yet

    Eigen::VectorXd W = Ws[i_max];
    double lam = st[i_max].lambda;
    double center = st[i_max].u_max;
    double h = 0.05;
    auto probe = [&](double u0, double& lam_out) -> bool {
        Eigen::VectorXd Wp = W;
        double lp = lam;
        MixedSystem::Border b{MixedSystem::Border::Kind::fixed_center, u0};
        auto out = sys.newton(Wp, lp, b, lim.newton_tol, lim.newton_max_iter);
        if (!out.converged) return false;
        lam_out = lp;
        return true;
    };
    for (int round = 0; round < 4; ++round) {
        double l_lo, l_mi, l_hi;
        if (!probe(center - h, l_lo) || !probe(center, l_mi) || !probe(center + h, l_hi)) return;
        const double denom = l_lo - 2.0 * l_mi + l_hi;
        if (denom == 0.0) break;
        const double shift = 0.5 * h * (l_lo - l_hi) / denom;
        center += std::clamp(shift, -2.0 * h, 2.0 * h);
        h *= 0.25;
    }
    double l_final;
    if (!probe(center, l_final)) return;
    branch.fold_lambda = l_final;
    branch.fold_u_max = center;
}

}  // namespace detail

// Pseudo-arclength continuation from the exact trivial solution (u=0,
// lambda=0) through the fold toward u(0) = u_max_target.  The arclength plane
// is (u(0), lambda): both stay O(1)..O(10) along the whole branch while the
// full state vector grows like e^{2m u(0)}, which would swamp a full-state
// inner product.  Tangents are unit secants; predictors extrapolate the full
// block state linearly.  The final state is re-solved at exactly the target
// center value, and the fold location/level are refined after the trace.
inline Branch trace_branch(const ProblemSpec& spec, double u_max_target, double step,
                           const TraceLimits& lim = {}) {
    detail::MixedSystem sys(spec);
    const int n = sys.size();
    Branch branch;
    std::vector<Eigen::VectorXd> Ws;

    Eigen::VectorXd W = Eigen::VectorXd::Zero(n);
    double lam = 0.0;
    branch.states.push_back(sys.make_state(W, lam, 0.0));
    branch.arclength.push_back(0.0);
    branch.step_used.push_back(0.0);
    Ws.push_back(W);

    double t_u = 0.0, t_l = 1.0;  // tangent at the trivial solution
    double ds = step;
    double ds_prev = 0.0;
    Eigen::VectorXd W_prev = W;
    double lam_prev = lam;
    branch.termination = Termination::step_limit;

    for (int accepted = 0; accepted < lim.max_steps;) {
        const SolutionState& cur = branch.states.back();

        // If the predictor would cross the target, finish with a
        // fixed-center solve exactly at the target.
        if (t_u > 0.0 && cur.u_max + ds * t_u >= u_max_target) {
            Eigen::VectorXd Wf = W;
            double lf = lam;
            detail::MixedSystem::Border b{detail::MixedSystem::Border::Kind::fixed_center,
                                          u_max_target};
            auto out = sys.newton(Wf, lf, b, lim.newton_tol, lim.newton_max_iter);
            if (out.converged) {
                branch.states.push_back(sys.make_state(Wf, lf, out.residual_norm));
                const double du = branch.states.back().u_max - cur.u_max;
                const double dl = lf - cur.lambda;
                const double d = std::hypot(du, dl);
                branch.arclength.push_back(branch.arclength.back() + d);
                branch.step_used.push_back(std::max(d, ds));
                Ws.push_back(Wf);
                branch.termination = Termination::max_u_reached;
                break;
            }
            // fall through to a normal arclength step if the direct jump failed
        }

        Eigen::VectorXd W_try;
        double lam_try;
        if (ds_prev > 0.0) {
            const double f = ds / ds_prev;
            W_try = W + f * (W - W_prev);
            lam_try = lam + f * (lam - lam_prev);
        } else {
            W_try = W;
            lam_try = lam + ds * t_l;
        }
        detail::MixedSystem::Border b{detail::MixedSystem::Border::Kind::arclength};
        b.t_u = t_u;
        b.t_l = t_l;
        b.u0_ref = cur.u_max;
        b.l_ref = cur.lambda;
        b.ds = ds;
        auto out = sys.newton(W_try, lam_try, b, lim.newton_tol, lim.newton_max_iter);
        if (!out.converged) {
            ds *= 0.5;
            if (ds < lim.step_min) {
                branch.termination = Termination::newton_failure;
                break;
            }
            continue;
        }

        SolutionState next = sys.make_state(W_try, lam_try, out.residual_norm);
        const double du = next.u_max - cur.u_max;
        const double dl = next.lambda - cur.lambda;
        const double norm = std::hypot(du, dl);
        if (norm == 0.0) {
            branch.termination = Termination::newton_failure;
            break;
        }
        // The border plane extends past the local branch segment and can
        // intersect distant solution families (e.g. the small-amplitude
        // lambda < 0 family once lambda crosses zero); a chord much longer
        // than the requested step means the corrector caught one of those.
        // Genuine steps stay below ~2.3 ds even while rounding the fold.
        if (norm > 3.0 * ds) {
            ds *= 0.5;
            if (ds < lim.step_min) {
                branch.termination = Termination::newton_failure;
                break;
            }
            continue;
        }
        t_u = du / norm;
        t_l = dl / norm;
        W_prev = W;
        lam_prev = lam;
        W = W_try;
        lam = lam_try;
        ds_prev = ds;
        branch.states.push_back(std::move(next));
        branch.arclength.push_back(branch.arclength.back() + norm);
        branch.step_used.push_back(ds);
        Ws.push_back(W);
        ++accepted;

        if (branch.states.back().u_max >= u_max_target) {
            branch.termination = Termination::max_u_reached;
            break;
        }
        if (out.iterations <= 4) ds = std::min(ds * 1.3, lim.step_max);
    }

    detail::refine_fold(sys, branch, Ws, lim);
    return branch;
}

}  // namespace mfb
