#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mfb/constants.hpp"
#include "mfb/numerics.hpp"

namespace mfb {

// Radial collocation grid on (0, R] for even functions of r in R^{2m}.
//
// Construction: Chebyshev extrema of odd degree N_c = 2H-1 on [-1,1] in a
// computational coordinate s, mapped through r = phi(s), phi(s) =
// R sinh(kappa s)/sinh(kappa) (kappa = 0 means the identity map r = R s).
// Radial profiles of smooth functions on the ball are even in s, so the grid
// keeps only the H positive-s nodes and folds the differentiation matrix by
// parity.  There is no node at r = 0 (odd degree), which sidesteps the
// coordinate singularity of the radial Laplacian; r = R is node 0.
//
// The sinh map concentrates nodes near the origin, where solutions close to
// blow-up vary on scales ~1e-6 R; kappa ~ 8 resolves that with H ~ 100.
class RadialGrid {
  public:
    RadialGrid(Dimension dim, int node_count, double radius, double kappa)
        : dim_(dim), H_(node_count), R_(radius), kappa_(kappa) {
        if (H_ < 8) throw std::invalid_argument("RadialGrid: node_count too small");
        if (R_ <= 0.0) throw std::invalid_argument("RadialGrid: radius must be positive");
        if (kappa_ < 0.0) throw std::invalid_argument("RadialGrid: kappa must be >= 0");
        build();
    }

    const Dimension& dim() const { return dim_; }
    int size() const { return H_; }
    double radius() const { return R_; }
    double kappa() const { return kappa_; }
    const Eigen::VectorXd& r() const { return r_; }
    const Eigen::VectorXd& quad_weights() const { return w_node_; }
    const RowMatrix& d_even() const { return Dr_even_; }
    const RowMatrix& d_odd() const { return Dr_odd_; }
    const RowMatrix& lap() const { return Lap_; }

    double phi(double s) const {
        if (kappa_ == 0.0) return R_ * s;
        return R_ * std::sinh(kappa_ * s) / std::sinh(kappa_);
    }
    double phi_prime(double s) const {
        if (kappa_ == 0.0) return R_;
        return R_ * kappa_ * std::cosh(kappa_ * s) / std::sinh(kappa_);
    }
    double s_of_r(double rr) const {
        if (rr < 0.0) throw std::invalid_argument("s_of_r: negative radius");
        if (kappa_ == 0.0) return rr / R_;
        return std::asinh(rr / R_ * std::sinh(kappa_)) / kappa_;
    }

    // Barycentric interpolation row in the s coordinate, folded by parity:
    // dot(row, f_half) reproduces the degree-N_c interpolant of the
    // even (parity=+1) or odd (parity=-1) extension of f.
    Eigen::RowVectorXd interp_row_s(double s, int parity) const {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(H_);
        const int n_full = 2 * H_;
        // exact hits first (avoids 0/0)
        for (int j = 0; j < n_full; ++j) {
            if (s == s_full_[j] || std::abs(s - s_full_[j]) < 1e-15 * (1.0 + std::abs(s))) {
                if (j < H_)
                    row[j] = 1.0;
                else
                    row[n_full - 1 - j] = static_cast<double>(parity);
                return row;
            }
        }
        double denom = 0.0;
        std::vector<double> lam(n_full);
        for (int j = 0; j < n_full; ++j) {
            lam[j] = bary_w_[j] / (s - s_full_[j]);
            denom += lam[j];
        }
        for (int j = 0; j < H_; ++j)
            row[j] = (lam[j] + parity * lam[n_full - 1 - j]) / denom;
        return row;
    }

    Eigen::RowVectorXd interp_row(double rr, int parity) const {
        return interp_row_s(s_of_r(rr), parity);
    }

    // Row recovering the k-th radial derivative at r = R (node 0).
    Eigen::RowVectorXd boundary_derivative_row(int k) const {
        if (k == 0) {
            Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(H_);
            e[0] = 1.0;
            return e;
        }
        RowMatrix P = Dr_even_;
        int parity = -1;  // current output parity
        for (int j = 1; j < k; ++j) {
            P = (parity < 0 ? Dr_odd_ : Dr_even_) * P;
            parity = -parity;
        }
        return P.row(0);
    }

    // integral over the ball of radius r_max of f(|x|) dx, f given at nodes
    // (interpolated where needed).  Full-ball integrals use the exact nodal
    // weights; partial balls integrate the interpolant with Gauss-Legendre
    // in the s coordinate.
    double ball_integral(const Eigen::VectorXd& f, double r_max) const {
        check_field(f);
        const double area = sphere_area(2 * dim_.m - 1);
        if (r_max >= R_ * (1.0 - 1e-12))
            return area * dot2(w_node_.data(), f.data(), H_);
        const double s_max = s_of_r(r_max);
        const QuadratureRule rule = gauss_legendre(200, 0.0, s_max);
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double s = rule.nodes[i];
            const double fx = interp_row_s(s, +1).dot(f);
            const double rr = phi(s);
            acc += rule.weights[i] * fx * std::pow(rr, 2 * dim_.m - 1) * phi_prime(s);
        }
        return area * acc;
    }

    // integral over the sphere of radius rr of f(|x|) dS
    double sphere_integral(const Eigen::VectorXd& f, double rr, int parity = +1) const {
        check_field(f);
        const double fx = interp_row(rr, parity).dot(f);
        return sphere_area(2 * dim_.m - 1) * std::pow(rr, 2 * dim_.m - 1) * fx;
    }

    Eigen::VectorXd laplacian(const Eigen::VectorXd& f) const {
        check_field(f);
        return apply_compensated(Lap_, f);
    }

    // (-Delta)^p f for an even field f
    Eigen::VectorXd polyharmonic(const Eigen::VectorXd& f, int p) const {
        check_field(f);
        Eigen::VectorXd g = f;
        for (int k = 0; k < p; ++k) g = apply_compensated(Lap_, g);
        if (p % 2 == 1) g = -g;
        return g;
    }

    // Delta^{j/2} f in the radial representation: even j gives Delta^{j/2} f,
    // odd j gives d/dr Delta^{(j-1)/2} f.  Returns the nodal values and sets
    // parity to +1 (even j) or -1 (odd j).
    Eigen::VectorXd half_power(const Eigen::VectorXd& f, int j, int* parity_out = nullptr) const {
        check_field(f);
        Eigen::VectorXd g = f;
        for (int k = 0; k < j / 2; ++k) g = apply_compensated(Lap_, g);
        int parity = +1;
        if (j % 2 == 1) {
            g = apply_compensated(Dr_even_, g);
            parity = -1;
        }
        if (parity_out) *parity_out = parity;
        return g;
    }

  private:
    void check_field(const Eigen::VectorXd& f) const {
        if (f.size() != H_) throw std::invalid_argument("RadialGrid: field size mismatch");
    }

    void build() {
        const int Nc = 2 * H_ - 1;        // polynomial degree
        const int n_full = Nc + 1;        // number of extrema
        s_full_.resize(n_full);
        for (int j = 0; j < n_full; ++j) s_full_[j] = std::cos(j * pi / Nc);

        // full differentiation matrix with the negative-sum trick
        RowMatrix D(n_full, n_full);
        std::vector<double> c(n_full, 1.0);
        c[0] = c[n_full - 1] = 2.0;
        for (int j = 0; j < n_full; ++j)
            if (j % 2 == 1) c[j] = -c[j];
        for (int i = 0; i < n_full; ++i) {
            for (int j = 0; j < n_full; ++j) {
                if (i == j) continue;
                D(i, j) = (c[i] / c[j]) / (s_full_[i] - s_full_[j]);
            }
        }
        for (int i = 0; i < n_full; ++i) {
            double rowsum = 0.0;
            for (int j = 0; j < n_full; ++j)
                if (j != i) rowsum += D(i, j);
            D(i, i) = -rowsum;
        }

        // barycentric weights for the extrema grid
        bary_w_.resize(n_full);
        for (int j = 0; j < n_full; ++j) {
            bary_w_[j] = (j % 2 == 0) ? 1.0 : -1.0;
            if (j == 0 || j == n_full - 1) bary_w_[j] *= 0.5;
        }

        // fold: columns j and Nc - j pair up under s -> -s
        RowMatrix D_plus(H_, H_), D_minus(H_, H_);
        for (int i = 0; i < H_; ++i) {
            for (int j = 0; j < H_; ++j) {
                D_plus(i, j) = D(i, j) + D(i, Nc - j);
                D_minus(i, j) = D(i, j) - D(i, Nc - j);
            }
        }

        r_.resize(H_);
        Eigen::VectorXd inv_phi_p(H_);
        for (int j = 0; j < H_; ++j) {
            r_[j] = phi(s_full_[j]);
            inv_phi_p[j] = 1.0 / phi_prime(s_full_[j]);
        }

        Dr_even_ = inv_phi_p.asDiagonal() * D_plus;   // even field -> d/dr (odd)
        Dr_odd_ = inv_phi_p.asDiagonal() * D_minus;   // odd field -> d/dr (even)

        const double nm1 = 2.0 * dim_.m - 1.0;
        Eigen::VectorXd inv_r = r_.cwiseInverse() * nm1;
        Lap_ = Dr_odd_ * Dr_even_;
        Lap_ += RowMatrix(inv_r.asDiagonal() * Dr_even_);

        build_quadrature(Nc);
    }

    // Exact weights for \int_0^R f(r) r^{2m-1} dr on the interpolant:
    // transform to s, extend the integrand (odd in s), expand in Chebyshev
    // polynomials and integrate T_k over [0,1] in closed form.
    void build_quadrature(int Nc) {
        const int n_full = Nc + 1;

        // M_k = int_0^1 T_k(s) ds
        std::vector<double> M(n_full);
        M[0] = 1.0;
        M[1] = 0.5;
        auto T_at0 = [](int k) -> double {
            if (k % 2 == 1) return 0.0;
            return (k % 4 == 0) ? 1.0 : -1.0;
        };
        for (int k = 2; k < n_full; ++k) {
            const double up = (1.0 - T_at0(k + 1)) / (k + 1);
            const double dn = (1.0 - T_at0(k - 1)) / (k - 1);
            M[k] = 0.5 * (up - dn);
        }

        // nu_j = sum_k C(k,j) M_k with C the coefficient transform
        std::vector<double> cbar(n_full, 1.0);
        cbar[0] = cbar[n_full - 1] = 2.0;
        std::vector<double> nu(n_full, 0.0);
        for (int j = 0; j < n_full; ++j) {
            double acc = 0.0, comp = 0.0;
            for (int k = 0; k < n_full; ++k) {
                const double Ckj =
                    2.0 / (Nc * cbar[k] * cbar[j]) * std::cos(k * j * pi / Nc);
                double t, e;
                two_sum(acc, Ckj * M[k], t, e);
                acc = t;
                comp += e;
            }
            nu[j] = acc + comp;
        }

        w_node_.resize(H_);
        for (int j = 0; j < H_; ++j) {
            const double s = s_full_[j];
            const double wj = nu[j] - nu[Nc - j];  // odd extension of the integrand
            w_node_[j] = wj * std::pow(phi(s), 2 * dim_.m - 1) * phi_prime(s);
        }
    }

    Dimension dim_;
    int H_;
    double R_;
    double kappa_;
    std::vector<double> s_full_;
    std::vector<double> bary_w_;
    Eigen::VectorXd r_;
    Eigen::VectorXd w_node_;
    RowMatrix Dr_even_, Dr_odd_, Lap_;
};

// A field sampled on a radial grid, with the parity of its extension in s.
struct RadialField {
    std::shared_ptr<const RadialGrid> grid;
    Eigen::VectorXd values;
    int parity = +1;

    double eval(double rr) const { return grid->interp_row(rr, parity).dot(values); }
    double eval_s(double s) const { return grid->interp_row_s(s, parity).dot(values); }
};

}  // namespace mfb
