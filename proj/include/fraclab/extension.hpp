#pragma once

// s-harmonic extension on the truncated cylinder Ω × (0, Y] with weight
// y^{1−2s}.
//
// The y direction uses graded levels y_i = Y (i/M)^β, i = 0..M, with the cell
// averages w_i of y^{1−2s} over [y_i, y_{i+1}]. In x the scheme reuses the
// mixed stiffness K and the trapezoid mass W on free base nodes, so Σ_D × (0,Y)
// is Dirichlet and Σ_N × (0,Y) is Neumann by construction. With
//   c_i = w_i / h_i,   m_i = (h_{i−1} w_{i−1} + h_i w_i) / 2,
// the discrete energy is
//   κ_s [ Σ_i c_i |U_{i+1} − U_i|²_W + Σ_i m_i U_iᵀ K U_i ],
// level M is held at zero and the Euler–Lagrange system is solved by
// Jacobi-preconditioned conjugate gradients.

#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "fraclab/domain.hpp"
#include "fraclab/error.hpp"
#include "fraclab/fractional.hpp"
#include "fraclab/operator.hpp"

namespace fraclab {

class CylinderMesh {
public:
    CylinderMesh(LaplacianPtr op, double s, double height, int levels, double beta)
        : op_(std::move(op)), s_(s), height_(height), levels_(levels), beta_(beta) {
        if (!(s > 0.0 && s < 1.0)) throw ConfigError("build_cylinder: s must lie in (0, 1)");
        if (!(height > 0.0) || !std::isfinite(height)) throw ConfigError("build_cylinder: Y must be positive");
        if (levels < 4) throw ConfigError("build_cylinder: need at least 4 levels");
        if (!(beta >= 1.0)) throw ConfigError("build_cylinder: grading exponent must be >= 1");

        y_.resize(levels + 1);
        for (int i = 0; i <= levels; ++i) y_[i] = height * std::pow(static_cast<double>(i) / levels, beta);
        y_[levels] = height;

        const double e = 2.0 - 2.0 * s;
        h_.resize(levels);
        w_.resize(levels);
        for (int i = 0; i < levels; ++i) {
            h_[i] = y_[i + 1] - y_[i];
            if (!(h_[i] > 0.0)) throw ConfigError("build_cylinder: levels are not strictly increasing");
            w_[i] = (std::pow(y_[i + 1], e) - std::pow(y_[i], e)) / (e * h_[i]);
        }
        c_ = w_.cwiseQuotient(h_);
        m_ = Eigen::VectorXd::Zero(levels + 1);
        for (int i = 0; i < levels; ++i) {
            m_[i] += 0.5 * h_[i] * w_[i];
            m_[i + 1] += 0.5 * h_[i] * w_[i];
        }
    }

    [[nodiscard]] const MixedLaplacian& op() const { return *op_; }
    [[nodiscard]] const LaplacianPtr& op_ptr() const { return op_; }
    [[nodiscard]] const GridPtr& base() const { return op_->grid_ptr(); }
    [[nodiscard]] double s() const { return s_; }
    [[nodiscard]] double height() const { return height_; }
    [[nodiscard]] int levels() const { return levels_; }
    [[nodiscard]] double beta() const { return beta_; }
    /// y_0 = 0 < … < y_M = Y.
    [[nodiscard]] const Eigen::VectorXd& y() const { return y_; }
    /// Cell widths h_i = y_{i+1} − y_i.
    [[nodiscard]] const Eigen::VectorXd& widths() const { return h_; }
    /// Cell averages of y^{1−2s}.
    [[nodiscard]] const Eigen::VectorXd& cell_weights() const { return w_; }
    /// Vertical couplings w_i / h_i.
    [[nodiscard]] const Eigen::VectorXd& couplings() const { return c_; }
    /// Lumped weighted level masses.
    [[nodiscard]] const Eigen::VectorXd& level_masses() const { return m_; }
    [[nodiscard]] double kappa_s() const { return kappa(s_); }

private:
    LaplacianPtr op_;
    double s_, height_;
    int levels_;
    double beta_;
    Eigen::VectorXd y_, h_, w_, c_, m_;
};

using CylinderPtr = std::shared_ptr<const CylinderMesh>;

inline CylinderPtr build_cylinder(LaplacianPtr op, double s, double height, int levels, double beta) {
    return std::make_shared<const CylinderMesh>(std::move(op), s, height, levels, beta);
}

/// Defaults: Y = 6/√λ₁ and β = 3/(2s).
inline CylinderPtr build_cylinder(const SpectralBasis& basis, double s, int levels = 32,
                                  std::optional<double> height = {}, std::optional<double> beta = {}) {
    return build_cylinder(basis.op_ptr(), s, height.value_or(6.0 / std::sqrt(basis.lambda1())), levels,
                          beta.value_or(3.0 / (2.0 * s)));
}

/// Nodal values on free base nodes × levels 0..M (column M is zero).
struct ExtensionField {
    CylinderPtr mesh;
    Eigen::MatrixXd values;
    int cg_iterations = 0;
    double cg_residual = 0.0;

    [[nodiscard]] GridFunction level(int i) const { return mesh->op().prolong(values.col(i)); }
    [[nodiscard]] GridFunction trace() const { return level(0); }

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open " + path);
        os.precision(12);
        os << "x,y,level,U\n";
        const Grid& g = mesh->op().grid();
        for (int i = 0; i <= mesh->levels(); ++i) {
            const GridFunction f = level(i);
            for (int k = 0; k < g.size(); ++k) {
                const Point p = g.coords(k);
                os << p[0] << ',' << (g.dim() == 2 ? p[1] : 0.0) << ',' << mesh->y()[i] << ',' << f[k] << '\n';
            }
        }
    }
};

struct CgOptions {
    double tol = 1e-10;
    int max_iterations = 20000;
};

namespace detail {

/// Levels first..M−1 of the Euler–Lagrange system (without κ_s).
class CylinderSystem {
public:
    CylinderSystem(const CylinderMesh& mesh, int first) : mesh_(mesh), first_(first) {
        const auto& op = mesh.op();
        const int nl = mesh.levels() - first;
        const Eigen::VectorXd kd = op.stiffness().diagonal();
        diag_.resize(op.free_count(), nl);
        for (int l = 0; l < nl; ++l) {
            const int i = l + first;
            const double cc = (i > 0 ? mesh.couplings()[i - 1] : 0.0) + mesh.couplings()[i];
            diag_.col(l) = cc * op.mass() + mesh.level_masses()[i] * kd;
        }
    }

    [[nodiscard]] int rows() const { return static_cast<int>(diag_.rows()); }
    [[nodiscard]] int cols() const { return static_cast<int>(diag_.cols()); }
    [[nodiscard]] const Eigen::MatrixXd& diagonal() const { return diag_; }

    void apply(const Eigen::MatrixXd& u, Eigen::MatrixXd& out) const {
        const auto& op = mesh_.op();
        const Eigen::VectorXd& wm = op.mass();
        const Eigen::VectorXd& c = mesh_.couplings();
        const Eigen::VectorXd& m = mesh_.level_masses();
        out.noalias() = op.stiffness() * u;
        const int nl = cols();
        for (int l = 0; l < nl; ++l) {
            const int i = l + first_;
            out.col(l) *= m[i];
            Eigen::VectorXd acc = (c[i] + (i > 0 ? c[i - 1] : 0.0)) * u.col(l);
            if (l > 0) acc -= c[i - 1] * u.col(l - 1);
            if (l + 1 < nl) acc -= c[i] * u.col(l + 1);
            out.col(l) += wm.cwiseProduct(acc);
        }
    }

private:
    const CylinderMesh& mesh_;
    int first_;
    Eigen::MatrixXd diag_;
};

inline Eigen::MatrixXd pcg(const CylinderSystem& a, const Eigen::MatrixXd& b, const CgOptions& opt, int& iters,
                           double& relres) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(b.rows(), b.cols());
    const double bnorm = b.norm();
    iters = 0;
    relres = 0.0;
    if (bnorm == 0.0) return x;
    const Eigen::MatrixXd inv = a.diagonal().cwiseInverse();
    Eigen::MatrixXd r = b;
    Eigen::MatrixXd z = r.cwiseProduct(inv);
    Eigen::MatrixXd p = z;
    Eigen::MatrixXd ap(b.rows(), b.cols());
    double rz = (r.array() * z.array()).sum();
    for (int it = 1; it <= opt.max_iterations; ++it) {
        a.apply(p, ap);
        const double alpha = rz / (p.array() * ap.array()).sum();
        x += alpha * p;
        r -= alpha * ap;
        relres = r.norm() / bnorm;
        iters = it;
        if (!std::isfinite(relres)) throw NumericalError("extension: CG breakdown", relres, it);
        if (relres <= opt.tol) return x;
        z = r.cwiseProduct(inv);
        const double rz_new = (r.array() * z.array()).sum();
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    throw NumericalError("extension: CG did not reach the residual target", relres, iters);
}

}  // namespace detail

/// U with U(·,0) = u, lateral data from the partition, U = 0 at y = Y.
inline ExtensionField extend_dirichlet(const CylinderPtr& mesh, const GridFunction& u, const CgOptions& opt = {}) {
    const auto& op = mesh->op();
    const Eigen::VectorXd u0 = op.restrict(u);
    for (int k = 0; k < u.grid->size(); ++k) {
        if (op.grid_to_free()[k] < 0 && std::abs(u[k]) > 1e-12 * std::max(1.0, u.max_abs())) {
            throw PreconditionError("extend_dirichlet: data must vanish on the Dirichlet boundary");
        }
    }
    ExtensionField out{mesh, Eigen::MatrixXd::Zero(op.free_count(), mesh->levels() + 1)};
    out.values.col(0) = u0;
    detail::CylinderSystem sys(*mesh, 1);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sys.rows(), sys.cols());
    rhs.col(0) = mesh->couplings()[0] * op.mass().cwiseProduct(u0);
    out.values.middleCols(1, sys.cols()) = detail::pcg(sys, rhs, opt, out.cg_iterations, out.cg_residual);
    return out;
}

/// U with conormal derivative f at y = 0: the y = 0 row is
/// κ_s [c₀ W (U₀ − U₁) + m₀ K U₀] = W f.
inline ExtensionField extend_neumann(const CylinderPtr& mesh, const GridFunction& f, const CgOptions& opt = {}) {
    if (!f.finite()) throw PreconditionError("extend_neumann: source must be finite");
    const auto& op = mesh->op();
    ExtensionField out{mesh, Eigen::MatrixXd::Zero(op.free_count(), mesh->levels() + 1)};
    detail::CylinderSystem sys(*mesh, 0);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sys.rows(), sys.cols());
    rhs.col(0) = op.mass().cwiseProduct(op.restrict(f)) / mesh->kappa_s();
    out.values.leftCols(sys.cols()) = detail::pcg(sys, rhs, opt, out.cg_iterations, out.cg_residual);
    return out;
}

/// −κ_s w₀ (U(·,y₁) − U(·,0)) / y₁.
inline GridFunction conormal_flux(const ExtensionField& u) {
    const auto& m = *u.mesh;
    const Eigen::VectorXd d = (u.values.col(0) - u.values.col(1)) * (m.kappa_s() * m.cell_weights()[0] / m.y()[1]);
    return m.op().prolong(d);
}

/// κ_s ∫ y^{1−2s} |∇U|², per cell with exact weight integrals.
inline double energy(const ExtensionField& u) {
    const auto& m = *u.mesh;
    const auto& op = m.op();
    double e = 0.0;
    for (int i = 0; i < m.levels(); ++i) {
        const Eigen::VectorXd d = u.values.col(i + 1) - u.values.col(i);
        e += m.couplings()[i] * d.cwiseProduct(d).dot(op.mass());
    }
    for (int i = 0; i <= m.levels(); ++i) {
        if (m.level_masses()[i] == 0.0) continue;
        e += m.level_masses()[i] * u.values.col(i).dot(op.stiffness() * u.values.col(i));
    }
    return m.kappa_s() * e;
}

/// ∫ y^{1−2s} ρ² |∇φ|² with the same edge quadrature as the energy; ρ and φ
/// live on the same cylinder and the nodal ρ² is averaged along each edge.
inline double weighted_gradient_integral(const ExtensionField& rho, const ExtensionField& phi) {
    const auto& m = *phi.mesh;
    const auto& op = m.op();
    const Eigen::MatrixXd r2 = rho.values.cwiseProduct(rho.values);
    double e = 0.0;
    for (int i = 0; i < m.levels(); ++i) {
        const Eigen::VectorXd d = phi.values.col(i + 1) - phi.values.col(i);
        const Eigen::VectorXd avg = 0.5 * (r2.col(i) + r2.col(i + 1));
        e += m.couplings()[i] * d.cwiseProduct(d).cwiseProduct(avg).dot(op.mass());
    }
    for (int i = 0; i <= m.levels(); ++i) {
        const double mi = m.level_masses()[i];
        if (mi == 0.0) continue;
        double level = 0.0;
        for (const Edge& ed : op.edges()) {
            const double pa = phi.values(ed.a, i);
            const double pb = ed.b >= 0 ? phi.values(ed.b, i) : 0.0;
            const double ra = r2(ed.a, i);
            const double rb = ed.b >= 0 ? r2(ed.b, i) : 0.0;
            level += ed.weight * (pa - pb) * (pa - pb) * 0.5 * (ra + rb);
        }
        e += mi * level;
    }
    return e;
}

}  // namespace fraclab
