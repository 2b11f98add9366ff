#pragma once

// Second-order finite-difference Laplacian with mixed Dirichlet/Neumann data
// and its eigendecomposition.
//
// The operator is assembled from edges: every grid edge with at least one
// non-Dirichlet endpoint carries the weight (dual face measure)/(edge length)
// built from the trapezoid weights. With M the diagonal trapezoid mass on
// free nodes, K the edge stiffness and A = M⁻¹K:
//   * interior rows of A are the 3/5-point stencil,
//   * Neumann rows of A coincide with ghost-point reflection,
//   * Dirichlet nodes are eliminated.
// K is symmetric, so A is self-adjoint in the M inner product and
// S = M^{-1/2} K M^{-1/2} is the symmetric matrix whose eigenvectors give the
// L²(Ω)-orthonormal basis φ_j = M^{-1/2} ψ_j.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fraclab/domain.hpp"
#include "fraclab/error.hpp"
#include "fraclab/lanczos.hpp"

namespace fraclab {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct Edge {
    int a;         // free index
    int b;         // free index, or -1 when the neighbour is a Dirichlet node
    double weight;
};

class MixedLaplacian {
public:
    explicit MixedLaplacian(BoundaryPartition partition) : partition_(std::move(partition)) {
        const Grid& g = grid();
        if (partition_.count(NodeLabel::dirichlet) == 0) {
            throw PreconditionError("assemble: no Dirichlet nodes, the mixed Laplacian would be singular");
        }
        grid_to_free_.assign(g.size(), -1);
        for (int idx = 0; idx < g.size(); ++idx) {
            if (partition_.label(idx) != NodeLabel::dirichlet) {
                grid_to_free_[idx] = static_cast<int>(free_to_grid_.size());
                free_to_grid_.push_back(idx);
            }
        }
        const int nf = free_count();
        mass_.resize(nf);
        for (int f = 0; f < nf; ++f) mass_[f] = g.quad_weights()[free_to_grid_[f]];

        auto add_edge = [&](int p, int q, double w) {
            const int fp = grid_to_free_[p], fq = grid_to_free_[q];
            if (fp < 0 && fq < 0) return;
            if (fp < 0) edges_.push_back({fq, -1, w});
            else edges_.push_back({fp, fq, w});
        };
        const Eigen::VectorXd& wx = g.axis_weights(0);
        const Eigen::VectorXd& wy = g.axis_weights(1);
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i + 1 < g.nx(); ++i) add_edge(g.index(i, j), g.index(i + 1, j), wy[j] / g.hx());
        if (g.dim() == 2) {
            for (int j = 0; j + 1 < g.ny(); ++j)
                for (int i = 0; i < g.nx(); ++i) add_edge(g.index(i, j), g.index(i, j + 1), wx[i] / g.hy());
        }

        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(edges_.size() * 4);
        for (const Edge& e : edges_) {
            trip.emplace_back(e.a, e.a, e.weight);
            if (e.b >= 0) {
                trip.emplace_back(e.b, e.b, e.weight);
                trip.emplace_back(e.a, e.b, -e.weight);
                trip.emplace_back(e.b, e.a, -e.weight);
            }
        }
        stiffness_.resize(nf, nf);
        stiffness_.setFromTriplets(trip.begin(), trip.end());
        stiffness_.makeCompressed();

        const Eigen::VectorXd inv_sqrt = mass_.cwiseSqrt().cwiseInverse();
        matrix_ = inv_sqrt.asDiagonal() * stiffness_ * inv_sqrt.asDiagonal();
        matrix_.makeCompressed();
    }

    [[nodiscard]] const BoundaryPartition& partition() const { return partition_; }
    [[nodiscard]] const Grid& grid() const { return *partition_.grid(); }
    [[nodiscard]] const GridPtr& grid_ptr() const { return partition_.grid(); }
    [[nodiscard]] int free_count() const { return static_cast<int>(free_to_grid_.size()); }
    [[nodiscard]] const std::vector<int>& free_to_grid() const { return free_to_grid_; }
    [[nodiscard]] const std::vector<int>& grid_to_free() const { return grid_to_free_; }
    [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }

    /// Trapezoid weights restricted to free nodes.
    [[nodiscard]] const Eigen::VectorXd& mass() const { return mass_; }
    /// Edge stiffness K (symmetric, units 1/length² × measure).
    [[nodiscard]] const SparseMatrix& stiffness() const { return stiffness_; }
    /// Symmetric operator S = M^{-1/2} K M^{-1/2} (units 1/length²).
    [[nodiscard]] const SparseMatrix& matrix() const { return matrix_; }

    /// A u = M⁻¹ K u on free-node vectors (the stencil application).
    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& u_free) const {
        return (stiffness_ * u_free).cwiseQuotient(mass_);
    }

    [[nodiscard]] Eigen::VectorXd restrict(const GridFunction& u) const {
        Eigen::VectorXd out(free_count());
        for (int f = 0; f < free_count(); ++f) out[f] = u.values[free_to_grid_[f]];
        return out;
    }
    [[nodiscard]] GridFunction prolong(const Eigen::VectorXd& u_free) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(grid().size());
        for (int f = 0; f < free_count(); ++f) v[free_to_grid_[f]] = u_free[f];
        return {grid_ptr(), std::move(v)};
    }

    /// True when Σ_D is a union of whole faces, so A = A_x ⊗ I + I ⊗ A_y.
    [[nodiscard]] bool separable() const {
        for (const auto& s : partition_.segments())
            if (s.begin != 0.0 || s.end != 1.0) return false;
        return true;
    }
    [[nodiscard]] bool face_dirichlet(Face f) const {
        for (const auto& s : partition_.segments())
            if (s.face == f && s.begin == 0.0 && s.end == 1.0) return true;
        return false;
    }

private:
    BoundaryPartition partition_;
    std::vector<int> free_to_grid_;
    std::vector<int> grid_to_free_;
    std::vector<Edge> edges_;
    Eigen::VectorXd mass_;
    SparseMatrix stiffness_;
    SparseMatrix matrix_;
};

using LaplacianPtr = std::shared_ptr<const MixedLaplacian>;

inline LaplacianPtr assemble(const BoundaryPartition& partition) {
    if (!(partition.alpha() > 0.0)) throw PreconditionError("assemble: alpha = 0 gives a singular operator");
    return std::make_shared<const MixedLaplacian>(partition);
}

/// Direct sparse solve of A u = f (the s = 1 problem).
inline GridFunction solve_direct(const MixedLaplacian& op, const GridFunction& f) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(op.stiffness());
    if (ldlt.info() != Eigen::Success) throw NumericalError("solve_direct: factorization failed");
    Eigen::VectorXd rhs = op.restrict(f).cwiseProduct(op.mass());
    Eigen::VectorXd u = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success) throw NumericalError("solve_direct: solve failed");
    return op.prolong(u);
}

namespace detail {

/// One-dimensional factor of a separable operator: eigenpairs of the axis
/// operator with M-orthonormal vectors.
struct AxisFactor {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // free-axis-nodes × modes
    Eigen::VectorXd residuals;
};

inline AxisFactor axis_factor(int n, double h, const Eigen::VectorXd& w, bool dir_lo, bool dir_hi) {
    std::vector<int> free;
    for (int i = 0; i < n; ++i)
        if (!((i == 0 && dir_lo) || (i == n - 1 && dir_hi))) free.push_back(i);
    const int nf = static_cast<int>(free.size());
    std::vector<int> map(n, -1);
    for (int f = 0; f < nf; ++f) map[free[f]] = f;

    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nf, nf);
    for (int i = 0; i + 1 < n; ++i) {
        const int a = map[i], b = map[i + 1];
        const double we = 1.0 / h;
        if (a >= 0) k(a, a) += we;
        if (b >= 0) k(b, b) += we;
        if (a >= 0 && b >= 0) {
            k(a, b) -= we;
            k(b, a) -= we;
        }
    }
    Eigen::VectorXd m(nf);
    for (int f = 0; f < nf; ++f) m[f] = w[free[f]];
    const Eigen::VectorXd is = m.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd s = is.asDiagonal() * k * is.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecompose: axis eigensolver failed");

    AxisFactor out;
    out.values = es.eigenvalues();
    out.vectors = is.asDiagonal() * es.eigenvectors();
    out.residuals.resize(nf);
    for (int j = 0; j < nf; ++j) {
        const Eigen::VectorXd r = (k * out.vectors.col(j)).cwiseQuotient(m) - out.values[j] * out.vectors.col(j);
        out.residuals[j] = std::sqrt(r.cwiseProduct(r).dot(m));
    }
    return out;
}

}  // namespace detail

struct EigenOptions {
    /// Number of retained modes; empty means the full basis.
    std::optional<int> modes;
    /// Non-separable problems up to this many free nodes use a dense solver.
    int dense_limit = 3000;
    LanczosOptions lanczos{};
};

/// Eigenpairs (φ_j, λ_j) of the mixed Laplacian, λ ascending, φ_j orthonormal
/// in the trapezoid L²(Ω) inner product. Either dense (columns stored) or a
/// tensor product of two axis factors.
class SpectralBasis {
public:
    struct Dense {
        Eigen::MatrixXd vectors;  // free × k
    };
    struct Tensor {
        detail::AxisFactor x, y;
        std::vector<int> order;  // ascending position -> flat (i + nx_modes * j)
        std::vector<int> rank;   // flat -> ascending position
    };

    SpectralBasis(LaplacianPtr op, Eigen::VectorXd values, Dense d)
        : op_(std::move(op)), values_(std::move(values)), rep_(std::move(d)) {}
    SpectralBasis(LaplacianPtr op, Eigen::VectorXd values, Tensor t)
        : op_(std::move(op)), values_(std::move(values)), rep_(std::move(t)) {}

    [[nodiscard]] const MixedLaplacian& op() const { return *op_; }
    [[nodiscard]] const LaplacianPtr& op_ptr() const { return op_; }
    [[nodiscard]] const GridPtr& grid() const { return op_->grid_ptr(); }
    [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return values_; }
    [[nodiscard]] int count() const { return static_cast<int>(values_.size()); }
    [[nodiscard]] bool full() const { return count() == op_->free_count(); }
    [[nodiscard]] double lambda1() const { return values_[0]; }
    [[nodiscard]] bool is_tensor() const { return std::holds_alternative<Tensor>(rep_); }

    /// ⟨u, φ_j⟩ for all retained modes, ascending λ order.
    [[nodiscard]] Eigen::VectorXd coefficients(const GridFunction& u) const {
        const Eigen::VectorXd mu = op_->restrict(u).cwiseProduct(op_->mass());
        if (const auto* d = std::get_if<Dense>(&rep_)) return d->vectors.transpose() * mu;
        const auto& t = std::get<Tensor>(rep_);
        const Eigen::MatrixXd c = tensor_analysis(t, mu);
        Eigen::VectorXd out(count());
        for (int p = 0; p < count(); ++p) out[p] = c.data()[t.order[p]];
        return out;
    }

    /// Σ c_j φ_j.
    [[nodiscard]] GridFunction synthesize(const Eigen::VectorXd& c) const {
        if (c.size() != count()) throw PreconditionError("synthesize: coefficient count mismatch");
        if (const auto* d = std::get_if<Dense>(&rep_)) return op_->prolong(d->vectors * c);
        const auto& t = std::get<Tensor>(rep_);
        Eigen::MatrixXd cm = Eigen::MatrixXd::Zero(t.x.values.size(), t.y.values.size());
        for (int p = 0; p < count(); ++p) cm.data()[t.order[p]] = c[p];
        return op_->prolong(tensor_synthesis(t, cm));
    }

    /// Σ fn(λ_j) ⟨u, φ_j⟩ φ_j.
    template <class Fn>
    [[nodiscard]] GridFunction spectral_map(const GridFunction& u, Fn&& fn) const {
        if (const auto* t = std::get_if<Tensor>(&rep_)) {
            const Eigen::VectorXd mu = op_->restrict(u).cwiseProduct(op_->mass());
            Eigen::MatrixXd c = tensor_analysis(*t, mu);
            for (Eigen::Index flat = 0; flat < c.size(); ++flat) {
                const int p = t->rank[flat];
                c.data()[flat] = p < count() ? fn(values_[p]) * c.data()[flat] : 0.0;
            }
            return op_->prolong(tensor_synthesis(*t, c));
        }
        Eigen::VectorXd c = coefficients(u);
        for (int j = 0; j < count(); ++j) c[j] *= fn(values_[j]);
        return synthesize(c);
    }

    [[nodiscard]] GridFunction mode(int j) const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(count());
        e[j] = 1.0;
        return synthesize(e);
    }

    /// max_j ‖Aφ_j − λ_jφ_j‖_{L²} / λ_j over retained modes. Tensor bases use
    /// the exact bound ‖r_x‖ + ‖r_y‖ from the axis residuals.
    [[nodiscard]] double max_relative_residual() const {
        double worst = 0.0;
        if (const auto* d = std::get_if<Dense>(&rep_)) {
            const Eigen::VectorXd& m = op_->mass();
            for (int j = 0; j < count(); ++j) {
                const Eigen::VectorXd r = op_->apply(d->vectors.col(j)) - values_[j] * d->vectors.col(j);
                worst = std::max(worst, std::sqrt(r.cwiseProduct(r).dot(m)) / values_[j]);
            }
            return worst;
        }
        const auto& t = std::get<Tensor>(rep_);
        const auto nx = t.x.values.size();
        for (int p = 0; p < count(); ++p) {
            const int flat = t.order[p];
            const double r = t.x.residuals[flat % nx] + t.y.residuals[flat / nx];
            worst = std::max(worst, r / values_[p]);
        }
        return worst;
    }

    /// Gram matrix of the first `k` modes in the quadrature inner product.
    [[nodiscard]] Eigen::MatrixXd gram(int k) const {
        k = std::min(k, count());
        Eigen::MatrixXd phi(op_->free_count(), k);
        for (int j = 0; j < k; ++j) phi.col(j) = op_->restrict(mode(j));
        return phi.transpose() * op_->mass().asDiagonal() * phi;
    }

private:
    // Free nodes of a separable operator are a product set ordered x-fastest,
    // so a free vector reshapes to an (nx_free × ny_free) matrix.
    static Eigen::MatrixXd tensor_analysis(const Tensor& t, const Eigen::VectorXd& mu) {
        const auto nx = t.x.vectors.rows(), ny = t.y.vectors.rows();
        Eigen::Map<const Eigen::MatrixXd> u(mu.data(), nx, ny);
        return t.x.vectors.transpose() * u * t.y.vectors;
    }
    static Eigen::VectorXd tensor_synthesis(const Tensor& t, const Eigen::MatrixXd& c) {
        const Eigen::MatrixXd u = t.x.vectors * c * t.y.vectors.transpose();
        return Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
    }

    LaplacianPtr op_;
    Eigen::VectorXd values_;
    std::variant<Dense, Tensor> rep_;
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

inline BasisPtr eigendecompose(const LaplacianPtr& op, const EigenOptions& opt = {}) {
    const int nf = op->free_count();
    const int k = opt.modes.value_or(nf);
    if (k < 1 || k > nf) throw PreconditionError("eigendecompose: mode count must be in [1, free nodes]");
    const Grid& g = op->grid();

    if (op->separable()) {
        SpectralBasis::Tensor t;
        t.x = detail::axis_factor(g.nx(), g.hx(), g.axis_weights(0), op->face_dirichlet(Face::left),
                                  op->face_dirichlet(Face::right));
        if (g.dim() == 2) {
            t.y = detail::axis_factor(g.ny(), g.hy(), g.axis_weights(1), op->face_dirichlet(Face::bottom),
                                      op->face_dirichlet(Face::top));
        } else {
            t.y.values = Eigen::VectorXd::Zero(1);
            t.y.vectors = Eigen::MatrixXd::Ones(1, 1);
            t.y.residuals = Eigen::VectorXd::Zero(1);
        }
        const auto nx = t.x.values.size(), ny = t.y.values.size();
        Eigen::VectorXd all(nx * ny);
        for (Eigen::Index j = 0; j < ny; ++j)
            for (Eigen::Index i = 0; i < nx; ++i) all[i + nx * j] = t.x.values[i] + t.y.values[j];
        t.order.resize(all.size());
        std::iota(t.order.begin(), t.order.end(), 0);
        std::stable_sort(t.order.begin(), t.order.end(), [&](int a, int b) { return all[a] < all[b]; });
        t.rank.resize(all.size());
        for (int p = 0; p < static_cast<int>(t.order.size()); ++p) t.rank[t.order[p]] = p;
        Eigen::VectorXd values(k);
        for (int p = 0; p < k; ++p) values[p] = all[t.order[p]];
        if (!(values[0] > 0.0)) throw NumericalError("eigendecompose: λ₁ is not positive");
        return std::make_shared<const SpectralBasis>(op, std::move(values), std::move(t));
    }

    const Eigen::VectorXd is = op->mass().cwiseSqrt().cwiseInverse();
    if (nf <= opt.dense_limit || k == nf) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(op->matrix())};
        if (es.info() != Eigen::Success) throw NumericalError("eigendecompose: dense eigensolver failed");
        SpectralBasis::Dense d{is.asDiagonal() * es.eigenvectors().leftCols(k)};
        Eigen::VectorXd values = es.eigenvalues().head(k);
        if (!(values[0] > 0.0)) throw NumericalError("eigendecompose: λ₁ is not positive");
        return std::make_shared<const SpectralBasis>(op, std::move(values), std::move(d));
    }

    LanczosResult lr = lanczos_smallest(op->matrix(), k, opt.lanczos);
    SpectralBasis::Dense d{is.asDiagonal() * lr.vectors};
    auto basis = std::make_shared<const SpectralBasis>(op, std::move(lr.values), std::move(d));
    const double res = basis->max_relative_residual();
    if (!(res <= 1e-8)) throw NumericalError("eigendecompose: Lanczos residual above 1e-8·λ", res, lr.steps);
    return basis;
}

struct Eigenpair {
    GridFunction phi;
    double lambda;
};

/// First pure-Dirichlet eigenpair, φ₁ positive inside with unit L² norm.
inline Eigenpair first_dirichlet_eigenpair(const GridPtr& grid) {
    const auto basis = eigendecompose(assemble(dirichlet_everywhere(grid)));
    GridFunction phi = basis->mode(0);
    if (phi.values.sum() < 0.0) phi.values = -phi.values;
    return {std::move(phi), basis->lambda1()};
}

}  // namespace fraclab
