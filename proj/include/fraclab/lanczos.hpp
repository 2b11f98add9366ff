#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fraclab/error.hpp"

namespace fraclab {

struct LanczosOptions {
    int max_steps = 1500;
    int check_every = 25;
    /// Ritz residual estimate threshold, relative to the Ritz value.
    double tol = 1e-10;
    unsigned seed = 12345;
};

struct LanczosResult {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // Euclidean-orthonormal columns
    int steps = 0;
};

/// Smallest `k` eigenpairs of a sparse symmetric positive semidefinite matrix by
/// Lanczos with full (twice-applied Gram–Schmidt) reorthogonalization. The
/// Krylov space grows until every wanted Ritz pair satisfies
/// |β_m y_m| <= tol·θ.
inline LanczosResult lanczos_smallest(const Eigen::SparseMatrix<double>& a, int k, const LanczosOptions& opt = {}) {
    const int n = static_cast<int>(a.rows());
    if (k < 1 || k > n) throw PreconditionError("lanczos_smallest: need 1 <= k <= n");
    const int m_max = std::min(n, std::max(opt.max_steps, 2 * k + 10));

    Eigen::MatrixXd q(n, m_max);
    std::vector<double> alpha, beta;
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal;

    auto random_start = [&](int j) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = normal(rng);
        for (int pass = 0; pass < 2 && j > 0; ++pass) v -= q.leftCols(j) * (q.leftCols(j).transpose() * v);
        return Eigen::VectorXd(v.normalized());
    };

    q.col(0) = random_start(0);
    Eigen::VectorXd w(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    double last_residual = 0.0;

    for (int j = 0; j < m_max; ++j) {
        w.noalias() = a * q.col(j);
        const double aj = q.col(j).dot(w);
        alpha.push_back(aj);
        for (int pass = 0; pass < 2; ++pass) w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
        double bj = w.norm();

        const int m = j + 1;
        const bool last = (m == m_max);
        const bool check = m >= k && (last || bj < 1e-14 * std::abs(aj) || (m - k) % opt.check_every == 0);
        if (check) {
            Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
            Eigen::VectorXd sub = beta.empty() ? Eigen::VectorXd() : Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1);
            tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            if (tri.info() != Eigen::Success) throw NumericalError("lanczos: tridiagonal eigensolver failed");
            bool converged = true;
            last_residual = 0.0;
            for (int i = 0; i < k; ++i) {
                const double theta = tri.eigenvalues()[i];
                const double res = std::abs(bj * tri.eigenvectors()(m - 1, i));
                last_residual = std::max(last_residual, res / std::max(std::abs(theta), 1e-300));
                if (res > opt.tol * std::abs(theta)) converged = false;
            }
            if (converged || last) {
                if (!converged && m < n) {
                    throw NumericalError("lanczos: no convergence within iteration budget", last_residual, m);
                }
                LanczosResult out;
                out.values = tri.eigenvalues().head(k);
                out.vectors = q.leftCols(m) * tri.eigenvectors().leftCols(k);
                out.steps = m;
                return out;
            }
        }
        if (last) break;
        if (bj < 1e-12 * std::max(1.0, std::abs(aj))) {
            // invariant subspace: continue with a fresh orthogonal direction
            q.col(j + 1) = random_start(j + 1);
            bj = 0.0;
        } else {
            q.col(j + 1) = w / bj;
        }
        beta.push_back(bj);
    }
    throw NumericalError("lanczos: no convergence within iteration budget", last_residual, m_max);
}

}  // namespace fraclab
