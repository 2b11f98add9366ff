#pragma once

// Spectral fractional Laplacian (−Δ)^σ u = Σ λ_j^σ ⟨u, φ_j⟩ φ_j on a mixed
// Dirichlet/Neumann eigenbasis, the associated norms and closed-form
// constants, and the discrete mixed Sobolev constant C_D.

#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fraclab/domain.hpp"
#include "fraclab/error.hpp"
#include "fraclab/gamma.hpp"
#include "fraclab/operator.hpp"

namespace fraclab {

inline GridFunction frac_apply(const SpectralBasis& basis, const GridFunction& u, double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw PreconditionError("frac_apply: exponent must be >= 0");
    if (sigma == 0.0) return basis.spectral_map(u, [](double) { return 1.0; });
    return basis.spectral_map(u, [sigma](double lam) { return std::pow(lam, sigma); });
}

/// Solution of (−Δ)^s u = f with the boundary data built into the basis.
inline GridFunction frac_solve(const SpectralBasis& basis, const GridFunction& f, double s) {
    if (!(s > 0.0)) throw PreconditionError("frac_solve: exponent must be positive");
    return basis.spectral_map(f, [s](double lam) { return std::pow(lam, -s); });
}

/// (Σ a_j² λ_j^s)^{1/2} = ‖(−Δ)^{s/2} u‖_{L²}.
inline double hs_norm(const SpectralBasis& basis, const GridFunction& u, double s) {
    const Eigen::VectorXd a = basis.coefficients(u);
    double sum = 0.0;
    for (int j = 0; j < basis.count(); ++j) sum += a[j] * a[j] * std::pow(basis.eigenvalues()[j], s);
    return std::sqrt(sum);
}

/// Upper estimate λ_k^{−s}‖f‖_{L²} of the spectral-truncation error of
/// frac_solve on a basis holding k modes; zero on a full basis.
inline double truncation_estimate(const SpectralBasis& basis, const GridFunction& f, double s) {
    if (basis.full()) return 0.0;
    return std::pow(basis.eigenvalues()[basis.count() - 1], -s) * f.l2_norm();
}

/// κ_s = 2^{2s−1} Γ(s)/Γ(1−s), the normalisation that makes the s-harmonic
/// extension an isometry.
inline double kappa(double s) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("kappa: s must lie in (0, 1)");
    return std::pow(2.0, 2.0 * s - 1.0) * gamma_fn(s) / gamma_fn(1.0 - s);
}

/// Sharp fractional Sobolev constant S(N, s) on ℝ^N.
inline double sobolev_constant(int dim, double s) {
    const double n = dim;
    if (!(n > 2.0 * s) || !(s > 0.0)) throw DomainError("sobolev_constant: requires N > 2s");
    return std::pow(2.0, 2.0 * s) * std::pow(std::numbers::pi, s) * gamma_fn((n + 2.0 * s) / 2.0) /
           gamma_fn((n - 2.0 * s) / 2.0) * std::pow(gamma_fn(n / 2.0) / gamma_fn(n), 2.0 * s / n);
}

/// Fractional Hardy constant C(s) = 2^{2s} Γ²((3+2s)/4) / Γ²((3−2s)/4).
inline double hardy_constant(double s) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("hardy_constant: s must lie in (0, 1)");
    const double r = gamma_fn((3.0 + 2.0 * s) / 4.0) / gamma_fn((3.0 - 2.0 * s) / 4.0);
    return std::pow(2.0, 2.0 * s) * r * r;
}

/// Critical trace exponent 2*_s = 2N/(N − 2s).
inline double critical_exponent(int dim, double s) {
    if (!(dim > 2.0 * s)) throw DomainError("critical_exponent: requires N > 2s");
    return 2.0 * dim / (dim - 2.0 * s);
}

struct FracParams {
    double s = 0.75;
    int dim = 2;
    double p = 4.0;
    double r = 0.0;
    double two_star = 0.0;
    double q = 2.0;
    double gamma = 0.0;
};

/// Validates (N, s, p, r) and derives 2*_s, q with q/2 = 1 + rs/N, and
/// γ = 2 − 1/p − 2/q.
inline FracParams derive_params(int dim, double s, double p, double r) {
    if (!(s > 0.5 && s < 1.0)) throw ConfigError("derive_params: s must lie in (1/2, 1)");
    if (!(dim > 2.0 * s)) throw ConfigError("derive_params: requires N > 2s");
    if (!(p > dim / s)) {
        throw ConfigError("derive_params: p must exceed N/s, otherwise γ ≤ 1 (p = " + std::to_string(p) +
                          ", N/s = " + std::to_string(dim / s) + ")");
    }
    FracParams out;
    out.s = s;
    out.dim = dim;
    out.p = p;
    out.two_star = critical_exponent(dim, s);
    if (!(r >= 0.0 && r <= out.two_star * (1.0 + 1e-14))) {
        throw ConfigError("derive_params: r must lie in [0, 2*_s]");
    }
    out.r = r;
    out.q = 2.0 * (1.0 + r * s / dim);
    out.gamma = 2.0 - 1.0 / p - 2.0 / out.q;
    return out;
}

/// The level-set exponent r = p/(p−1) used by the truncation argument.
inline double conjugate_exponent(double p) { return p / (p - 1.0); }

struct ConstantsReport {
    double kappa_s = 0.0;
    std::optional<double> sobolev;  // S(N, s), when N > 2s
    std::optional<double> cd;       // discrete C_D, when computed
    double hardy = 0.0;
    double lambda1_alpha = 0.0;
};

inline ConstantsReport constants_report(const SpectralBasis& basis, double s) {
    ConstantsReport c;
    c.kappa_s = kappa(s);
    const int n = basis.grid()->dim();
    if (n > 2.0 * s) c.sobolev = sobolev_constant(n, s);
    c.hardy = hardy_constant(s);
    c.lambda1_alpha = basis.lambda1();
    return c;
}

struct CdOptions {
    double step = 1.0;
    double rel_decrease = 1e-8;
    int window = 20;
    int max_iterations = 4000;
    /// Extra starting fields (e.g. minimizers for a larger Σ_D).
    std::vector<GridFunction> warm_starts;
    int random_restarts = 0;
    std::uint64_t seed = 0;
};

struct CdResult {
    double value = 0.0;
    GridFunction minimizer;
    std::vector<double> history;  // quotient along accepted iterates of the best run
    int iterations = 0;
};

/// R(u) = ‖u‖²_{H^s} / ‖u‖²_{L^{2*}}.
inline double sobolev_quotient(const SpectralBasis& basis, const GridFunction& u, double s, double p) {
    const double hs = hs_norm(basis, u, s);
    const double lp = u.lp_norm(p);
    if (!(lp > 0.0)) throw DegenerateInput("sobolev_quotient: zero function");
    return hs * hs / (lp * lp);
}

namespace detail {

inline CdResult cd_descent(const SpectralBasis& basis, GridFunction u, double s, double p, const CdOptions& opt) {
    auto normalize = [p](GridFunction& v) { v.values /= v.lp_norm(p); };
    // Project onto the retained span and the Dirichlet constraint.
    u = basis.spectral_map(u, [](double) { return 1.0; });
    normalize(u);
    double r = sobolev_quotient(basis, u, s, p);
    CdResult res;
    res.history.push_back(r);
    const Eigen::VectorXd& w = basis.grid()->quad_weights();

    for (int it = 0; it < opt.max_iterations; ++it) {
        // H^s-gradient direction: u − R·P^{2/p−1}(−Δ)^{−s}(|u|^{p−2}u), with P = ‖u‖_p^p = 1.
        GridFunction nl{u.grid, u.values.array().abs().pow(p - 2.0).matrix().cwiseProduct(u.values)};
        const double pp = w.dot(u.values.cwiseAbs().array().pow(p).matrix());
        GridFunction target = frac_solve(basis, nl, s);
        target.values *= r * std::pow(pp, 2.0 / p - 1.0);
        const Eigen::VectorXd dir = u.values - target.values;

        double tau = opt.step;
        bool accepted = false;
        while (tau > 1e-12) {
            GridFunction cand{u.grid, u.values - tau * dir};
            const double lp = cand.lp_norm(p);
            if (lp > 0.0 && std::isfinite(lp)) {
                cand.values /= lp;
                const double rc = sobolev_quotient(basis, cand, s, p);
                if (!std::isfinite(rc)) {
                    throw NumericalError("cd_constant: non-finite quotient", rc, it);
                }
                if (rc <= r) {
                    u = std::move(cand);
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        res.iterations = it + 1;
        if (!accepted) break;
        res.history.push_back(r);
        const auto n = res.history.size();
        if (n > static_cast<std::size_t>(opt.window)) {
            const double old = res.history[n - 1 - opt.window];
            if ((old - r) <= opt.rel_decrease * r) break;
        }
    }
    if (!std::isfinite(r)) throw NumericalError("cd_constant: descent diverged", r, res.iterations);
    res.value = r;
    res.minimizer = std::move(u);
    return res;
}

}  // namespace detail

/// Discrete C_D = inf ‖u‖²_{H^s_{Σ_D}} / ‖u‖²_{L^{2*_s}} by normalised
/// H^s-gradient descent with backtracking, started from |φ₁| of the mixed
/// problem plus any warm starts; returns the best run.
inline CdResult cd_constant(const SpectralBasis& basis, double s, const CdOptions& opt = {}) {
    const int dim = basis.grid()->dim();
    if (!(dim > 2.0 * s)) throw PreconditionError("cd_constant: 2*_s is finite only for N > 2s");
    const double p = critical_exponent(dim, s);

    std::vector<GridFunction> starts;
    GridFunction phi = basis.mode(0);
    phi.values = phi.values.cwiseAbs();
    starts.push_back(std::move(phi));
    for (const auto& w : opt.warm_starts) starts.push_back(GridFunction{basis.grid(), w.values.cwiseAbs()});
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int k = 0; k < opt.random_restarts; ++k) {
        Eigen::VectorXd c(basis.count());
        for (int j = 0; j < basis.count(); ++j) c[j] = (unif(rng) - 0.5) / (1.0 + j);
        GridFunction g = basis.synthesize(c);
        g.values = g.values.cwiseAbs();
        starts.push_back(std::move(g));
    }

    std::optional<CdResult> best;
    for (auto& st : starts) {
        if (!(st.max_abs() > 0.0)) continue;
        CdResult r = detail::cd_descent(basis, st, s, p, opt);
        if (!best || r.value < best->value) best = std::move(r);
    }
    return std::move(*best);
}

}  // namespace fraclab
