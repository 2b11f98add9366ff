#pragma once

// Empirical checks of the trace, Hardy, weighted Sobolev and Sobolev
// inequalities. Each check returns a flat record with both sides, the
// empirical constant and the verdict.

#include <cmath>
#include <optional>
#include <string>

#include "fraclab/domain.hpp"
#include "fraclab/error.hpp"
#include "fraclab/extension.hpp"
#include "fraclab/fractional.hpp"
#include "fraclab/operator.hpp"

namespace fraclab {

struct InequalityCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double empirical_constant = 0.0;
    std::optional<double> theoretical_bound;
    double tol = 0.0;
    bool pass = false;
    bool skipped = false;
    int mesh_level = 0;
    std::string note;
};

/// lhs ≤ rhs·(1 + tol).
inline bool holds(double lhs, double rhs, double tol) { return lhs <= rhs * (1.0 + tol); }

struct TraceCheck {
    /// Asserted through the spectral norm of the trace: C_D‖φ(·,0)‖² ≤ ‖φ(·,0)‖²_{H^s}.
    InequalityCheck spectral;
    /// Asserted with the extension energy κ_s∫y^{1−2s}|∇φ|² on the right, to the
    /// isometry tolerance.
    InequalityCheck extension;
    /// ‖φ(·,0)‖²_{H^s} / ‖φ(·,0)‖²_{L^{2*}} divided by C_D.
    double tightness = 0.0;
    bool pass = false;
};

/// C_D (∫|φ(·,0)|^{2*})^{2/2*} ≤ κ_s ∫ y^{1−2s}|∇φ|², together with the
/// spectral form of the same bound.
inline TraceCheck trace_check(const SpectralBasis& basis, const ExtensionField& phi, double cd,
                              double iso_tol = 0.05, double tol = 1e-6) {
    const double s = phi.mesh->s();
    const int dim = basis.grid()->dim();
    const GridFunction tr = phi.trace();
    if (!(tr.max_abs() > 0.0)) throw DegenerateInput("trace_check: zero trace");
    const double p = critical_exponent(dim, s);
    const double lp = tr.lp_norm(p);
    const double hs = hs_norm(basis, tr, s);

    TraceCheck out;
    out.spectral.name = "trace_spectral";
    out.spectral.lhs = cd * lp * lp;
    out.spectral.rhs = hs * hs;
    out.spectral.empirical_constant = hs * hs / (lp * lp);
    out.spectral.theoretical_bound = cd;
    out.spectral.tol = tol;
    out.spectral.pass = out.spectral.empirical_constant >= cd * (1.0 - tol);

    const double e = energy(phi);
    out.extension.name = "trace_extension";
    out.extension.lhs = cd * lp * lp;
    out.extension.rhs = e;
    out.extension.empirical_constant = e / (lp * lp);
    out.extension.theoretical_bound = cd;
    out.extension.tol = iso_tol;
    out.extension.pass = holds(out.extension.lhs, e, iso_tol);

    out.tightness = out.spectral.empirical_constant / cd;
    out.pass = out.spectral.pass && out.extension.pass;
    return out;
}

enum class HardyForm { spectral, extension };

inline void require_zero_on_boundary(const GridFunction& f, const char* who) {
    const Grid& g = *f.grid;
    const double scale = std::max(f.max_abs(), 1e-300);
    for (int k = 0; k < g.size(); ++k) {
        if (g.is_boundary(k) && std::abs(f[k]) > 1e-12 * scale) {
            throw PreconditionError(std::string(who) + ": function must vanish on the whole boundary");
        }
    }
}

/// ∫ (f/d^s)², nodes with d < h/2 contributing nothing (f = 0 there).
inline double hardy_integral(const GridFunction& f, double s) {
    const Grid& g = *f.grid;
    const DistanceField d = distance_field(f.grid);
    const double dmin = 0.5 * g.h_min();
    double sum = 0.0;
    for (int k = 0; k < g.size(); ++k) {
        if (d.d[k] < dmin) continue;
        const double q = f[k] / std::pow(d.d[k], s);
        sum += g.quad_weights()[k] * q * q;
    }
    return sum;
}

/// Spectral form: C(s)∫(f/d^s)² ≤ ‖f‖²_{H^s_0}, on a pure-Dirichlet basis.
/// Extension form: ∫(F(·,0)/d^s)² ≤ (κ_s/C(s))·∫y^{1−2s}|∇F|² with F the
/// discrete extension of f, to the isometry tolerance.
inline InequalityCheck hardy_check(const SpectralBasis& dirichlet_basis, const GridFunction& f, double s,
                                   HardyForm form = HardyForm::spectral, const CylinderPtr& cylinder = nullptr,
                                   double tol = 1e-6, double iso_tol = 0.05) {
    if (!(s >= 0.5 && s < 1.0)) throw PreconditionError("hardy_check: requires 1/2 <= s < 1");
    if (!dirichlet_basis.op().partition().pure_dirichlet()) {
        throw PreconditionError("hardy_check: needs the pure-Dirichlet basis");
    }
    require_zero_on_boundary(f, "hardy_check");
    const double c = hardy_constant(s);

    InequalityCheck out;
    out.theoretical_bound = c;
    const double weighted = hardy_integral(f, s);
    if (!(f.max_abs() > 0.0) || !(weighted > 0.0)) {
        out.name = "hardy";
        out.skipped = true;
        out.pass = true;
        out.note = "degenerate input (0/0)";
        return out;
    }
    if (form == HardyForm::spectral) {
        const double hs = hs_norm(dirichlet_basis, f, s);
        out.name = "hardy_spectral";
        out.lhs = c * weighted;
        out.rhs = hs * hs;
        out.empirical_constant = hs * hs / weighted;
        out.tol = tol;
        out.pass = out.empirical_constant >= c - tol;
        return out;
    }
    if (!cylinder) throw PreconditionError("hardy_check: extension form needs a cylinder mesh");
    const ExtensionField F = extend_dirichlet(cylinder, f);
    const double grad = energy(F) / kappa(s);
    const double bound = kappa(s) / c;
    out.name = "hardy_extension";
    out.lhs = weighted;
    out.rhs = bound * grad;
    out.empirical_constant = weighted / grad;
    out.theoretical_bound = bound;
    out.tol = iso_tol;
    out.pass = holds(out.lhs, out.rhs, iso_tol);
    return out;
}

/// (∫ u^r |φ(·,0)|^q)^{2/q} ≤ C [∫ y^{1−2s} U² |∇φ|² + ∫ u² φ(·,0)²].
inline InequalityCheck weighted_sobolev_check(const GridFunction& u, const ExtensionField& U,
                                              const ExtensionField& phi, const FracParams& params) {
    InequalityCheck out;
    out.name = "weighted_sobolev";
    if (U.mesh != phi.mesh) throw PreconditionError("weighted_sobolev_check: U and φ live on different cylinders");
    if (!(u.values.minCoeff() >= -1e-8 * u.max_abs())) {
        throw PreconditionError("weighted_sobolev_check: u must be nonnegative");
    }
    const GridFunction tr = phi.trace();
    const Eigen::VectorXd& w = u.grid->quad_weights();
    const Eigen::ArrayXd up = u.values.array().max(0.0);
    Eigen::ArrayXd ur = Eigen::ArrayXd::Ones(up.size());
    if (params.r != 0.0) ur = up.pow(params.r);
    const double inner = (w.array() * ur * tr.values.array().abs().pow(params.q)).sum();
    out.lhs = std::pow(inner, 2.0 / params.q);
    out.rhs = weighted_gradient_integral(U, phi) + (w.array() * up.square() * tr.values.array().square()).sum();
    if (out.lhs == 0.0 && out.rhs == 0.0) {
        out.skipped = true;
        out.pass = true;
        out.note = "degenerate input (0/0)";
        return out;
    }
    if (!(out.rhs > 0.0)) {
        out.pass = false;
        out.note = "inequality violation: right-hand side vanishes";
        return out;
    }
    out.empirical_constant = out.lhs / out.rhs;
    out.pass = std::isfinite(out.empirical_constant);
    return out;
}

/// Ratio ‖(−Δ)^{s/2}v‖² / ‖v‖²_{L^r}; for r = 2*_s it is compared with S(N,s)
/// for information only.
inline InequalityCheck sobolev_check(const SpectralBasis& basis, const GridFunction& v, double s, double r) {
    const int dim = basis.grid()->dim();
    if (!(dim > 2.0 * s)) throw PreconditionError("sobolev_check: requires N > 2s");
    const double two_star = critical_exponent(dim, s);
    if (!(r >= 1.0 && r <= two_star * (1.0 + 1e-14))) {
        throw PreconditionError("sobolev_check: r must lie in [1, 2*_s]");
    }
    InequalityCheck out;
    out.name = "sobolev";
    if (!(v.max_abs() > 0.0)) {
        out.skipped = true;
        out.pass = true;
        out.note = "degenerate input (zero function)";
        return out;
    }
    const double hs = hs_norm(basis, v, s);
    const double lr = v.lp_norm(r);
    out.lhs = lr * lr;
    out.rhs = hs * hs;
    out.empirical_constant = hs * hs / (lr * lr);
    if (std::abs(r - two_star) <= 1e-12 * two_star) out.theoretical_bound = sobolev_constant(dim, s);
    out.pass = std::isfinite(out.empirical_constant) && out.empirical_constant > 0.0;
    if (out.theoretical_bound) {
        out.note = out.empirical_constant >= *out.theoretical_bound ? "above S(N,s)" : "below S(N,s)";
    }
    return out;
}

}  // namespace fraclab
