#pragma once

// Quantitative maximum principles: comparison with the torsion-type solution
// v, the ratio field v/u and its level-set curve, the Hopf-type lower bound,
// boundary growth rates and the mean-value probes used by the lower bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fraclab/domain.hpp"
#include "fraclab/error.hpp"
#include "fraclab/fractional.hpp"
#include "fraclab/inequalities.hpp"
#include "fraclab/operator.hpp"

namespace fraclab {

/// Bilinear (linear in 1D) interpolation of nodal values.
inline double interpolate(const GridFunction& f, const Point& p) {
    const Grid& g = *f.grid;
    if (!g.contains(p)) throw PreconditionError("interpolate: point outside the domain");
    auto locate = [](double x, double h, int n) {
        int i = static_cast<int>(std::floor(x / h));
        i = std::clamp(i, 0, n - 2);
        return std::pair{i, std::clamp(x / h - i, 0.0, 1.0)};
    };
    const auto [i, tx] = locate(p[0], g.hx(), g.nx());
    if (g.dim() == 1) return (1.0 - tx) * f[i] + tx * f[i + 1];
    const auto [j, ty] = locate(p[1], g.hy(), g.ny());
    return (1.0 - tx) * (1.0 - ty) * f[g.index(i, j)] + tx * (1.0 - ty) * f[g.index(i + 1, j)] +
           (1.0 - tx) * ty * f[g.index(i, j + 1)] + tx * ty * f[g.index(i + 1, j + 1)];
}

/// Mean of f over B_R(c): equal-weight average of interpolated values on a
/// cell-centred lattice of spacing h/refine clipped to the ball.
inline double ball_average(const GridFunction& f, const Point& c, double radius, int refine = 4) {
    const Grid& g = *f.grid;
    if (!(radius > 0.0)) throw PreconditionError("ball_average: radius must be positive");
    const double dx = g.hx() / refine;
    const int nx = static_cast<int>(std::ceil(radius / dx));
    double sum = 0.0;
    long count = 0;
    if (g.dim() == 1) {
        for (int a = -nx; a < nx; ++a) {
            const double x = c[0] + (a + 0.5) * dx;
            if (std::abs(x - c[0]) >= radius) continue;
            sum += interpolate(f, {x, 0.0});
            ++count;
        }
    } else {
        const double dy = g.hy() / refine;
        const int ny = static_cast<int>(std::ceil(radius / dy));
        for (int b = -ny; b < ny; ++b) {
            const double y = c[1] + (b + 0.5) * dy;
            for (int a = -nx; a < nx; ++a) {
                const double x = c[0] + (a + 0.5) * dx;
                if (std::hypot(x - c[0], y - c[1]) >= radius) continue;
                sum += interpolate(f, {x, y});
                ++count;
            }
        }
    }
    if (count == 0) throw PreconditionError("ball_average: ball contains no sample points");
    return sum / static_cast<double>(count);
}

inline void require_nonnegative(const GridFunction& f, const char* who) {
    if (f.values.minCoeff() < -1e-14 * std::max(1.0, f.max_abs())) {
        throw PreconditionError(std::string(who) + ": source must be nonnegative");
    }
}

/// min u ≥ −tol·‖u‖_∞.
inline InequalityCheck max_principle_check(const GridFunction& u, double tol = 1e-8) {
    InequalityCheck out;
    out.name = "max_principle";
    out.lhs = -u.values.minCoeff();
    out.rhs = tol * u.max_abs();
    out.tol = tol;
    out.empirical_constant = u.max_abs() > 0.0 ? u.values.minCoeff() / u.max_abs() : 0.0;
    out.pass = out.lhs <= out.rhs;
    return out;
}

/// u ≤ (max f)·v + tol·‖u‖_∞ pointwise.
inline InequalityCheck comparison_upper(const GridFunction& u, const GridFunction& v, const GridFunction& f,
                                        double tol = 1e-8) {
    require_nonnegative(f, "comparison_upper");
    const double c1 = f.values.maxCoeff();
    const Eigen::VectorXd excess = u.values - c1 * v.values;
    Eigen::Index worst = 0;
    const double e = excess.maxCoeff(&worst);
    InequalityCheck out;
    out.name = "comparison_upper";
    out.lhs = e;
    out.rhs = tol * u.max_abs();
    out.tol = tol;
    out.empirical_constant = c1;
    out.pass = e <= out.rhs;
    if (!out.pass) {
        const Point p = u.grid->coords(static_cast<int>(worst));
        out.note = "worst node (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) + ")";
    }
    return out;
}

struct MaskOptions {
    /// u-floor relative to ‖u‖_∞.
    double delta = 1e-12;
    /// d ≥ dist_factor·h_min.
    double dist_factor = 1.0;
};

/// Nodes with d ≥ h and u ≥ δ‖u‖_∞.
inline std::vector<char> validity_mask(const GridFunction& u, const MaskOptions& opt = {}) {
    const Grid& g = *u.grid;
    const DistanceField d = distance_field(u.grid);
    const double dmin = opt.dist_factor * g.h_min() * (1.0 - 1e-9);
    const double floor = opt.delta * u.max_abs();
    std::vector<char> mask(g.size(), 0);
    for (int k = 0; k < g.size(); ++k) mask[k] = d.d[k] >= dmin && u[k] >= floor && u[k] > 0.0;
    return mask;
}

struct RatioField {
    GridPtr grid;
    Eigen::VectorXd w;        // NaN off the mask
    std::vector<char> mask;
    double sup_w = 0.0;       // masked maximum of w
    double sup_abs_w = 0.0;   // masked maximum of |w|
    int argmax = -1;
};

inline RatioField ratio_field(const GridFunction& u, const GridFunction& v, const MaskOptions& opt = {}) {
    RatioField rf;
    rf.grid = u.grid;
    rf.mask = validity_mask(u, opt);
    rf.w = Eigen::VectorXd::Constant(u.values.size(), std::numeric_limits<double>::quiet_NaN());
    rf.sup_w = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int k = 0; k < static_cast<int>(rf.mask.size()); ++k) {
        if (!rf.mask[k]) continue;
        any = true;
        rf.w[k] = v[k] / u[k];
        if (rf.w[k] > rf.sup_w) {
            rf.sup_w = rf.w[k];
            rf.argmax = k;
        }
        rf.sup_abs_w = std::max(rf.sup_abs_w, std::abs(rf.w[k]));
    }
    if (!any) throw PreconditionError("ratio_field: empty validity mask");
    return rf;
}

struct RatioBound {
    RatioField field;
    double g_norm = 0.0;
    /// sup|v_g/u| / ‖g‖_{L^p}.
    double k_emp = 0.0;
    /// Separate values for g⁺ and g⁻ when g changes sign.
    std::optional<double> k_pos, k_neg;
};

/// K_emp = sup (v_g/u) / ‖g‖_{L^p} for g ≥ 0.
inline RatioBound ratio_bound(const GridFunction& u, const GridFunction& v_g, const GridFunction& g, double p,
                              const MaskOptions& opt = {}) {
    if (!(u.max_abs() > 0.0)) throw PreconditionError("ratio_bound: u vanishes identically");
    require_nonnegative(g, "ratio_bound");
    RatioBound out;
    out.field = ratio_field(u, v_g, opt);
    out.g_norm = g.lp_norm(p);
    if (!(out.g_norm > 0.0)) throw DegenerateInput("ratio_bound: g vanishes identically");
    out.k_emp = out.field.sup_abs_w / out.g_norm;
    return out;
}

/// Signed g: the positive and negative parts are solved separately and
/// combined, v_g = v_{g⁺} − v_{g⁻}.
inline RatioBound ratio_bound(const SpectralBasis& basis, const GridFunction& u, const GridFunction& g, double s,
                              double p, const MaskOptions& opt = {}) {
    if (!(u.max_abs() > 0.0)) throw PreconditionError("ratio_bound: u vanishes identically");
    const GridFunction gp{g.grid, g.values.cwiseMax(0.0)};
    const GridFunction gm{g.grid, (-g.values).cwiseMax(0.0)};
    const bool has_p = gp.max_abs() > 0.0, has_m = gm.max_abs() > 0.0;
    if (!has_p && !has_m) throw DegenerateInput("ratio_bound: g vanishes identically");
    GridFunction v = GridFunction::zeros(g.grid);
    RatioBound out;
    if (has_p) {
        const GridFunction vp = frac_solve(basis, gp, s);
        out.k_pos = ratio_bound(u, vp, gp, p, opt).k_emp;
        v = v + vp;
    }
    if (has_m) {
        const GridFunction vm = frac_solve(basis, gm, s);
        out.k_neg = ratio_bound(u, vm, gm, p, opt).k_emp;
        v = v - vm;
    }
    out.field = ratio_field(u, v, opt);
    out.g_norm = g.lp_norm(p);
    out.k_emp = out.field.sup_abs_w / out.g_norm;
    return out;
}

struct HopfReport {
    double I = 0.0;           // ∫ f v
    double C_emp = 0.0;       // min over mask of u/(I v)
    std::optional<double> K_emp;
    std::optional<double> lambda_emp;
    std::optional<double> c1_dist, c1_phi, c_phi_u;
    int argmin = -1;
    bool pass = false;
};

/// u ≥ C (∫ f v) v with the empirical C = min over the mask of u/(I v).
inline HopfReport hopf_lower(const GridFunction& u, const GridFunction& v, const GridFunction& f,
                             const MaskOptions& opt = {}) {
    require_nonnegative(f, "hopf_lower");
    if (!(f.max_abs() > 0.0)) throw DegenerateInput("hopf_lower: f vanishes identically");
    HopfReport r;
    r.I = f.inner(v);
    const auto mask = validity_mask(v, opt);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < static_cast<int>(mask.size()); ++k) {
        if (!mask[k]) continue;
        const double q = u[k] / (r.I * v[k]);
        if (q < best) {
            best = q;
            r.argmin = k;
        }
    }
    if (r.argmin < 0) throw PreconditionError("hopf_lower: empty validity mask");
    r.C_emp = best;
    r.pass = std::isfinite(best) && best > 0.0;
    return r;
}

struct BoundaryGrowth {
    double c1_dist = 0.0;   // min u/d^s
    double c1_phi = 0.0;    // min φ₁/d
    double c_phi_u = 0.0;   // max φ₁^s/u
    Point argmin_dist{};
    Point argmax_phi_u{};
    bool pass = false;
};

inline BoundaryGrowth boundary_growth(const GridFunction& u, const GridFunction& phi1, double s,
                                      const MaskOptions& opt = {}) {
    const Grid& g = *u.grid;
    const DistanceField d = distance_field(u.grid);
    const double dmin = opt.dist_factor * g.h_min() * (1.0 - 1e-9);
    BoundaryGrowth b;
    b.c1_dist = b.c1_phi = std::numeric_limits<double>::infinity();
    b.c_phi_u = 0.0;
    bool any = false;
    for (int k = 0; k < g.size(); ++k) {
        if (d.d[k] < dmin) continue;
        any = true;
        const double a = u[k] / std::pow(d.d[k], s);
        if (a < b.c1_dist) {
            b.c1_dist = a;
            b.argmin_dist = g.coords(k);
        }
        b.c1_phi = std::min(b.c1_phi, phi1[k] / d.d[k]);
        const double c = u[k] > 0.0 ? std::pow(std::max(phi1[k], 0.0), s) / u[k]
                                    : std::numeric_limits<double>::infinity();
        if (c > b.c_phi_u) {
            b.c_phi_u = c;
            b.argmax_phi_u = g.coords(k);
        }
    }
    if (!any) throw PreconditionError("boundary_growth: empty mask");
    auto ok = [](double x) { return std::isfinite(x) && x > 0.0; };
    b.pass = ok(b.c1_dist) && ok(b.c1_phi) && ok(b.c_phi_u);
    return b;
}

struct StampacchiaCurve {
    Eigen::VectorXd k;        // uniform levels on [0, sup_w]
    Eigen::VectorXd a;        // ∫ u^r (w − k)₊
    Eigen::VectorXd aprime;   // −∫_{w>k} u^r
    double sup_w = 0.0;
    double gamma = 0.0;
    double decay_constant = 0.0;   // max a/(‖g‖_p (−a′)^γ) over levels with a > 0
    double k0 = 0.0;
    std::optional<double> fit_slope, fit_constant;
    double min_second_difference = 0.0;
    bool nonincreasing = false;
    bool vanishes_beyond_sup = false;
    bool convex = false;
    bool pass = false;
};

/// Level-set curve of the masked ratio field with r = p/(p−1).
inline StampacchiaCurve stampacchia_curve(const GridFunction& u, const RatioField& ratio, const FracParams& params,
                                          double g_norm, double v_inf, int levels = 64, double convex_tol = 1e-10) {
    if (levels < 3) throw PreconditionError("stampacchia_curve: need at least 3 levels");
    const double r = params.r;
    const Eigen::VectorXd& wq = u.grid->quad_weights();
    StampacchiaCurve c;
    c.sup_w = std::max(ratio.sup_w, 0.0);
    c.gamma = params.gamma;
    c.k.resize(levels);
    c.a.resize(levels);
    c.aprime.resize(levels);
    for (int j = 0; j < levels; ++j) {
        const double k = c.sup_w * j / (levels - 1);
        double a = 0.0, ap = 0.0;
        for (int n = 0; n < static_cast<int>(ratio.mask.size()); ++n) {
            if (!ratio.mask[n]) continue;
            const double ur = std::pow(u[n], r);
            const double excess = ratio.w[n] - k;
            if (excess > 0.0) {
                a += wq[n] * ur * excess;
                ap -= wq[n] * ur;
            }
        }
        c.k[j] = k;
        c.a[j] = a;
        c.aprime[j] = ap;
    }

    c.nonincreasing = true;
    for (int j = 1; j < levels; ++j) c.nonincreasing &= c.a[j] <= c.a[j - 1];
    c.vanishes_beyond_sup = c.a[levels - 1] == 0.0;
    c.min_second_difference = std::numeric_limits<double>::infinity();
    for (int j = 1; j + 1 < levels; ++j) {
        c.min_second_difference = std::min(c.min_second_difference, c.a[j + 1] - 2.0 * c.a[j] + c.a[j - 1]);
    }
    c.convex = c.min_second_difference >= -convex_tol;

    c.decay_constant = 0.0;
    for (int j = 0; j < levels; ++j) {
        if (c.a[j] > 0.0 && c.aprime[j] < 0.0) {
            c.decay_constant = std::max(c.decay_constant, c.a[j] / (g_norm * std::pow(-c.aprime[j], c.gamma)));
        }
    }
    const double q = params.q;
    c.k0 = std::pow(2.0 * c.decay_constant, q / (2.0 * (q - r))) * v_inf;

    // least squares log a = log C + γ̂ log(−a′) over k ≥ k₀
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int j = 0; j < levels; ++j) {
        if (c.k[j] < c.k0 || !(c.a[j] > 0.0) || !(c.aprime[j] < 0.0)) continue;
        const double x = std::log(-c.aprime[j]), y = std::log(c.a[j]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n >= 2 && n * sxx - sx * sx > 0.0) {
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        c.fit_slope = slope;
        c.fit_constant = std::exp((sy - slope * sx) / n);
    }
    c.pass = c.nonincreasing && c.vanishes_beyond_sup && c.convex;
    return c;
}

struct TorsionProbe {
    double c_f = 0.0;
    GridFunction w;
    Point x0{};
    double rho = 0.0;
    double value = 0.0;          // w(x₀)
    double ball_mean = 0.0;      // mean of w over B_{2ρ}(x₀)
    double measured_gap = 0.0;
    double paper_constant = 0.0;     // 2 c_f ρ² / (N(N+2))
    double derived_constant = 0.0;   // 2 c_f ρ² / (N+2)
};

inline void require_probe_ball(const Grid& g, const Point& x0, double rho, const char* who) {
    if (!(rho > 0.0)) throw PreconditionError(std::string(who) + ": radius must be positive");
    if (!g.contains(x0)) throw PreconditionError(std::string(who) + ": probe point outside the domain");
    const double d = g.distance_to_boundary(x0);
    if (!(rho < 0.25 * d)) throw PreconditionError(std::string(who) + ": requires rho < d(x0)/4");
}

/// Mean-value gap of the torsion function −Δw = c_f (Dirichlet) over B_{2ρ}(x₀).
inline TorsionProbe torsion_mean_value(const GridPtr& grid, double c_f, const Point& x0, double rho) {
    require_probe_ball(*grid, x0, rho, "torsion_mean_value");
    TorsionProbe t;
    t.c_f = c_f;
    t.x0 = x0;
    t.rho = rho;
    const auto op = assemble(dirichlet_everywhere(grid));
    t.w = solve_direct(*op, GridFunction::constant(grid, c_f));
    t.value = interpolate(t.w, x0);
    t.ball_mean = ball_average(t.w, x0, 2.0 * rho);
    t.measured_gap = t.value - t.ball_mean;
    const double n = grid->dim();
    t.paper_constant = 2.0 * c_f * rho * rho / (n * (n + 2.0));
    t.derived_constant = 2.0 * c_f * rho * rho / (n + 2.0);
    return t;
}

/// x₀ and 8 points of B_ρ(x₀) (circle of radius ρ/2 in 2D, evenly spaced in 1D).
inline std::vector<Point> probe_points(const Grid& g, const Point& x0, double rho) {
    std::vector<Point> pts{x0};
    for (int k = 0; k < 8; ++k) {
        if (g.dim() == 1) {
            pts.push_back({x0[0] + rho * (-1.0 + (2.0 * k + 1.0) / 8.0), 0.0});
        } else {
            const double t = 2.0 * std::numbers::pi * k / 8.0;
            pts.push_back({x0[0] + 0.5 * rho * std::cos(t), x0[1] + 0.5 * rho * std::sin(t)});
        }
    }
    return pts;
}

struct SuperharmonicProbe {
    double c_f = 0.0;
    /// min over probes of u(x) + 2c_fρ²/(N(N+2)) − mean_{B_{2ρ}(x)} u.
    double margin_paper = 0.0;
    /// same with 2c_fρ²/(N+2).
    double margin_derived = 0.0;
    InequalityCheck check;
};

/// u(x) + 2c_fρ²/(N(N+2)) ≥ mean_{B_{2ρ}(x)} u at x₀ and 8 probes of B_ρ(x₀),
/// with c_f = max(0, −min (−Δ)^{1−s} f) + 10⁻⁶.
inline SuperharmonicProbe superharmonic_probe(const SpectralBasis& basis, const GridFunction& u,
                                              const GridFunction& f, double s, const Point& x0, double rho,
                                              double tol = 1e-8) {
    const Grid& g = *u.grid;
    require_probe_ball(g, x0, rho, "superharmonic_probe");
    const GridFunction lf = frac_apply(basis, f, 1.0 - s);
    SuperharmonicProbe out;
    out.c_f = std::max(0.0, -lf.values.minCoeff()) + 1e-6;
    const double n = g.dim();
    const double paper = 2.0 * out.c_f * rho * rho / (n * (n + 2.0));
    const double derived = 2.0 * out.c_f * rho * rho / (n + 2.0);
    out.margin_paper = out.margin_derived = std::numeric_limits<double>::infinity();
    for (const Point& x : probe_points(g, x0, rho)) {
        const double base = interpolate(u, x) - ball_average(u, x, 2.0 * rho);
        out.margin_paper = std::min(out.margin_paper, base + paper);
        out.margin_derived = std::min(out.margin_derived, base + derived);
    }
    out.check.name = "superharmonic";
    out.check.lhs = -out.margin_paper;
    out.check.rhs = tol * u.max_abs();
    out.check.tol = tol;
    out.check.empirical_constant = out.c_f;
    out.check.pass = out.margin_paper >= -tol * u.max_abs();
    out.check.note = "derived-constant margin " + std::to_string(out.margin_derived);
    return out;
}

struct HopfChain {
    double duality_lhs = 0.0;   // ∫ u f₀
    double duality_rhs = 0.0;   // ∫ f u₀
    double duality_rel = 0.0;
    bool duality_pass = false;
    /// min over probes of u(x) − mean_{B_{2ρ}(x)} u / 2.
    double half_mean_margin = 0.0;
    bool half_mean_pass = false;
    double lambda_emp = 0.0;
    /// λ_emp / ∫ f v, the empirical stand-in for c″.
    double c_second = 0.0;
    /// min (u − λ_emp u₀) over the grid; ≥ 0 when the global comparison holds.
    double global_margin = 0.0;
    bool global_pass = false;
};

/// Bump-source chain at x₀: duality, the half-mean-value bound and the global
/// comparison u ≥ λ_emp u₀.
inline HopfChain hopf_chain(const SpectralBasis& basis, const GridFunction& u, const GridFunction& f,
                            const GridFunction& v, double s, const Point& x0, double rho, double c1, double c_f,
                            double tol = 1e-8) {
    const Grid& g = *u.grid;
    require_probe_ball(g, x0, rho, "hopf_chain");
    const double n = g.dim();
    const double cap = std::pow(c1 * n * (n + 2.0) / (4.0 * c_f), 1.0 / (2.0 - s));
    if (!(rho < cap)) throw PreconditionError("hopf_chain: rho exceeds (c1 N(N+2)/(4 c_f))^{1/(2-s)}");

    const GridFunction f0 = make_bump(u.grid, x0, rho);
    const GridFunction u0 = frac_solve(basis, f0, s);
    HopfChain h;
    h.duality_lhs = u.inner(f0);
    h.duality_rhs = f.inner(u0);
    h.duality_rel = std::abs(h.duality_lhs - h.duality_rhs) /
                    std::max({std::abs(h.duality_lhs), std::abs(h.duality_rhs), 1e-300});
    h.duality_pass = h.duality_rel <= tol;

    h.half_mean_margin = std::numeric_limits<double>::infinity();
    for (const Point& x : probe_points(g, x0, rho)) {
        h.half_mean_margin = std::min(h.half_mean_margin, interpolate(u, x) - 0.5 * ball_average(u, x, 2.0 * rho));
    }
    h.half_mean_pass = h.half_mean_margin >= -tol * u.max_abs();

    double umin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.size(); ++k)
        if (distance(g.coords(k), x0) <= rho) umin = std::min(umin, u[k]);
    h.lambda_emp = umin / u0.max_abs();
    h.c_second = h.lambda_emp / f.inner(v);
    h.global_margin = (u.values - h.lambda_emp * u0.values).minCoeff();
    h.global_pass = h.global_margin >= -tol * u.max_abs();
    return h;
}

}  // namespace fraclab
