#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fraclab/fractional.hpp"

using namespace fraclab;
using std::numbers::pi;

namespace {

// Reference values evaluated with mpmath at 30 digits.
constexpr double kKappa34 = 0.477988797486124995;
constexpr double kS2_06 = 1.83922624615;
constexpr double kS2_075 = 1.69188711069;
constexpr double kS2_09 = 0.98631933723;

BasisPtr square_basis(int n, std::vector<std::string> dirichlet) {
    auto g = build_grid(DomainSpec::rectangle(1.0, 1.0, n, n));
    return eigendecompose(assemble(partition_boundary(g, dirichlet)));
}

BasisPtr line_basis(int n, std::vector<std::string> dirichlet) {
    auto g = build_grid(DomainSpec::interval(1.0, n));
    return eigendecompose(assemble(partition_boundary(g, dirichlet)));
}

GridFunction random_field(const BasisPtr& b, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(b->grid()->size());
    for (auto& x : v) x = u(rng);
    // zero on Σ_D so the field lies in the discrete space
    return b->op().prolong(b->op().restrict({b->grid(), v}));
}

double rel_inf(const GridFunction& a, const GridFunction& b) {
    return (a.values - b.values).cwiseAbs().maxCoeff() / std::max(b.max_abs(), 1e-300);
}

}  // namespace

TEST(Gamma, ReferenceValues) {
    const std::vector<std::pair<double, double>> table = {
        {0.25, 3.625609908221908},  {0.75, 1.225416702465178},  {1.75, 0.919062526848883},
        {0.5, 1.772453850905516},   {1.5, 0.886226925452758},   {2.5, 1.329340388179137},
        {3.7, 4.170651783796603},   {0.1, 9.513507698668732},   {10.3, 716430.6890623752},
        {0.001, 999.4237724845955}, {1.0, 1.0},                 {2.0, 1.0}};
    for (auto [x, g] : table) EXPECT_NEAR(gamma_fn(x), g, 1e-12 * g) << "x=" << x;
    EXPECT_THROW(gamma_fn(0.0), DomainError);
    EXPECT_THROW(gamma_fn(-2.0), DomainError);
}

TEST(Kappa, Values) {
    EXPECT_NEAR(kappa(0.5), 1.0, 1e-12);
    EXPECT_NEAR(kappa(0.75), kKappa34, 1e-10);
    EXPECT_THROW(kappa(1.0), DomainError);
    EXPECT_THROW(kappa(0.0), DomainError);
}

TEST(SobolevConstant, ValuesAndMonotonicity) {
    EXPECT_NEAR(sobolev_constant(2, 0.6), kS2_06, 1e-9);
    EXPECT_NEAR(sobolev_constant(2, 0.75), kS2_075, 1e-9);
    EXPECT_NEAR(sobolev_constant(2, 0.9), kS2_09, 1e-9);
    const double closed = std::pow(2.0, 1.5) * std::pow(pi, 0.75) * 0.919062526848883 / 3.625609908221908;
    EXPECT_NEAR(sobolev_constant(2, 0.75), closed, 1e-12);
    EXPECT_THROW(sobolev_constant(1, 0.75), DomainError);
}

TEST(HardyConstant, HalfIsTwoOverPi) {
    EXPECT_NEAR(hardy_constant(0.5), 2.0 / pi, 1e-10);
    EXPECT_NEAR(hardy_constant(0.6), 0.562084131964814, 1e-12);
    EXPECT_NEAR(hardy_constant(0.75), 0.446429599962565, 1e-12);
    EXPECT_NEAR(hardy_constant(0.9), 0.328020476355022, 1e-12);
}

TEST(DeriveParams, ExponentsAndErrors) {
    auto a = derive_params(2, 0.75, 4.0, 0.0);
    EXPECT_DOUBLE_EQ(a.q, 2.0);
    EXPECT_DOUBLE_EQ(a.two_star, 8.0);
    auto b = derive_params(2, 0.75, 4.0, 8.0);
    EXPECT_NEAR(b.q, 8.0, 1e-14);
    EXPECT_THROW(derive_params(2, 0.75, 2.0, 0.0), ConfigError);
    EXPECT_THROW(derive_params(2, 0.75, 4.0, 9.0), ConfigError);
    EXPECT_THROW(derive_params(2, 0.4, 8.0, 0.0), ConfigError);
    try {
        derive_params(2, 0.75, 2.0, 0.0);
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("γ"), std::string::npos);
    }
}

TEST(DeriveParams, GammaExceedsOneAtConjugateExponent) {
    for (int n : {1, 2}) {
        for (double s : {0.55, 0.6, 0.75, 0.9, 0.99}) {
            if (!(n > 2 * s)) continue;
            for (double p : {n / s + 1e-3, n / s + 0.5, 5.0, 10.0, 100.0}) {
                if (!(p > n / s)) continue;
                const double r = conjugate_exponent(p);
                EXPECT_GT(derive_params(n, s, p, r).gamma, 1.0) << n << ' ' << s << ' ' << p;
            }
        }
    }
}

TEST(FracApply, SingleModeAndIdentity) {
    auto b = square_basis(13, {"left", "top:0.5"});
    const double s = 0.75;
    auto phi = b->mode(0);
    auto out = frac_apply(*b, phi, s);
    EXPECT_LE(rel_inf(out, std::pow(b->lambda1(), s) * phi), 1e-12);

    std::mt19937_64 rng(3);
    auto u = random_field(b, rng);
    EXPECT_LE(rel_inf(frac_apply(*b, u, 0.0), u), 1e-12);

    const auto direct = b->op().prolong(b->op().apply(b->op().restrict(u)));
    EXPECT_LE(rel_inf(frac_apply(*b, u, 1.0), direct), 1e-10);
}

TEST(FracApply, Semigroup) {
    auto b = square_basis(11, {"left:0.5", "bottom"});
    std::mt19937_64 rng(7);
    auto u = random_field(b, rng);
    auto ab = frac_apply(*b, frac_apply(*b, u, 0.3), 0.45);
    EXPECT_LE(rel_inf(ab, frac_apply(*b, u, 0.75)), 1e-10);
}

TEST(FracSolve, InverseAndLinearity) {
    for (double s : {0.6, 0.75, 0.9}) {
        auto b = square_basis(15, {"left", "bottom:0.5"});
        std::mt19937_64 rng(11);
        auto f = random_field(b, rng);
        auto g = random_field(b, rng);
        auto u = frac_solve(*b, f, s);
        EXPECT_LE(rel_inf(frac_apply(*b, u, s), f), 1e-8);
        auto lin = frac_solve(*b, 2.5 * f + (-1.5) * g, s);
        auto sep = 2.5 * u + (-1.5) * frac_solve(*b, g, s);
        EXPECT_LE((lin.values - sep.values).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, sep.max_abs()));
    }
}

TEST(FracSolve, SEqualsOneMatchesDirect) {
    auto b = square_basis(17, {"left:0.25-0.75", "top"});
    std::mt19937_64 rng(5);
    for (int k = 0; k < 5; ++k) {
        auto f = random_field(b, rng);
        auto spectral = frac_solve(*b, f, 1.0);
        auto direct = solve_direct(b->op(), f);
        EXPECT_LE((spectral.values - direct.values).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(FracSolve, ConstantSourceIsNonnegative) {
    for (auto d : {std::vector<std::string>{"left"}, std::vector<std::string>{"left:0.5", "top"}}) {
        auto b = square_basis(21, d);
        for (double s : {0.55, 0.75, 0.95}) {
            auto v = frac_solve(*b, GridFunction::constant(b->grid(), 1.0), s);
            EXPECT_GE(v.values.minCoeff(), -1e-8 * v.max_abs());
        }
    }
}

TEST(HsNorm, Identities) {
    auto b = square_basis(13, {"left", "right"});
    const double s = 0.6;
    EXPECT_NEAR(hs_norm(*b, b->mode(0), s), std::pow(b->lambda1(), s / 2), 1e-12);
    EXPECT_EQ(hs_norm(*b, GridFunction::zeros(b->grid()), s), 0.0);
    std::mt19937_64 rng(13);
    auto u = random_field(b, rng);
    const double a = hs_norm(*b, u, s);
    EXPECT_NEAR(a, frac_apply(*b, u, s / 2).l2_norm(), 1e-10 * a);
}

TEST(Duality, SpectralInverseIsSelfAdjoint) {
    auto b = square_basis(15, {"bottom", "right:0.5"});
    std::mt19937_64 rng(17);
    for (int k = 0; k < 10; ++k) {
        auto f = random_field(b, rng);
        auto g = random_field(b, rng);
        const double lhs = frac_solve(*b, f, 0.7).inner(g);
        const double rhs = f.inner(frac_solve(*b, g, 0.7));
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST(Comparison, BumpSolutionBelowScaledTorsion) {
    auto b = square_basis(25, {"left", "bottom:0.5"});
    const double s = 0.75;
    auto v = frac_solve(*b, GridFunction::constant(b->grid(), 1.0), s);
    auto f = make_bump(b->grid(), {0.6, 0.4}, 0.2, 0.7);
    auto u = frac_solve(*b, f, s);
    const double fmax = f.max_abs();
    EXPECT_LE((u.values - fmax * v.values).maxCoeff(), 1e-8 * u.max_abs());
}

TEST(TruncatedBasis, EstimateIsZeroOnFullBasis) {
    auto b = line_basis(65, {"left"});
    auto f = GridFunction::constant(b->grid(), 1.0);
    EXPECT_EQ(truncation_estimate(*b, f, 0.75), 0.0);

    EigenOptions opt;
    opt.modes = 10;
    opt.dense_limit = 0;
    auto g = build_grid(DomainSpec::rectangle(1.0, 1.0, 21, 21));
    auto part = eigendecompose(assemble(partition_boundary(g, std::vector<std::string>{"left:0.5"})), opt);
    EXPECT_GT(truncation_estimate(*part, GridFunction::constant(g, 1.0), 0.75), 0.0);
}

TEST(CdConstant, TraceIsMonotoneAndBelowBounds) {
    auto b = square_basis(17, {"left", "bottom"});
    for (double s : {0.6, 0.75, 0.9}) {
        auto r = cd_constant(*b, s);
        for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1]);
        const double bound_lambda = std::pow(b->lambda1(), s);
        EXPECT_LE(r.value, bound_lambda + 1e-6);
        EXPECT_NEAR(sobolev_quotient(*b, r.minimizer, s, critical_exponent(2, s)), r.value, 1e-12 * r.value);
    }
    auto line = line_basis(33, {"left"});
    EXPECT_THROW(cd_constant(*line, 0.75), PreconditionError);
}

TEST(ConstantsReport, AllPositive) {
    auto b = square_basis(11, {"left"});
    auto c = constants_report(*b, 0.75);
    EXPECT_GT(c.kappa_s, 0.0);
    ASSERT_TRUE(c.sobolev.has_value());
    EXPECT_GT(*c.sobolev, 0.0);
    EXPECT_GT(c.hardy, 0.0);
    EXPECT_GT(c.lambda1_alpha, 0.0);
}
