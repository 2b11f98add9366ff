#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fraclab/extension.hpp"

using namespace fraclab;

namespace {

BasisPtr mixed_square(int n) {
    auto g = build_grid(DomainSpec::rectangle(1.0, 1.0, n, n));
    return eigendecompose(assemble(partition_boundary(g, std::vector<std::string>{"left", "bottom:0.5"})));
}

double rel_inf(const GridFunction& a, const GridFunction& b) {
    return (a.values - b.values).cwiseAbs().maxCoeff() / b.max_abs();
}

}  // namespace

TEST(BuildCylinder, Levels) {
    auto b = mixed_square(9);
    auto uni = build_cylinder(b->op_ptr(), 0.75, 2.0, 8, 1.0);
    for (int i = 0; i <= 8; ++i) EXPECT_NEAR(uni->y()[i], 0.25 * i, 1e-15);

    auto graded = build_cylinder(b->op_ptr(), 0.75, 1.0, 4, 2.0);
    const double expect[] = {0.0, 1.0 / 16, 0.25, 9.0 / 16, 1.0};
    for (int i = 0; i <= 4; ++i) EXPECT_NEAR(graded->y()[i], expect[i], 1e-15);

    EXPECT_THROW(build_cylinder(b->op_ptr(), 0.75, 0.0, 8, 1.0), ConfigError);
    EXPECT_THROW(build_cylinder(b->op_ptr(), 0.75, -1.0, 8, 1.0), ConfigError);
    EXPECT_THROW(build_cylinder(b->op_ptr(), 0.75, 1.0, 8, 0.5), ConfigError);
    EXPECT_THROW(build_cylinder(b->op_ptr(), 1.0, 1.0, 8, 1.0), ConfigError);
}

TEST(BuildCylinder, DefaultsAndCellWeights) {
    auto b = mixed_square(9);
    const double s = 0.6;
    auto c = build_cylinder(*b, s, 16);
    EXPECT_NEAR(c->height(), 6.0 / std::sqrt(b->lambda1()), 1e-14);
    EXPECT_NEAR(c->beta(), 3.0 / (2.0 * s), 1e-14);
    // cell averages against a fine midpoint rule
    for (int i = 0; i < c->levels(); ++i) {
        const double a = c->y()[i], h = c->widths()[i];
        double sum = 0.0;
        const int m = 200000;
        for (int k = 0; k < m; ++k) sum += std::pow(a + (k + 0.5) * h / m, 1.0 - 2.0 * s);
        EXPECT_NEAR(c->cell_weights()[i], sum / m, 1e-4 * c->cell_weights()[i]);
        EXPECT_GT(c->cell_weights()[i], 0.0);
    }
}

TEST(ExtendDirichlet, ZeroDataAndLinearity) {
    auto b = mixed_square(13);
    auto c = build_cylinder(*b, 0.75, 16);
    auto zero = extend_dirichlet(c, GridFunction::zeros(b->grid()));
    EXPECT_EQ(zero.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(energy(zero), 0.0);

    auto u1 = make_bump(b->grid(), {0.5, 0.5}, 0.3);
    auto u2 = b->mode(2);
    const CgOptions tight{1e-13, 20000};
    auto e1 = extend_dirichlet(c, u1, tight);
    auto e2 = extend_dirichlet(c, u2, tight);
    auto e12 = extend_dirichlet(c, u1 + u2, tight);
    EXPECT_LE((e12.values - e1.values - e2.values).cwiseAbs().maxCoeff(), 1e-10 * e12.values.cwiseAbs().maxCoeff());
    EXPECT_LE(extend_dirichlet(c, u1).cg_residual, 1e-10);

    EXPECT_THROW(extend_dirichlet(c, GridFunction::constant(b->grid(), 1.0)), PreconditionError);
}

TEST(ExtendDirichlet, BoundaryClosures) {
    auto b = mixed_square(13);
    auto c = build_cylinder(*b, 0.6, 16);
    auto e = extend_dirichlet(c, b->mode(0));
    EXPECT_EQ(e.values.col(c->levels()).cwiseAbs().maxCoeff(), 0.0);
    for (int i = 0; i <= c->levels(); ++i) {
        const GridFunction lvl = e.level(i);
        for (int k = 0; k < b->grid()->size(); ++k)
            if (b->op().partition().label(k) == NodeLabel::dirichlet) EXPECT_EQ(lvl[k], 0.0);
    }
}

TEST(Energy, IsometryForFirstModeAndScaling) {
    auto b = mixed_square(17);
    for (double s : {0.6, 0.75, 0.9}) {
        auto c = build_cylinder(*b, s, 24);
        auto phi = b->mode(0);
        auto e = extend_dirichlet(c, phi);
        const double target = std::pow(b->lambda1(), s);
        EXPECT_NEAR(energy(e) / target, 1.0, 0.05) << "s=" << s;
        auto e2 = extend_dirichlet(c, 2.0 * phi);
        EXPECT_NEAR(energy(e2), 4.0 * energy(e), 1e-10 * energy(e2));
    }
}

TEST(Energy, ExtensionMinimizesAmongSameTrace) {
    auto b = mixed_square(13);
    auto c = build_cylinder(*b, 0.75, 16);
    auto e = extend_dirichlet(c, make_bump(b->grid(), {0.5, 0.5}, 0.3));
    const double e0 = energy(e);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1e-3);
    for (int t = 0; t < 10; ++t) {
        ExtensionField p = e;
        for (int i = 1; i < c->levels(); ++i)
            for (int k = 0; k < p.values.rows(); ++k) p.values(k, i) += n(rng);
        EXPECT_GT(energy(p), e0);
    }
}

TEST(Energy, TruncationHeightInsensitive) {
    auto b = mixed_square(13);
    const double s = 0.75;
    auto phi = b->mode(0);
    const double y = 6.0 / std::sqrt(b->lambda1());
    // Uniform levels: the doubled cylinder repeats the levels below Y.
    auto c1 = build_cylinder(b->op_ptr(), s, y, 32, 1.0);
    auto c2 = build_cylinder(b->op_ptr(), s, 2.0 * y, 64, 1.0);
    const double a = energy(extend_dirichlet(c1, phi));
    const double d = energy(extend_dirichlet(c2, phi));
    EXPECT_LT(std::abs(a - d) / a, 1e-3);
}

TEST(Energy, IsometryImprovesAlongLadder) {
    const double s = 0.75;
    double prev = 1.0;
    for (auto [n, m] : {std::pair{9, 8}, std::pair{17, 16}, std::pair{25, 24}}) {
        auto b = mixed_square(n);
        auto c = build_cylinder(*b, s, m);
        auto u = make_bump(b->grid(), {0.5, 0.5}, 0.35);
        const double hs = hs_norm(*b, u, s);
        const double err = std::abs(energy(extend_dirichlet(c, u)) - hs * hs) / (hs * hs);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 0.05);
}

TEST(ExtendNeumann, ZeroSourceAndSingleMode) {
    auto b = mixed_square(17);
    const double s = 0.75;
    auto c = build_cylinder(*b, s, 24);
    EXPECT_EQ(extend_neumann(c, GridFunction::zeros(b->grid())).values.cwiseAbs().maxCoeff(), 0.0);
    auto phi = b->mode(0);
    auto e = extend_neumann(c, phi);
    EXPECT_LT(rel_inf(e.trace(), std::pow(b->lambda1(), -s) * phi), 0.02);
}

TEST(ExtendNeumann, TraceMatchesSpectralSolve) {
    auto b = mixed_square(17);
    auto f = make_bump(b->grid(), {0.55, 0.5}, 0.3);
    for (double s : {0.6, 0.75, 0.9}) {
        auto c = build_cylinder(*b, s, 16);
        auto e = extend_neumann(c, f);
        EXPECT_LT(rel_inf(e.trace(), frac_solve(*b, f, s)), 0.02) << "s=" << s;
    }
}

TEST(ConormalFlux, ConstantInYVanishes) {
    auto b = mixed_square(9);
    auto c = build_cylinder(*b, 0.75, 8);
    ExtensionField e{c, Eigen::MatrixXd::Ones(b->op().free_count(), c->levels() + 1)};
    EXPECT_EQ(conormal_flux(e).max_abs(), 0.0);
}

TEST(ConormalFlux, FirstModeAndRoundTrip) {
    auto b = mixed_square(17);
    const double s = 0.75;
    auto c = build_cylinder(*b, s, 24);
    auto phi = b->mode(0);
    auto flux = conormal_flux(extend_dirichlet(c, phi));
    const double ls = std::pow(b->lambda1(), s);
    EXPECT_LT(rel_inf(flux, ls * phi), 0.05);

    // Neumann row: flux + κ_s m₀ A U₀ = f exactly
    auto f = make_bump(b->grid(), {0.55, 0.5}, 0.3);
    auto e = extend_neumann(c, f);
    const Eigen::VectorXd corr =
        c->kappa_s() * c->level_masses()[0] * b->op().apply(e.values.col(0));
    const GridFunction closed = conormal_flux(e) + b->op().prolong(corr);
    EXPECT_LT(rel_inf(closed, f), 1e-8);

    EXPECT_LT(rel_inf(conormal_flux(extend_neumann(c, phi)), phi), 0.05);
}

TEST(WeightedGradient, UnitWeightBoundedByEnergy) {
    auto b = mixed_square(13);
    auto c = build_cylinder(*b, 0.75, 16);
    auto e = extend_dirichlet(c, make_bump(b->grid(), {0.5, 0.5}, 0.3));
    ExtensionField one{c, Eigen::MatrixXd::Ones(b->op().free_count(), c->levels() + 1)};
    // ρ ≡ 1 on free nodes; edges into Σ_D carry ½(1 + 0), so the weighted
    // integral is bounded by the plain one.
    const double wgi = weighted_gradient_integral(one, e);
    EXPECT_GT(wgi, 0.0);
    EXPECT_LE(wgi, energy(e) / c->kappa_s() * (1.0 + 1e-12));
}
