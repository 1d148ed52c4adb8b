#include <gtest/gtest.h>

#include "percamp/special.hpp"
#include "percamp/variational.hpp"

using namespace percamp;

TEST(Variational, StepValueMatchesGardnerCurve) {
    const double alpha = 5.0, kappa = -1.0;
    for (double q : {0.2, 0.45, 0.7}) {
        const double v = parisi_value(Fop::step(q), kappa, alpha);
        EXPECT_NEAR(v, gardner_objective(alpha, kappa, q), 1e-6) << q;
    }
}

TEST(Variational, SinglePieceReproducesGardner) {
    const double alpha = 5.0, kappa = -1.0;
    MinimizeOptions o;
    o.pieces = 1;
    o.budget = 400;
    const VariationalResult r = minimize(alpha, kappa, o);
    const GardnerResult g = gardner_rs(alpha, kappa);
    EXPECT_NEAR(r.value, r.rs_value, 1e-8);
    EXPECT_NEAR(r.q_under, g.q_star, 1e-4);
    EXPECT_FALSE(r.frsb);
}

TEST(Variational, PositiveKappaCollapsesToRs) {
    MinimizeOptions o;
    o.pieces = 4;
    o.budget = 400;
    const VariationalResult r = minimize(0.5, 0.5, o);
    EXPECT_FALSE(r.frsb);
    EXPECT_LE(r.value, r.rs_value + 1e-8);
    EXPECT_LT(r.q_bar - r.q_under, 1e-3 + 1e-9);
}

TEST(Variational, MembershipHeuristic) {
    VariationalResult r;
    r.gamma_star = Fop::step(0.5);
    r.q_under = r.q_bar = 0.5;
    EXPECT_FALSE(detect_lambda_membership(r, 1e-3));
    r.gamma_star = Fop({0.4, 0.5, 0.6, 1.0}, {0, 0.3, 0.3, 1});
    r.q_under = 0.4;
    r.q_bar = 0.6;
    r.grad_residual = 0.0;
    EXPECT_FALSE(detect_lambda_membership(r, 1e-3));
    r.gamma_star = Fop({0.4, 0.5, 0.6, 1.0}, {0, 0.3, 0.5, 1});
    EXPECT_TRUE(detect_lambda_membership(r, 1e-3));
    r.grad_residual = 0.5;
    EXPECT_FALSE(detect_lambda_membership(r, 1e-3, 0.02));
}

TEST(Variational, InfeasibleAboveCapacity) {
    MinimizeOptions o;
    o.pieces = 1;
    o.budget = 50;
    const VariationalResult r = minimize(1.2 * rs_capacity(-0.5), -0.5, o);
    EXPECT_TRUE(r.infeasible);
}

TEST(Variational, GradientMatchesFiniteDifference) {
    const double kappa = -1.0, alpha = 9.0;
    const Fop g({0.65, 0.7, 0.75, 1.0}, {0, 0.27, 0.3, 1});
    const ParisiGradient pg = parisi_gradient(g, kappa, alpha);
    const double h = 1e-4;
    for (int i = 1; i < 3; ++i) {
        auto lv = g.levels();
        lv[i] += h;
        const double vp = parisi_value(Fop(g.breakpoints(), lv), kappa, alpha);
        lv[i] -= 2 * h;
        const double vm = parisi_value(Fop(g.breakpoints(), lv), kappa, alpha);
        EXPECT_NEAR(pg.d_levels[i], (vp - vm) / (2 * h), 1e-6);
    }
}
