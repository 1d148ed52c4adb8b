#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "percamp/error.hpp"
#include "percamp/special.hpp"

using namespace percamp;

TEST(GaussTail, MatchesHighPrecisionOracle) {
    for (const auto& r : oracles()["tail"]) {
        const double x = r["x"], ref = r["log_tail"];
        // relative error of the value: |exp(ours - ref) - 1|
        EXPECT_NEAR(std::expm1(log_gauss_tail(x) - ref), 0.0, 1e-12) << "x=" << x;
    }
}

TEST(GaussTail, Median) { EXPECT_NEAR(log_gauss_tail(0.0), -0.6931471805599453, 1e-15); }

TEST(GaussTail, DeepLeftIsZero) { EXPECT_LE(std::abs(log_gauss_tail(-38.0)), 1e-300); }

TEST(GaussTail, NanRejected) { EXPECT_THROW(log_gauss_tail(std::nan("")), DomainError); }

TEST(Mills, MatchesOracle) {
    for (const auto& r : oracles()["tail"]) {
        const double x = r["x"], ref = r["mills"];
        if (ref == 0.0) {
            EXPECT_LT(mills(x), 1e-300);
            continue;
        }
        EXPECT_NEAR(mills(x) / ref - 1.0, 0.0, 1e-12) << "x=" << x;
    }
}

TEST(Mills, AtZero) { EXPECT_NEAR(mills(0.0), std::sqrt(2.0 / M_PI), 1e-15); }

TEST(Mills, MonotoneBoundsOnGrid) {
    double prev = -1.0;
    for (int i = 0; i <= 8000; ++i) {
        const double x = -40.0 + 0.01 * i;
        const double a = mills(x);
        EXPECT_GE(a, 0.0);
        EXPECT_GE(a - x, -1e-12 * std::max(1.0, std::abs(x))) << x;
        EXPECT_LE(x * a, (1.0 + x * x) * (1.0 + 1e-12)) << x;
        const double d1 = mills_deriv(x, 1);
        EXPECT_GE(d1, -1e-7) << x;
        EXPECT_LE(d1, 1.0 + 1e-7) << x;
        EXPECT_GE(a, prev);
        prev = a;
    }
}

TEST(Mills, DerivativeIdentityAndOracle) {
    EXPECT_NEAR(mills_deriv(0.0, 1), 2.0 / M_PI, 1e-14);
    for (const auto& r : oracles()["mills_derivs"]) {
        const double x = r["x"];
        for (int k = 1; k <= 3; ++k) {
            const double ref = r["d"][k - 1];
            EXPECT_NEAR(mills_deriv(x, k), ref, 1e-9 * std::max(1.0, std::abs(ref))) << x << " k=" << k;
        }
        const MillsJet j = mills_jet(x);
        EXPECT_DOUBLE_EQ(j.d1, mills_deriv(x, 1));
        EXPECT_NEAR(j.d1, j.a * j.a - x * j.a, 1e-12);
    }
    const double h = 1e-5;
    EXPECT_NEAR(mills_deriv(2.0, 2), (mills_deriv(2.0 + h, 1) - mills_deriv(2.0 - h, 1)) / (2 * h), 1e-8);
    EXPECT_THROW(mills_deriv(0.0, 4), DomainError);
}

TEST(Quadrature, NormalizedAndSymmetric) {
    const QuadratureRule& r = default_rule();
    double s = 0.0;
    for (double w : r.weights) {
        EXPECT_GT(w, 0.0);
        s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r.nodes[i], -r.nodes[r.size() - 1 - i], 1e-12);
    EXPECT_NEAR(r.expect([](double z) { return z * z; }), 1.0, 1e-12);
    EXPECT_NEAR(r.expect([](double z) { return z * z * z * z; }), 3.0, 1e-11);
}

TEST(Capacity, OracleAndMonotone) {
    EXPECT_NEAR(rs_capacity(0.0), 2.0, 1e-9);
    for (const auto& r : oracles()["second_moment"]) {
        const double k = r["kappa"], ref = r["value"];
        EXPECT_NEAR(rs_second_moment(k) / ref - 1.0, 0.0, 1e-10) << k;
    }
    double prev = rs_capacity(-3.0);
    for (double k = -2.9; k <= 2.0; k += 0.1) {
        const double c = rs_capacity(k);
        EXPECT_LT(c, prev);
        prev = c;
    }
}

TEST(Gardner, MatchesGridOracle) {
    for (const auto& r : oracles()["gardner"]) {
        const GardnerResult g = gardner_rs(r["alpha"], r["kappa"]);
        ASSERT_FALSE(g.minus_infinity);
        EXPECT_NEAR(g.value, double(r["value"]), 1e-9);
        EXPECT_NEAR(g.q_star, double(r["q_star"]), 1e-5);
    }
}

TEST(Gardner, Limits) {
    const GardnerResult small = gardner_rs(1e-6, -0.5);
    EXPECT_NEAR(small.value, 0.0, 1e-5);
    EXPECT_NEAR(small.q_star, 0.0, 1e-3);
    EXPECT_TRUE(gardner_rs(1.1 * rs_capacity(-0.5), -0.5).minus_infinity);
    EXPECT_THROW(gardner_rs(0.0, 0.0), DomainError);
}
