#include <gtest/gtest.h>

#include <random>

#include "percamp/disorder.hpp"
#include "percamp/error.hpp"
#include "percamp/parallel.hpp"

using namespace percamp;

TEST(Disorder, DenseAndStreamIdentical) {
    const Disorder d = generate_disorder(300, 3.0, 5, {Storage::dense});
    const Disorder s = generate_disorder(300, 3.0, 5, {Storage::stream});
    ASSERT_TRUE(d.dense());
    ASSERT_FALSE(s.dense());
    std::vector<double> x(300);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (double& v : x) v = z(rng);
    EXPECT_EQ(d.apply(x), s.apply(x));
    std::vector<double> w(d.m);
    for (double& v : w) v = z(rng);
    EXPECT_EQ(d.apply_t(w), s.apply_t(w));
    EXPECT_EQ(d.rows_of_a({0, 17, 899}), s.rows_of_a({0, 17, 899}));
}

TEST(Disorder, Adjoint) {
    const Disorder d = generate_disorder(200, 2.5, 1);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    std::vector<double> x(d.n), w(d.m);
    for (double& v : x) v = z(rng);
    for (double& v : w) v = z(rng);
    const auto ax = d.apply(x), atw = d.apply_t(w);
    double l = 0, r = 0;
    for (std::size_t a = 0; a < d.m; ++a) l += ax[a] * w[a];
    for (std::size_t i = 0; i < d.n; ++i) r += x[i] * atw[i];
    EXPECT_NEAR(l, r, 1e-10 * std::abs(l));
}

TEST(Disorder, ThreadIndependent) {
    const Disorder d = generate_disorder(600, 4.0, 8);
    std::vector<double> x(d.n, 0.3);
    set_threads(1);
    const auto a = d.fused(x, [](std::size_t, double s) { return s * s; });
    set_threads(4);
    const auto b = d.fused(x, [](std::size_t, double s) { return s * s; });
    set_threads(1);
    EXPECT_EQ(a, b);
}

TEST(Disorder, EntryStatistics) {
    const Disorder d = generate_disorder(1000, 2.0, 3);
    const auto rows = d.rows_of_a({0, 1, 2, 3, 4, 5, 6, 7});
    double s = 0, s2 = 0;
    for (double v : rows) {
        s += v;
        s2 += v * v;
    }
    const double n = double(rows.size());
    // entries of A = G / sqrt(N) have variance 1/N
    EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n) / std::sqrt(1000.0));
    EXPECT_NEAR(s2 / n * 1000.0, 1.0, 0.05);
    EXPECT_EQ(d.m, constraints_for(1000, 2.0));
}

TEST(Disorder, MemoryCap) {
    DisorderOptions o;
    o.storage = Storage::dense;
    o.memory_cap = 1000;
    EXPECT_THROW(generate_disorder(100, 1.0, 0, o), ResourceError);
}
