#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "common.hpp"
#include "percamp/error.hpp"
#include "percamp/rounding.hpp"

using namespace percamp;

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Primal active-set method for min 1/2 ||s - u||^2 s.t. A s >= kappa, started
// from the strictly feasible point s = 0 (kappa < 0).
Vec active_set_qp(const Mat& a, const Vec& u, double kappa) {
    const Eigen::Index m = a.rows(), n = a.cols();
    Vec s = Vec::Zero(n);
    std::vector<Eigen::Index> work;
    for (int it = 0; it < 10000; ++it) {
        Mat aw(Eigen::Index(work.size()), n);
        for (std::size_t r = 0; r < work.size(); ++r) aw.row(Eigen::Index(r)) = a.row(work[r]);
        // equality-constrained step: min 1/2||s + p - u||^2 s.t. aw p = 0
        Vec p = u - s;
        Vec lam = Vec::Zero(Eigen::Index(work.size()));
        if (!work.empty()) {
            const Mat q = aw * aw.transpose();
            lam = q.ldlt().solve(-(aw * p));
            p += aw.transpose() * lam;
        }
        if (p.norm() < 1e-13) {
            if (work.empty()) return s;
            Eigen::Index worst = 0;
            // multipliers of A s >= kappa: s - u = A^T mu, mu = -lam at p = 0
            const Vec mu = (aw * aw.transpose()).ldlt().solve(aw * (s - u));
            lam = mu;
            for (Eigen::Index r = 1; r < lam.size(); ++r)
                if (lam[r] < lam[worst]) worst = r;
            if (lam[worst] >= -1e-13) return s;
            work.erase(work.begin() + worst);
            continue;
        }
        double step = 1.0;
        Eigen::Index block = -1;
        const Vec ap = a * p, as = a * s;
        for (Eigen::Index r = 0; r < m; ++r) {
            if (std::find(work.begin(), work.end(), r) != work.end() || ap[r] >= 0.0) continue;
            const double t = (kappa - as[r]) / ap[r];
            if (t < step) {
                step = t;
                block = r;
            }
        }
        s += step * p;
        if (block >= 0) work.push_back(block);
    }
    ADD_FAILURE() << "active-set oracle did not terminate";
    return s;
}

std::vector<double> random_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> a(m * n);
    for (double& v : a) v = z(rng) / std::sqrt(double(n));
    return a;
}

}  // namespace

TEST(Rounding, FeasibleInputUnchanged) {
    const std::size_t m = 40, n = 20;
    const auto a = random_matrix(m, n, 1);
    const std::vector<double> u(n, 0.0);
    const RoundedSolution r = project_polytope_dense(a, m, n, u, -0.5);
    EXPECT_EQ(r.sigma_star, u);
    for (double l : r.multipliers) EXPECT_EQ(l, 0.0);
    EXPECT_TRUE(r.converged);
}

TEST(Rounding, SingleHalfspace) {
    const std::size_t n = 10;
    const auto a = random_matrix(1, n, 2);
    std::vector<double> u(n);
    double au = 0, aa = 0;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = -3.0 * a[i];
        au += a[i] * u[i];
        aa += a[i] * a[i];
    }
    const double kappa = -0.2;
    ASSERT_LT(au, kappa);
    const RoundedSolution r = project_polytope_dense(a, 1, n, u, kappa);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(r.sigma_star[i], u[i] + (kappa - au) / aa * a[i], 1e-12);
}

TEST(Rounding, AgreesWithQpOracles) {
    for (const auto& inst : oracles()["qp"]) {
        const std::size_t m = inst["m"], n = inst["n"];
        const double kappa = inst["kappa"];
        const auto a = inst["a"].get<std::vector<double>>();
        const auto u = inst["u"].get<std::vector<double>>();
        const auto ref = inst["sigma"].get<std::vector<double>>();
        const RoundedSolution r = project_polytope_dense(a, m, n, u, kappa);
        ASSERT_TRUE(r.converged);
        EXPECT_LE(r.kkt_residual, 1e-8);
        const Vec as = active_set_qp(Eigen::Map<const Mat>(a.data(), m, n), Eigen::Map<const Vec>(u.data(), n), kappa);
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(r.sigma_star[i], as[Eigen::Index(i)], 1e-6);
            EXPECT_NEAR(r.sigma_star[i], ref[i], 1e-6);
        }
    }
}

TEST(Rounding, ProjectionPropertiesOnDisorder) {
    const Disorder dis = generate_disorder(400, 6.0, 3);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    std::vector<double> u(dis.n);
    for (double& v : u) v = 0.8 * z(rng);
    const double kappa = -0.8;
    const RoundedSolution r = project_polytope(dis, u, kappa);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.kkt_residual, 1e-8);
    EXPECT_LE(std::abs(r.dual_gap), 10 * 1e-8 * double(dis.n));
    // variational inequality against random feasible points t * sigma_star + small noise scaled to feasibility
    std::uniform_real_distribution<double> ut(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> s(dis.n);
        const double t = ut(rng);
        for (std::size_t i = 0; i < dis.n; ++i) s[i] = t * r.sigma_star[i];  // convex combination with 0
        double lhs = 0, dn = 0;
        for (std::size_t i = 0; i < dis.n; ++i) {
            lhs += (r.sigma_star[i] - u[i]) * (s[i] - r.sigma_star[i]);
            dn += (s[i] - r.sigma_star[i]) * (s[i] - r.sigma_star[i]);
        }
        EXPECT_GE(lhs, -1e-8 * std::sqrt(dn));
    }
    // distance bound through the smallest singular value
    const std::vector<double> au = dis.apply(u);
    double viol2 = 0;
    for (double v : au) viol2 += std::max(0.0, kappa - v) * std::max(0.0, kappa - v);
    const SminResult sm = smin_check(dis);
    EXPECT_LE(r.distance * r.distance, 2.0 * viol2 / sm.smin2);
}

TEST(Rounding, RescaleAndVerify) {
    const Disorder dis = generate_disorder(300, 3.0, 7);
    std::vector<double> u(dis.n, 0.4);
    RoundedSolution r = project_polytope(dis, u, -0.7);
    finish_rounding(dis, r, -0.7, 0.5);
    EXPECT_NEAR(norm2(r.sigma_hat), std::sqrt(0.5 * dis.n), 1e-10);
    const VerifyReport v = verify_solution(dis, r.sigma_hat, -0.7, 0.5, -0.7 / (1.0 - r.eps3), 1e-12);
    EXPECT_EQ(v.violations, 0u);
    std::vector<double> twice = r.sigma_star;
    for (double& x : twice) x *= 2;
    EXPECT_EQ(rescale_to_sphere(twice, 0.5), rescale_to_sphere(r.sigma_star, 0.5));
    EXPECT_THROW(rescale_to_sphere(std::vector<double>(5, 0.0), 0.5), DomainError);
}

TEST(Rounding, NegativeControlAndZero) {
    const Disorder dis = generate_disorder(300, 3.0, 9);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    std::vector<double> s(dis.n);
    for (double& v : s) v = z(rng);
    const VerifyReport bad = verify_solution(dis, rescale_to_sphere(s, 1.0), -0.1, 1.0);
    EXPECT_GT(bad.violations, dis.m / 10);
    const VerifyReport zero = verify_solution(dis, std::vector<double>(dis.n, 0.0), -0.1, 1.0);
    EXPECT_EQ(zero.violations, 0u);
    EXPECT_EQ(zero.norm_ratio, 0.0);
}

TEST(Smin, DenseSvdCrossCheck) {
    for (double alpha : {4.0, 0.5}) {
        const Disorder dis = generate_disorder(50, alpha, 2);
        std::vector<std::size_t> rows(dis.m);
        for (std::size_t a = 0; a < dis.m; ++a) rows[a] = a;
        const auto d = dis.rows_of_a(rows);
        const Mat a = Eigen::Map<const Mat>(d.data(), Eigen::Index(dis.m), Eigen::Index(dis.n));
        const Eigen::JacobiSVD<Mat> svd(a);
        const double smin = svd.singularValues()[svd.singularValues().size() - 1];
        const SminResult r = smin_check(dis);
        EXPECT_NEAR(r.smin2, smin * smin, 1e-8);
        EXPECT_NEAR(r.smax2, svd.singularValues()[0] * svd.singularValues()[0], 1e-8);
        EXPECT_EQ(r.transposed, alpha < 1.0);
    }
}

TEST(Smin, MarchenkoPasturEdgeTransposed) {
    const SminResult r = smin_check(generate_disorder(2000, 0.25, 4));
    EXPECT_TRUE(r.transposed);
    EXPECT_NEAR(r.smin2 / r.predicted, 1.0, 0.05);
    EXPECT_TRUE(smin_check(generate_disorder(200, 1.02, 1)).near_edge);
}
