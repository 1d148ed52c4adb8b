#include "percamp/rounding.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "percamp/error.hpp"
#include "percamp/parallel.hpp"
#include "percamp/rng.hpp"

namespace percamp {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

double power_iteration_mat(const RowMat& a, int iters) {
    if (a.rows() == 0) return 0.0;
    Vec x = Vec::Ones(a.cols()) / std::sqrt(double(a.cols()));
    double lam = 0.0;
    for (int k = 0; k < iters; ++k) {
        Vec y = a.transpose() * (a * x);
        const double nrm = y.norm();
        if (nrm == 0.0) return 0.0;
        const double next = x.dot(y);
        x = y / nrm;
        if (k > 10 && std::abs(next - lam) <= 1e-10 * next) {
            lam = next;
            break;
        }
        lam = next;
    }
    return lam;
}

// Conjugate gradients on (B B^T) z = rhs.
Vec cg_normal(const RowMat& b, const Vec& rhs, double rel_tol, int max_it) {
    Vec z = Vec::Zero(rhs.size()), r = rhs, p = r;
    double rr = r.squaredNorm();
    const double stop = rel_tol * rel_tol * std::max(rr, 1e-300);
    for (int it = 0; it < max_it && rr > stop; ++it) {
        const Vec q = b * (b.transpose() * p);
        const double alpha = rr / p.dot(q);
        z += alpha * p;
        r -= alpha * q;
        const double rr2 = r.squaredNorm();
        p = r + (rr2 / rr) * p;
        rr = rr2;
    }
    return z;
}

struct WorkResult {
    Vec lambda;
    int iterations = 0;
    bool exact = false;
};

// Dual of min 1/2 ||sigma - u||^2 s.t. Aw sigma >= kappa over the working set.
WorkResult solve_working(const RowMat& aw, const Vec& u, double kappa, Vec lam, double tol,
                         int max_iter) {
    const Eigen::Index m = aw.rows();
    WorkResult out;
    if (m == 0) {
        out.lambda = Vec();
        out.exact = true;
        return out;
    }
    if (lam.size() != m) lam = Vec::Zero(m);
    const Vec c = Vec::Constant(m, kappa) - aw * u;
    const double L = 1.01 * power_iteration_mat(aw, 300);
    if (!(L > 0.0)) throw NumericalError("project_polytope: zero working matrix");

    auto kkt = [&](const Vec& l) {
        const Vec s = aw * (u + aw.transpose() * l);
        double pinf = 0.0, comp = 0.0;
        for (Eigen::Index a = 0; a < m; ++a) {
            pinf = std::max(pinf, kappa - s[a]);
            comp = std::max(comp, l[a] * std::abs(s[a] - kappa));
        }
        return std::max(pinf, comp);
    };
    auto dual = [&](const Vec& l) { return l.dot(c) - 0.5 * (aw.transpose() * l).squaredNorm(); };

    // Exact solve on the support of lam, dropping negative multipliers and
    // adding violated rows of the working set.
    auto polish = [&](Vec& l) {
        std::vector<char> in(std::size_t(m), 0);
        for (Eigen::Index a = 0; a < m; ++a) in[std::size_t(a)] = l[a] > 0.0;
        for (int pass = 0; pass < 60; ++pass) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index a = 0; a < m; ++a)
                if (in[std::size_t(a)]) idx.push_back(a);
            Vec ls = Vec::Zero(m);
            if (!idx.empty()) {
                RowMat as(idx.size(), aw.cols());
                Vec cs(idx.size());
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    as.row(Eigen::Index(r)) = aw.row(idx[r]);
                    cs[Eigen::Index(r)] = c[idx[r]];
                }
                const Vec z = cg_normal(as, cs, 1e-14, 2000);
                for (std::size_t r = 0; r < idx.size(); ++r) ls[idx[r]] = z[Eigen::Index(r)];
            }
            bool changed = false;
            for (Eigen::Index a = 0; a < m; ++a)
                if (in[std::size_t(a)] && ls[a] < 0.0) {
                    in[std::size_t(a)] = 0;
                    changed = true;
                }
            if (changed) continue;
            const Vec s = aw * (u + aw.transpose() * ls);
            for (Eigen::Index a = 0; a < m; ++a)
                if (!in[std::size_t(a)] && s[a] < kappa - 0.1 * tol) {
                    in[std::size_t(a)] = 1;
                    changed = true;
                }
            if (!changed) {
                l = ls;
                return true;
            }
        }
        return false;
    };

    Vec y = lam, prev = lam;
    double t = 1.0, fprev = dual(lam);
    const double coarse = std::max(tol, 1e-5);
    for (int it = 0; it < max_iter; ++it) {
        const Vec g = c - aw * (aw.transpose() * y);
        Vec next = (y + g / L).cwiseMax(0.0);
        const double fnext = dual(next);
        if (fnext < fprev) {  // restart
            t = 1.0;
            y = lam;
            fprev = dual(lam);
            continue;
        }
        const double t2 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / t2) * (next - lam);
        t = t2;
        prev = lam;
        lam = next;
        fprev = fnext;
        ++out.iterations;
        if (it % 20 == 19 && kkt(lam) <= coarse) {
            Vec l2 = lam;
            if (polish(l2) && kkt(l2) <= tol) {
                out.lambda = l2;
                out.exact = true;
                return out;
            }
            if (kkt(lam) <= tol) break;
        }
    }
    Vec l2 = lam;
    if (polish(l2) && kkt(l2) <= kkt(lam)) {
        out.lambda = l2;
        out.exact = true;
    } else {
        out.lambda = lam;
    }
    return out;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size())); }
std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double norm_of(const std::vector<double>& v) {
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = v[i] * v[i];
    return std::sqrt(stable_sum(sq));
}

// Shared outer loop: rows supplies A rows by index, full computes A x for all rows.
template <class Rows, class Full>
RoundedSolution project_impl(std::size_t m, std::size_t n, const std::vector<double>& u, double kappa,
                             const RoundingOptions& opt, Rows rows, Full full) {
    if (u.size() != n) throw ValidationError("project_polytope: dimension mismatch");
    const Vec uv = to_vec(u);
    RoundedSolution r;
    r.multipliers.assign(m, 0.0);
    std::vector<double> s = full(u);
    if (!(kappa < 0.0)) {
        bool feasible = true;
        for (double v : s) feasible = feasible && v >= kappa;
        if (!feasible) throw DomainError("project_polytope: kappa >= 0 requires a feasible u");
    }
    std::vector<std::size_t> work;
    std::vector<char> in(m, 0);
    for (std::size_t a = 0; a < m; ++a)
        if (s[a] < kappa + opt.screen) {
            work.push_back(a);
            in[a] = 1;
        }
    Vec lam = Vec::Zero(Eigen::Index(work.size()));
    std::vector<double> sigma = u;
    int budget = opt.max_iter;
    for (int round = 0; round < opt.max_rounds; ++round) {
        r.rounds = round + 1;
        const RowMat aw = rows(work);
        const WorkResult w = solve_working(aw, uv, kappa, lam, opt.tol, std::max(1, budget));
        budget -= w.iterations;
        r.iterations += w.iterations;
        lam = w.lambda;
        const Vec sig = work.empty() ? uv : Vec(uv + aw.transpose() * lam);
        sigma = to_std(sig);
        s = full(sigma);
        std::vector<std::size_t> add;
        for (std::size_t a = 0; a < m; ++a)
            if (!in[a] && s[a] < kappa + 0.1 * opt.screen) add.push_back(a);
        bool violated = false;
        for (std::size_t a : add) violated = violated || s[a] < kappa - 0.1 * opt.tol;
        if (!violated) break;
        Vec grown = Vec::Zero(Eigen::Index(work.size() + add.size()));
        grown.head(lam.size()) = lam;
        for (std::size_t a : add) {
            work.push_back(a);
            in[a] = 1;
        }
        lam = grown;
        if (budget <= 0) break;
    }
    for (std::size_t k = 0; k < work.size(); ++k) r.multipliers[work[k]] = lam[Eigen::Index(k)];
    r.working_set = work.size();
    double pinf = 0.0, comp = 0.0, dinf = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
        pinf = std::max(pinf, kappa - s[a]);
        comp = std::max(comp, r.multipliers[a] * std::abs(s[a] - kappa));
        dinf = std::max(dinf, -r.multipliers[a]);
        if (r.multipliers[a] > 0.0) ++r.active;
    }
    r.primal_infeasibility = pinf;
    r.complementarity = comp;
    r.dual_infeasibility = dinf;
    r.kkt_residual = std::max({pinf, comp, dinf});
    r.converged = r.kkt_residual <= opt.tol;
    r.sigma_star = sigma;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = sigma[i] - u[i];
    r.distance = norm_of(d);
    const std::vector<double> su = full(u);
    std::vector<double> lc(m);
    for (std::size_t a = 0; a < m; ++a) lc[a] = r.multipliers[a] * (kappa - su[a]);
    const double dual = stable_sum(lc) - 0.5 * r.distance * r.distance;
    r.dual_gap = 0.5 * r.distance * r.distance - dual;
    return r;
}

}  // namespace

double power_iteration(const std::vector<double>& a, std::size_t m, std::size_t n, int iters) {
    const RowMat am = Eigen::Map<const RowMat>(a.data(), Eigen::Index(m), Eigen::Index(n));
    return power_iteration_mat(am, iters);
}

RoundedSolution project_polytope(const Disorder& dis, const std::vector<double>& u, double kappa,
                                 const RoundingOptions& opt) {
    auto rows = [&](const std::vector<std::size_t>& idx) {
        const std::vector<double> d = dis.rows_of_a(idx);
        return RowMat(Eigen::Map<const RowMat>(d.data(), Eigen::Index(idx.size()), Eigen::Index(dis.n)));
    };
    auto full = [&](const std::vector<double>& x) { return dis.apply(x); };
    return project_impl(dis.m, dis.n, u, kappa, opt, rows, full);
}

RoundedSolution project_polytope_dense(const std::vector<double>& a, std::size_t m, std::size_t n,
                                       const std::vector<double>& u, double kappa,
                                       const RoundingOptions& opt) {
    if (a.size() != m * n) throw ValidationError("project_polytope_dense: matrix size mismatch");
    const Eigen::Map<const RowMat> am(a.data(), Eigen::Index(m), Eigen::Index(n));
    auto rows = [&](const std::vector<std::size_t>& idx) {
        RowMat w(Eigen::Index(idx.size()), Eigen::Index(n));
        for (std::size_t r = 0; r < idx.size(); ++r) w.row(Eigen::Index(r)) = am.row(Eigen::Index(idx[r]));
        return w;
    };
    auto full = [&](const std::vector<double>& x) { return to_std(am * to_vec(x)); };
    return project_impl(m, n, u, kappa, opt, rows, full);
}

std::vector<double> rescale_to_sphere(const std::vector<double>& sigma, double q_bar) {
    const double nrm = norm_of(sigma);
    if (!(nrm > 0.0)) throw DomainError("rescale_to_sphere: zero vector");
    if (!(q_bar > 0.0 && q_bar <= 1.0)) throw DomainError("rescale_to_sphere: q_bar outside (0,1]");
    const double c = std::sqrt(q_bar * double(sigma.size())) / nrm;
    std::vector<double> out(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) out[i] = c * sigma[i];
    return out;
}

VerifyReport verify_solution(const Disorder& dis, const std::vector<double>& sigma, double kappa,
                             double q_bar, double kappa_eff, double slack) {
    VerifyReport v;
    v.kappa_eff = kappa_eff == 0.0 ? kappa : kappa_eff;
    const std::vector<double> s = dis.apply(sigma);
    v.min_margin = s.empty() ? 0.0 : *std::min_element(s.begin(), s.end());
    std::vector<double> sq(s.size());
    for (std::size_t a = 0; a < s.size(); ++a) {
        const double d = std::max(0.0, kappa - s[a]);
        sq[a] = d * d;
        if (s[a] < v.kappa_eff - slack) ++v.violations;
    }
    v.violation_norm = std::sqrt(stable_sum(sq) / double(dis.n));
    v.norm_ratio = norm_of(sigma) / std::sqrt(q_bar * double(dis.n));
    return v;
}

void finish_rounding(const Disorder& dis, RoundedSolution& r, double kappa, double q_bar) {
    r.sigma_hat = rescale_to_sphere(r.sigma_star, q_bar);
    const double target = std::sqrt(q_bar * double(dis.n));
    r.eps3 = 1.0 - norm_of(r.sigma_star) / target;
    const VerifyReport v = verify_solution(dis, r.sigma_hat, kappa, q_bar);
    r.min_margin = v.min_margin;
    r.norm_ratio = v.norm_ratio;
}

SminResult smin_check(const Disorder& dis, int max_steps) {
    SminResult res;
    const double alpha = double(dis.m) / double(dis.n);
    res.near_edge = std::abs(alpha - 1.0) < 0.05;
    res.transposed = dis.m < dis.n;
    res.predicted = (std::sqrt(alpha) - 1.0) * (std::sqrt(alpha) - 1.0);
    const std::size_t dim = res.transposed ? dis.m : dis.n;
    auto op = [&](const std::vector<double>& x) {
        return res.transposed ? dis.apply(dis.apply_t(x)) : dis.apply_t(dis.apply(x));
    };
    const int k = int(std::min<std::size_t>(dim, std::size_t(max_steps)));
    std::vector<std::vector<double>> q;
    std::vector<double> alpha_d, beta_d;
    std::vector<double> x(dim);
    {
        NormalSampler z(substream(dis.seed, "lanczos", 0));
        for (double& xi : x) xi = z();
        const double nr = norm_of(x);
        for (double& xi : x) xi /= nr;
    }
    q.push_back(x);
    for (int j = 0; j < k; ++j) {
        std::vector<double> w = op(q[std::size_t(j)]);
        double a = 0.0;
        for (std::size_t i = 0; i < dim; ++i) a += q[std::size_t(j)][i] * w[i];
        alpha_d.push_back(a);
        for (int rep = 0; rep < 2; ++rep)
            for (const auto& qi : q) {
                double d = 0.0;
                for (std::size_t i = 0; i < dim; ++i) d += qi[i] * w[i];
                for (std::size_t i = 0; i < dim; ++i) w[i] -= d * qi[i];
            }
        const double b = norm_of(w);
        res.steps = j + 1;
        if (j + 1 == k || b < 1e-12) break;
        beta_d.push_back(b);
        for (double& wi : w) wi /= b;
        q.push_back(std::move(w));
    }
    const int s = res.steps;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(s, s);
    for (int i = 0; i < s; ++i) {
        t(i, i) = alpha_d[std::size_t(i)];
        if (i + 1 < s) t(i, i + 1) = t(i + 1, i) = beta_d[std::size_t(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
    res.smin2 = std::max(0.0, es.eigenvalues()[0]);
    res.smax2 = es.eigenvalues()[s - 1];
    return res;
}

}  // namespace percamp
