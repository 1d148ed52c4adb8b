#include "percamp/amp.hpp"

#include <algorithm>
#include <cmath>

#include "percamp/error.hpp"
#include "percamp/parallel.hpp"

namespace percamp {

namespace {

double norm2_over(const std::vector<double>& u) {
    std::vector<double> sq(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) sq[i] = u[i] * u[i];
    return stable_sum(sq) / double(u.size());
}

double inner_over(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] * b[i];
    return stable_sum(p) / double(a.size());
}

void check_divergence(const std::vector<double>& u, double limit, int l) {
    const double r = std::sqrt(norm2_over(u));
    if (!std::isfinite(r) || r > limit)
        throw DivergenceError("amp: iterate " + std::to_string(l) + " diverged (norm/sqrt(N) = " +
                              std::to_string(r) + ")");
}

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    const double n = double(v.size());
    const double mean = stable_sum(v) / n;
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - mean) * (v[i] - mean);
    return {mean, std::sqrt(stable_sum(d) / (n - 1.0) / n)};
}

}  // namespace

AmpTrace rs_amp(const Disorder& dis, const PdeSolution& sol, int ell_under, const AmpOptions& opt) {
    if (ell_under < 1) throw ValidationError("rs_amp: ell_under must be >= 1");
    const RsNonlinearity f = rs_nonlinearity(sol);
    const std::size_t N = dis.n, M = dis.m;
    AmpTrace tr;
    tr.n = N;
    tr.m = M;
    tr.ell_under = ell_under;
    const double limit = opt.divergence;

    std::vector<double> u(N, std::sqrt(f.q_under));
    std::vector<double> fprev(M, 0.0), fcur(M), dfcur(M), v(M);
    tr.u_hist.push_back(u);
    tr.norm2.push_back(norm2_over(u));
    tr.target.push_back(f.q_under);
    for (int l = 0; l < ell_under; ++l) {
        const std::vector<double> y = dis.fused(u, [&](std::size_t a, double s) {
            const double va = s - fprev[a];
            v[a] = va;
            const Jet jt = f.row.jet(va);
            fcur[a] = f.lambda * jt.d1;
            dfcur[a] = f.lambda * jt.d2;
            return fcur[a];
        });
        const double b = stable_sum(dfcur) / double(N);
        for (std::size_t i = 0; i < N; ++i) u[i] = y[i] - b * u[i];
        check_divergence(u, limit, l + 1);
        const double n2 = norm2_over(u);
        if (opt.renormalize) {
            const double c = std::sqrt(f.q_under / n2);
            for (double& ui : u) ui *= c;
        }
        tr.onsager.push_back({b});
        if (opt.keep_v) tr.v_hist.push_back(v);
        tr.u_hist.push_back(u);
        tr.norm2.push_back(n2);
        tr.target.push_back(f.q_under);
        std::swap(fprev, fcur);
    }
    tr.f_last = fprev;
    return tr;
}

AmpTrace iamp(const Disorder& dis, const PdeSolution& sol, const Schedule& s, const AmpTrace& rs,
              const AmpOptions& opt) {
    if (rs.ell_under != s.ell_under) throw ValidationError("iamp: schedule and trace disagree on ell_under");
    if (int(rs.u_hist.size()) != rs.ell_under + 1 || rs.f_last.size() != dis.m)
        throw ValidationError("iamp: first-stage trace incomplete");
    if (s.normalizers.size() != s.q_levels.size())
        throw ValidationError("iamp: schedule normalizers missing");
    const Fop& g = sol.gamma;
    if (std::abs(s.q_bar - g.q_bar()) > 1e-12 || std::abs(s.q_under - g.q_under()) > 1e-12)
        throw ValidationError("iamp: schedule built for a different gamma");

    const std::size_t N = dis.n, M = dis.m;
    const std::size_t L = s.q_levels.size() - 1;  // incremental passes after the base pass
    const std::size_t W = L + 1;                    // tracked v indices ell_under .. ell_under + L
    const RsNonlinearity f = rs_nonlinearity(sol);
    std::vector<RowAt> rows;
    std::vector<double> lam(W), gam(W), norm(W);
    for (std::size_t j = 0; j < W; ++j) {
        rows.push_back(row_at(sol, s.q_levels[j]));
        lam[j] = g.lambda(s.q_levels[j]);
        gam[j] = g.gamma(s.q_levels[j]);
        norm[j] = std::sqrt(s.alpha * s.normalizers[j]);
        if (!(norm[j] > 0.0)) throw NumericalError("iamp: vanishing normalizer");
    }

    AmpTrace tr;
    tr.n = N;
    tr.m = M;
    tr.ell_under = s.ell_under;
    tr.first = s.ell_under;
    tr.f_last = rs.f_last;

    std::vector<double> u = rs.u_hist.back();
    std::vector<std::vector<double>> us{u};
    tr.u_hist.push_back(u);
    tr.norm2.push_back(norm2_over(u));
    tr.target.push_back(s.q_levels[0]);

    std::vector<double> mprev = rs.f_last, v(M), vprev(M), x(M), mag(M);
    std::vector<double> D(M * W, 0.0), E(M * W, 0.0);  // dx/dv^s, dm/dv^s per row
    const double dl = s.delta;
    tr.eps0 = s.eps0;

    for (std::size_t p = 0; p <= L; ++p) {
        const bool last = p == L;
        std::vector<double> mcur(M);
        const std::vector<double> y = dis.fused(u, [&](std::size_t a, double sa) {
            const double va = sa - mprev[a];
            v[a] = va;
            double* Da = &D[a * W];
            double* Ea = &E[a * W];
            if (p == 0) {
                const Jet jt = f.row.jet(va);
                x[a] = va;
                mag[a] = f.lambda * jt.d1;
                Da[0] = 1.0;
                Ea[0] = f.lambda * jt.d2;
            } else {
                const std::size_t j = p - 1;
                const double dv = va - vprev[a];
                const Jet jt = rows[j].view.jet(x[a]);
                const double aj = lam[j] * jt.d2 / norm[j], daj = lam[j] * jt.d3 / norm[j];
                const double dbj = gam[j] * jt.d2;
                mag[a] += aj * dv;
                for (std::size_t t = 0; t <= j; ++t) Ea[t] += daj * Da[t] * dv;
                Ea[j + 1] += aj;
                Ea[j] -= aj;
                x[a] += gam[j] * jt.d1 * dl + dv;
                for (std::size_t t = 0; t <= j; ++t) Da[t] *= 1.0 + dl * dbj;
                Da[j + 1] += 1.0;
                Da[j] -= 1.0;
            }
            mcur[a] = mag[a];
            return last ? 0.0 : mag[a];
        }, last ? &tr.au : nullptr);
        tr.v_hist.push_back(v);
        tr.x_hist.push_back(x);
        tr.m_hist.push_back(mcur);
        if (last) {
            for (std::size_t a = 0; a < M; ++a) tr.au[a] = v[a] + mprev[a];
            break;
        }
        std::vector<double> y1 = y;
        if (p == 0) {
            // u^{l+1} and m^l scale linearly with 1 + eps0 at the base step.
            const double bs = [&] {
                std::vector<double> col(M);
                for (std::size_t a = 0; a < M; ++a) col[a] = E[a * W];
                return stable_sum(col) / double(N);
            }();
            std::vector<double> w(N);
            for (std::size_t i = 0; i < N; ++i) w[i] = y[i] - bs * us[0][i];
            double e1 = 1.0 + s.eps0;
            if (opt.calibrate_eps0) {
                const std::vector<double> aw = dis.apply(w);
                std::vector<double> vv(M), vr(M);
                for (std::size_t a = 0; a < M; ++a) {
                    vv[a] = v[a] * v[a];
                    vr[a] = (aw[a] - mag[a]) * v[a];
                }
                const double num = stable_sum(vv), den = stable_sum(vr);
                if (!(den > 0.0)) throw NumericalError("iamp: base-step overlap is not positive");
                e1 = num / den;
                tr.eps0 = e1 - 1.0;
            }
            for (std::size_t a = 0; a < M; ++a) {
                mag[a] *= e1;
                mcur[a] = mag[a];
                E[a * W] *= e1;
            }
            for (std::size_t i = 0; i < N; ++i) y1[i] = e1 * y[i];
            tr.m_hist.back() = mcur;
        }
        std::vector<double> b(p + 1);
        std::vector<double> col(M);
        for (std::size_t t = 0; t <= p; ++t) {
            for (std::size_t a = 0; a < M; ++a) col[a] = E[a * W + t];
            b[t] = stable_sum(col) / double(N);
        }
        std::vector<double> next = std::move(y1);
        for (std::size_t t = 0; t <= p; ++t)
            for (std::size_t i = 0; i < N; ++i) next[i] -= b[t] * us[t][i];
        u = std::move(next);
        check_divergence(u, opt.divergence, s.ell_under + int(p) + 1);
        us.push_back(u);
        tr.onsager.push_back(b);
        tr.u_hist.push_back(u);
        const double n2 = norm2_over(u);
        tr.norm2.push_back(n2);
        tr.target.push_back(s.q_levels[p + 1]);
        if (std::abs(n2 - s.q_levels[p + 1]) > opt.track_tol)
            tr.warnings.push_back("iterate " + std::to_string(s.ell_under + p + 1) +
                                  ": ||u||^2/N = " + std::to_string(n2) + " vs q = " +
                                  std::to_string(s.q_levels[p + 1]));
        vprev = v;
        mprev = mcur;
    }
    return tr;
}

OverlapReport rs_overlaps(const AmpTrace& rs, const Schedule& s, int ell_max) {
    OverlapReport r;
    r.ell_max = std::min<int>(ell_max, int(rs.u_hist.size()) - 1);
    const int K = r.ell_max + 1;
    r.gram.assign(K, std::vector<double>(K, 0.0));
    for (int l = 0; l < K; ++l)
        for (int k = 0; k <= l; ++k) {
            const double v = inner_over(rs.u_hist[l], rs.u_hist[k]);
            r.gram[l][k] = r.gram[k][l] = v;
            if (k == l) {
                r.max_norm_gap = std::max(r.max_norm_gap, std::abs(v - s.q_under));
            } else {
                if (std::size_t(k) >= s.a_seq.size()) throw ValidationError("rs_overlaps: a_k not available");
                r.max_overlap_gap = std::max(r.max_overlap_gap, std::abs(v - s.a_seq[k]));
            }
        }
    return r;
}

IncrementReport increment_report(const AmpTrace& tr, const Schedule& s) {
    IncrementReport r;
    r.delta = s.delta;
    const std::size_t W = tr.v_hist.size(), M = tr.m;
    std::vector<double> dv(M), prod(M);
    auto diff = [&](std::size_t l, std::vector<double>& out) {
        for (std::size_t a = 0; a < M; ++a) out[a] = tr.v_hist[l + 1][a] - tr.v_hist[l][a];
    };
    for (std::size_t l = 0; l + 1 < W; ++l) {
        diff(l, dv);
        for (std::size_t a = 0; a < M; ++a) prod[a] = dv[a] * dv[a];
        const MeanSe q = mean_se(prod);
        r.increments.push_back({tr.first + int(l), q.mean, q.se});
        r.max_rel_gap = std::max(r.max_rel_gap, std::abs(q.mean - s.delta) / s.delta);
        // cross terms with v^j, j = l (base case) for l = 0, and 1 <= j <= l otherwise
        const std::size_t j0 = l == 0 ? 0 : 1;
        for (std::size_t j = j0; j <= l; ++j) {
            for (std::size_t a = 0; a < M; ++a) prod[a] = dv[a] * tr.v_hist[j][a];
            const MeanSe c = mean_se(prod);
            r.cross.push_back({tr.first + int(l), tr.first + int(j), c.mean, c.se});
            r.max_sigma = std::max(r.max_sigma, std::abs(c.mean) / c.se);
        }
    }
    return r;
}

std::vector<SeCheckRow> empirical_se_check(const AmpTrace& tr, const Schedule&,
                                           const PdeSolution& sol, const SdePaths& paths) {
    if (tr.au.size() != tr.m) throw ValidationError("empirical_se_check: trace has no final A u");
    if (paths.m.empty()) throw ValidationError("empirical_se_check: paths lack M_t");
    const double q = tr.target.back();
    const std::size_t k = paths.time_index(q);
    if (k == SdePaths::npos) throw ValidationError("empirical_se_check: q not recorded in paths");
    const double kappa = sol.kappa;
    struct Psi {
        const char* name;
        double (*fn)(double, double);
    };
    const Psi set[] = {
        {"identity", [](double x, double) { return x; }},
        {"square", [](double x, double) { return x * x; }},
        {"hinge", [](double x, double kp) { return std::max(0.0, kp - x); }},
        {"hinge_sq", [](double x, double kp) { return std::max(0.0, kp - x) * std::max(0.0, kp - x); }},
    };
    std::vector<SeCheckRow> out;
    std::vector<double> e(tr.m), p(paths.n_paths);
    for (const Psi& ps : set) {
        for (std::size_t a = 0; a < tr.m; ++a) e[a] = ps.fn(tr.au[a], kappa);
        for (std::size_t i = 0; i < paths.n_paths; ++i)
            p[i] = ps.fn(paths.at(paths.b, k, i) + paths.at(paths.m, k, i), kappa);
        const MeanSe me = mean_se(e), mp = mean_se(p);
        SeCheckRow r;
        r.psi = ps.name;
        r.q = q;
        r.empirical = me.mean;
        r.predicted = mp.mean;
        r.gap = std::abs(me.mean - mp.mean);
        r.mc_sigma = std::sqrt(me.se * me.se + mp.se * mp.se);
        out.push_back(r);
    }
    return out;
}

}  // namespace percamp
