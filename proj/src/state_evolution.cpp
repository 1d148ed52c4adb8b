#include "percamp/state_evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "percamp/error.hpp"
#include "percamp/parallel.hpp"
#include "percamp/rng.hpp"

namespace percamp {

namespace {

constexpr double time_eps = 1e-12;

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

// Mean and standard error; with antithetic pairs the error uses pair averages.
MeanSe mean_se(const std::vector<double>& v, bool paired) {
    const std::size_t n = v.size();
    if (n == 0) return {};
    const double mean = stable_sum(v) / double(n);
    std::vector<double> dev;
    std::size_t cnt;
    if (paired && n >= 4) {
        cnt = n / 2;
        dev.resize(cnt);
        for (std::size_t i = 0; i < cnt; ++i) {
            const double d = 0.5 * (v[2 * i] + v[2 * i + 1]) - mean;
            dev[i] = d * d;
        }
    } else {
        cnt = n;
        dev.resize(n);
        for (std::size_t i = 0; i < n; ++i) dev[i] = (v[i] - mean) * (v[i] - mean);
    }
    const double var = cnt > 1 ? stable_sum(dev) / double(cnt - 1) : 0.0;
    return {mean, std::sqrt(var / double(cnt))};
}

Jet jet_at(const PdeSolution& sol, double t, double x, const RowView* row) {
    if (row) return row->jet(x);
    return sol.eval_jet(t, x);
}

}  // namespace

std::size_t SdePaths::time_index(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t - time_eps);
    if (it != times.end() && std::abs(*it - t) <= time_eps) return std::size_t(it - times.begin());
    return npos;
}

SdePaths simulate_sde(const PdeSolution& sol, const SdeOptions& opt) {
    const Fop& g = sol.gamma;
    const double qb = g.q_bar(), qu = g.q_under();
    const double t_end = opt.t_end < 0.0 ? qb : opt.t_end;
    if (t_end > qb + time_eps) throw DomainError("simulate_sde: t_end beyond q_bar");
    if (!(opt.dt > 0.0)) throw ValidationError("simulate_sde: dt must be positive");
    if (opt.n_paths == 0) throw ValidationError("simulate_sde: n_paths must be positive");

    const auto& tn = sol.grid.t_nodes;
    std::size_t last = 0;
    while (last + 1 < tn.size() && tn[last + 1] <= t_end + time_eps) ++last;
    if (std::abs(tn[last] - t_end) > time_eps)
        throw ValidationError("simulate_sde: t_end must be a PDE time level");

    // Step grid: PDE levels, each interval split into ceil(gap / dt) sub-steps.
    struct Step {
        double t;
        std::size_t level;  // PdeSolution level or npos
        double m;           // gamma on [t, t + h)
        double h;
        double lambda;
    };
    std::vector<Step> steps;
    for (std::size_t k = 0; k < last; ++k) {
        const double gap = tn[k + 1] - tn[k];
        const int nsub = std::max(1, int(std::ceil(gap / opt.dt - 1e-9)));
        const double h = gap / nsub;
        const double m = g.level(g.piece_of(tn[k]));
        for (int s = 0; s < nsub; ++s) {
            const double t = s == 0 ? tn[k] : tn[k] + s * h;
            steps.push_back({t, s == 0 ? k : PdeSolution::npos, m, h, g.lambda(t)});
        }
    }
    const std::size_t nsteps = steps.size();

    // Recorded step indices (index nsteps means the final time).
    auto node_of = [&](std::size_t i) { return i == nsteps ? t_end : steps[i].t; };
    std::vector<char> rec(nsteps + 1, 0);
    const std::size_t every = std::max<std::size_t>(1, opt.record_every);
    for (std::size_t i = 0; i <= nsteps; ++i) {
        if (i % every == 0 || i == nsteps) rec[i] = 1;
        const double t = node_of(i);
        for (double bq : g.breakpoints())
            if (std::abs(bq - t) <= time_eps) rec[i] = 1;
        if (std::abs(t - qu) <= time_eps) rec[i] = 1;
    }
    for (double t : opt.record_times) {
        if (t > t_end + time_eps) continue;
        bool found = false;
        for (std::size_t i = 0; i <= nsteps && !found; ++i)
            if (std::abs(node_of(i) - t) <= time_eps) rec[i] = 1, found = true;
        if (!found) throw ValidationError("simulate_sde: record time is not a step time");
    }

    SdePaths out;
    out.n_paths = opt.n_paths;
    out.q_under = qu;
    std::vector<std::size_t> slot(nsteps + 1, SdePaths::npos);
    for (std::size_t i = 0; i <= nsteps; ++i)
        if (rec[i]) {
            slot[i] = out.times.size();
            out.times.push_back(node_of(i));
        }
    const std::size_t nrec = out.times.size(), np = opt.n_paths;
    out.x.assign(nrec * np, 0.0);
    out.b.assign(nrec * np, 0.0);
    out.cv1.assign(nrec * np, 0.0);
    out.cv2.assign(nrec * np, 0.0);
    if (opt.record_m) out.m.assign(nrec * np, 0.0);

    std::vector<RowView> rows(sol.nt());
    for (std::size_t k = 0; k < sol.nt(); ++k) rows[k] = sol.row(k);
    const double x_lo = sol.grid.x_min, x_hi = sol.grid.x_max;
    const double lam_u = g.lambda(qu);
    const bool anti = opt.antithetic;
    const std::size_t group = anti ? 2 : 1;
    const std::size_t ngroups = (np + group - 1) / group;

    parallel_for(ngroups, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t gi = lo; gi < hi; ++gi) {
            NormalSampler normal(substream(opt.seed, "sde", gi));
            const std::size_t p0 = gi * group;
            const std::size_t cnt = std::min(group, np - p0);
            double x[2] = {0, 0}, b[2] = {0, 0}, c1[2] = {0, 0}, c2[2] = {0, 0}, mm[2] = {0, 0};
            bool started = qu <= 0.0;
            if (started)
                for (std::size_t a = 0; a < cnt; ++a) mm[a] = lam_u * rows[0].jet(0.0).d1;
            for (std::size_t i = 0;; ++i) {
                const double t = node_of(i);
                if (!started && std::abs(t - qu) <= time_eps) {
                    started = true;
                    const std::size_t lv = i < nsteps ? steps[i].level : last;
                    for (std::size_t a = 0; a < cnt; ++a)
                        mm[a] = lam_u * jet_at(sol, t, x[a], lv == PdeSolution::npos ? nullptr : &rows[lv]).d1;
                }
                if (slot[i] != SdePaths::npos) {
                    const std::size_t o = slot[i] * np + p0;
                    for (std::size_t a = 0; a < cnt; ++a) {
                        out.x[o + a] = x[a];
                        out.b[o + a] = b[a];
                        out.cv1[o + a] = c1[a];
                        out.cv2[o + a] = c2[a];
                        if (opt.record_m) out.m[o + a] = started ? mm[a] : 0.0;
                    }
                }
                if (i == nsteps) break;
                const Step& st = steps[i];
                const double z = normal();
                const double sh = std::sqrt(st.h);
                const RowView* rv = st.level == PdeSolution::npos ? nullptr : &rows[st.level];
                for (std::size_t a = 0; a < cnt; ++a) {
                    const double db = (a == 0 ? z : -z) * sh;
                    const Jet j = jet_at(sol, st.t, x[a], rv);
                    c1[a] += 2.0 * j.d1 * j.d2 * db;
                    c2[a] += 2.0 * j.d2 * j.d3 * db;
                    if (started) mm[a] += st.lambda * j.d2 * db;
                    if (st.m != 0.0) x[a] += st.m * j.d1 * st.h;
                    x[a] += db;
                    b[a] += db;
                    if (!(x[a] > x_lo && x[a] < x_hi))
                        throw NumericalError("simulate_sde: path left the PDE window; widen the x-grid");
                }
            }
        }
    }, 64);
    return out;
}

SdeMoments sde_moments(const PdeSolution& sol, const SdePaths& paths, std::size_t k) {
    const double t = paths.times.at(k);
    const std::size_t np = paths.n_paths;
    const std::size_t lv = sol.level_index(t);
    PdeRow owned;
    RowView row;
    if (lv != PdeSolution::npos) {
        row = sol.row(lv);
    } else {
        owned = sol.slice(t);
        row = view_of(owned, sol.grid, sol.kappa);
    }
    std::vector<double> d1(np), d1sq(np), d2sq(np), xs(np), xsq(np);
    parallel_for(np, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            const double x = paths.at(paths.x, k, p);
            const Jet j = row.jet(x);
            d1[p] = j.d1;
            d1sq[p] = j.d1 * j.d1 - paths.at(paths.cv1, k, p);
            d2sq[p] = j.d2 * j.d2 - paths.at(paths.cv2, k, p);
            xs[p] = x;
            xsq[p] = x * x;
        }
    }, 1024);
    const bool paired = true;
    SdeMoments s;
    s.t = t;
    auto a = mean_se(d1, paired);
    s.e_d1 = a.mean, s.se_d1 = a.se;
    a = mean_se(d1sq, paired);
    s.e_d1sq = a.mean, s.se_d1sq = a.se;
    a = mean_se(d2sq, paired);
    s.e_d2sq = a.mean, s.se_d2sq = a.se;
    s.e_x = mean_se(xs, paired).mean;
    a = mean_se(xsq, paired);
    s.e_xsq = a.mean, s.se_xsq = a.se;
    return s;
}

namespace {
void finish(StationarityReport& r) {
    r.max_r1 = r.max_r2 = 0.0;
    for (const auto& c : r.curve) {
        r.max_r1 = std::max(r.max_r1, std::abs(c.r1));
        r.max_r2 = std::max(r.max_r2, std::abs(c.r2));
    }
}
}  // namespace

StationarityReport stationarity_residuals(const PdeSolution& sol, double alpha,
                                          const SdePaths& paths) {
    const Fop& g = sol.gamma;
    const double qu = g.q_under(), qb = g.q_bar();
    StationarityReport r;
    const std::size_t ku = paths.time_index(qu);
    if (ku == SdePaths::npos) throw ValidationError("stationarity_residuals: q_under not recorded");
    const SdeMoments mu = sde_moments(sol, paths, ku);
    const double lu = g.lambda(qu);
    r.endpoint = alpha * mu.e_d1sq - qu / (lu * lu);
    r.endpoint_se = alpha * mu.se_d1sq;
    if (qb - qu > time_eps) {
        for (std::size_t k = 0; k < paths.times.size(); ++k) {
            const double t = paths.times[k];
            if (t < qu - time_eps || t > qb + time_eps) continue;
            const SdeMoments m = k == ku ? mu : sde_moments(sol, paths, k);
            const double lam = g.lambda(t);
            Residual c;
            c.t = t;
            c.r1 = alpha * m.e_d1sq - g.inv_lambda2_integral(0.0, t);
            c.r2 = alpha * lam * lam * m.e_d2sq - 1.0;
            c.se1 = alpha * m.se_d1sq;
            c.se2 = alpha * lam * lam * m.se_d2sq;
            r.curve.push_back(c);
        }
    }
    finish(r);
    return r;
}

StationarityReport stationarity_residuals(const PathLaw& law, double alpha, int n_grid) {
    const PdeSolution& sol = law.solution();
    const Fop& g = sol.gamma;
    const double qu = g.q_under(), qb = g.q_bar();
    StationarityReport r;
    const LawStats su = law_stats(law, qu);
    const double lu = g.lambda(qu);
    r.endpoint = alpha * su.e_d1sq - qu / (lu * lu);
    if (qb - qu > time_eps) {
        const int n = std::max(2, n_grid);
        for (int i = 0; i < n; ++i) {
            const double t = i == n - 1 ? qb : qu + (qb - qu) * i / (n - 1);
            const LawStats s = i == 0 ? su : law_stats(law, t);
            Residual c;
            c.t = t;
            c.r1 = alpha * s.e_d1sq - g.inv_lambda2_integral(0.0, t);
            c.r2 = alpha * s.lambda * s.lambda * s.e_d2sq - 1.0;
            r.curve.push_back(c);
        }
    }
    finish(r);
    return r;
}

RsNonlinearity rs_nonlinearity(const PdeSolution& sol) {
    RsNonlinearity f;
    f.q_under = sol.gamma.q_under();
    f.lambda = sol.gamma.lambda(f.q_under);
    const std::size_t k = sol.level_index(f.q_under);
    if (k != PdeSolution::npos) {
        f.row = sol.row(k);
    } else {
        f.owned = sol.slice(f.q_under);
        f.row = view_of(f.owned, sol.grid, sol.kappa);
    }
    return f;
}

double fixed_point_check(const PdeSolution& sol, double alpha) {
    const RsNonlinearity f = rs_nonlinearity(sol);
    const double s = std::sqrt(f.q_under);
    const double e = default_rule().expect([&](double z) {
        const double v = f.f(s * z);
        return v * v;
    });
    return alpha * e - f.q_under;
}

double psi_map(double t, const RsNonlinearity& f, double alpha, const QuadratureRule& rule) {
    const double qu = f.q_under;
    if (t < -time_eps || t > qu + time_eps) throw DomainError("psi_map: t outside [0, q_under]");
    t = std::clamp(t, 0.0, qu);
    const double st = std::sqrt(t), sr = std::sqrt(qu - t);
    return alpha * rule.expect([&](double z) {
        const double inner = rule.expect([&](double zp) { return f.f(st * z + sr * zp); });
        return inner * inner;
    });
}

double psi_map(double t, const PdeSolution& sol, double alpha) {
    return psi_map(t, rs_nonlinearity(sol), alpha, default_rule());
}

Schedule schedule_constants(const PdeSolution& sol, double alpha, int ell_under) {
    if (ell_under < 1) throw ValidationError("build_schedule: ell_under must be >= 1");
    const RsNonlinearity f = rs_nonlinearity(sol);
    Schedule s;
    s.ell_under = ell_under;
    s.alpha = alpha;
    s.q_under = f.q_under;
    s.q_bar = sol.gamma.q_bar();
    s.a_seq.push_back(0.0);
    for (int k = 1; k <= ell_under; ++k) {
        const double prev = s.a_seq.back();
        if (prev >= s.q_under)
            throw NumericalError("build_schedule: a_k reached q_under; gamma is not stationary");
        s.a_seq.push_back(psi_map(prev, f, alpha, default_rule()));
    }
    const double a = s.a_seq.back();
    if (!(a > 0.0)) throw NumericalError("build_schedule: a_ell is not positive (degenerate gamma)");
    if (!(a < s.q_under))
        throw NumericalError("build_schedule: a_ell >= q_under; gamma is not stationary");
    s.eps0 = s.q_under / a - 1.0;
    s.delta = (s.q_under * s.q_under / (a * a) - 1.0) * s.q_under;
    for (int j = 0;; ++j) {
        const double q = s.q_under + j * s.delta;
        if (q > s.q_bar + time_eps) break;
        s.q_levels.push_back(std::min(q, s.q_bar));
        if (s.q_levels.size() > 1000000) throw ResourceError("build_schedule: too many IAMP steps");
    }
    return s;
}

Schedule build_schedule(const PdeSolution& sol, double alpha, int ell_under, const SdePaths* paths) {
    Schedule s = schedule_constants(sol, alpha, ell_under);
    const Fop& g = sol.gamma;
    s.normalizers.resize(s.q_levels.size());
    s.normalizer_se.assign(s.q_levels.size(), 0.0);
    if (paths) {
        s.normalizers_mc = true;
        for (std::size_t j = 0; j < s.q_levels.size(); ++j) {
            const double q = s.q_levels[j];
            const std::size_t k = paths->time_index(q);
            if (k == SdePaths::npos) throw ValidationError("build_schedule: q_j not recorded in paths");
            const SdeMoments m = sde_moments(sol, *paths, k);
            const double lam = g.lambda(q);
            s.normalizers[j] = lam * lam * m.e_d2sq;
            s.normalizer_se[j] = lam * lam * m.se_d2sq;
        }
    } else {
        PathLaw law(sol);
        for (std::size_t j = 0; j < s.q_levels.size(); ++j) {
            const LawStats st = law_stats(law, s.q_levels[j]);
            s.normalizers[j] = st.lambda * st.lambda * st.e_d2sq;
        }
    }
    return s;
}

RowAt row_at(const PdeSolution& sol, double t) {
    RowAt r;
    r.t = t;
    const std::size_t k = sol.level_index(t);
    if (k != PdeSolution::npos) {
        r.view = sol.row(k);
    } else {
        r.owned = sol.slice(t);
        r.view = view_of(r.owned, sol.grid, sol.kappa);
    }
    return r;
}

void discrete_normalizers(const PdeSolution& sol, Schedule& s, std::size_t n_samples,
                          std::uint64_t seed) {
    const Fop& g = sol.gamma;
    const std::size_t L = s.q_levels.size();
    if (L == 0) return;
    std::vector<RowAt> rows;
    for (double q : s.q_levels) rows.push_back(row_at(sol, q));
    const std::size_t pairs = std::max<std::size_t>(2, n_samples / 2), np = 2 * pairs;
    std::vector<double> acc(L * np);
    const double sq = std::sqrt(s.q_under), sd = std::sqrt(s.delta);
    parallel_for(pairs, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            NormalSampler z(substream(seed, "discrete-normalizer", p));
            double x[2];
            const double z0 = z();
            x[0] = sq * z0;
            x[1] = -sq * z0;
            for (std::size_t j = 0; j < L; ++j) {
                const double lam = g.lambda(s.q_levels[j]), gam = g.gamma(s.q_levels[j]);
                const double dz = j + 1 < L ? z() : 0.0;
                for (int side = 0; side < 2; ++side) {
                    const Jet jt = rows[j].view.jet(x[side]);
                    const double a = lam * jt.d2;
                    acc[j * np + 2 * p + side] = a * a;
                    x[side] += gam * jt.d1 * s.delta + (side ? -sd * dz : sd * dz);
                }
            }
        }
    }, 256);
    s.normalizers.assign(L, 0.0);
    s.normalizer_se.assign(L, 0.0);
    for (std::size_t j = 0; j < L; ++j) {
        const std::vector<double> v(acc.begin() + j * np, acc.begin() + (j + 1) * np);
        const MeanSe m = mean_se(v, true);
        s.normalizers[j] = m.mean;
        s.normalizer_se[j] = m.se;
    }
    s.normalizers_mc = true;
    s.normalizers_discrete = true;
}

double conditional_mean_margin(double kappa, double q, double x) {
    if (!(q < 1.0)) throw DomainError("conditional_mean_margin: q must be < 1");
    const double s = std::sqrt(1.0 - q);
    return x + s * mills((kappa - x) / s);
}

ContinuumGap continuum_gap(const PdeSolution& sol, const Schedule& s, const SdePaths& paths) {
    if (paths.m.empty()) throw ValidationError("continuum_gap: paths carry no M_t");
    const Fop& g = sol.gamma;
    const std::size_t L = s.q_levels.size(), np = paths.n_paths;
    std::vector<std::size_t> idx(L);
    std::vector<PdeRow> owned(L);
    std::vector<RowView> rows(L);
    for (std::size_t j = 0; j < L; ++j) {
        idx[j] = paths.time_index(s.q_levels[j]);
        if (idx[j] == SdePaths::npos) throw ValidationError("continuum_gap: q_j not recorded");
        const std::size_t lv = sol.level_index(s.q_levels[j]);
        if (lv != PdeSolution::npos) {
            rows[j] = sol.row(lv);
        } else {
            owned[j] = sol.slice(s.q_levels[j]);
            rows[j] = view_of(owned[j], sol.grid, sol.kappa);
        }
    }
    const double lu = g.lambda(s.q_under);
    std::vector<double> ex(L * np), em(L * np);
    parallel_for(np, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            double v = paths.at(paths.b, idx[0], p);
            double x = v;
            double m = (1.0 + s.eps0) * lu * rows[0].jet(v).d1;
            for (std::size_t j = 0; j < L; ++j) {
                const double dx = x - paths.at(paths.x, idx[j], p);
                const double dm = m - paths.at(paths.m, idx[j], p);
                ex[j * np + p] = dx * dx;
                em[j * np + p] = dm * dm;
                if (j + 1 == L) break;
                const double vn = paths.at(paths.b, idx[j + 1], p);
                const Jet jt = rows[j].jet(x);
                const double q = s.q_levels[j];
                const double an = g.lambda(q) * jt.d2 / std::sqrt(s.alpha * s.normalizers.at(j));
                m += an * (vn - v);
                x += g.gamma(q) * jt.d1 * s.delta + (vn - v);
                v = vn;
            }
        }
    }, 1024);
    ContinuumGap out;
    for (std::size_t j = 0; j < L; ++j) {
        out.mse_x = std::max(out.mse_x, stable_sum(&ex[j * np], np) / double(np));
        out.mse_m = std::max(out.mse_m, stable_sum(&em[j * np], np) / double(np));
    }
    return out;
}

}  // namespace percamp
