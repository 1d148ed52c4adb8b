#include "percamp/variational.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_blas.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "percamp/error.hpp"
#include "percamp/special.hpp"

namespace percamp {

namespace {

double sig(double p) {
    p = std::clamp(p, -40.0, 40.0);
    return 1.0 / (1.0 + std::exp(-p));
}
double logit(double s) { return std::log(s / (1.0 - s)); }

SolveOptions fast_solve() {
    SolveOptions o;
    o.check_bounds = false;
    return o;
}

double lambda_terms(const Fop& g) {
    const double qb = g.q_bar();
    return 0.5 * g.inv_lambda_integral(0.0, qb) + 0.5 * std::log1p(-qb);
}

}  // namespace

double parisi_value(const PdeSolution& sol, double alpha) {
    return alpha * sol.eval(0, 0.0, 0.0) + lambda_terms(sol.gamma);
}

double parisi_value(const Fop& g, double kappa, double alpha, const PdeGridSpec& spec) {
    return parisi_value(solve(g, kappa, spec, fast_solve()), alpha);
}

double parisi_value(const Fop& g, double kappa, double alpha, int nx) {
    return parisi_value(g, kappa, alpha, PdeGridSpec::coarse(g, kappa, nx));
}

ParisiGradient parisi_gradient(const Fop& g, double kappa, double alpha, int nx) {
    const PdeSolution sol = solve(g, kappa, PdeGridSpec::coarse(g, kappa, nx), fast_solve());
    const PathLaw law(sol);
    ParisiGradient out;
    out.value = parisi_value(sol, alpha);
    auto R = [&](double t) {
        const double e = law.expect(t, 1, [](double, const Jet& j, double* o) { o[0] += j.d1 * j.d1; })[0];
        return alpha * e - g.inv_lambda2_integral(0.0, t);
    };
    const std::size_t qbi = g.q_bar_index();
    out.d_levels.assign(g.pieces(), 0.0);
    out.d_breakpoints.assign(qbi, 0.0);
    static const double gl_x[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static const double gl_w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    for (std::size_t i = 1; i < qbi; ++i) {
        const double a = g.piece_start(i), b = g.piece_end(i);
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += gl_w[k] * R(c + h * gl_x[k]);
        out.d_levels[i] = 0.5 * h * s;
    }
    for (std::size_t k = 0; k < qbi; ++k) {
        const double dm = g.level(k) - g.level(k + 1);
        if (dm == 0.0) continue;
        out.d_breakpoints[k] = 0.5 * dm * R(g.piece_end(k));
    }
    return out;
}

std::vector<double> functional_gradient(const PdeSolution& sol, const SdePaths& paths, double alpha) {
    const Fop& g = sol.gamma;
    const std::size_t qbi = g.q_bar_index();
    std::vector<double> out;
    // Stationarity integrand at every recorded time in [q_under, q_bar].
    std::vector<double> ts, rs;
    for (std::size_t k = 0; k < paths.times.size(); ++k) {
        const double t = paths.times[k];
        if (t < g.q_under() - 1e-12 || t > g.q_bar() + 1e-12) continue;
        const SdeMoments m = sde_moments(sol, paths, k);
        ts.push_back(t);
        rs.push_back(alpha * m.e_d1sq - g.inv_lambda2_integral(0.0, t));
    }
    for (std::size_t i = 1; i < qbi; ++i) {
        if (g.level(i) == 0.0) continue;
        const double a = g.piece_start(i), b = g.piece_end(i);
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
            const double lo = std::max(a, ts[k]), hi = std::min(b, ts[k + 1]);
            if (hi <= lo) continue;
            const double w = ts[k + 1] - ts[k];
            auto lin = [&](double t) { return rs[k] + (rs[k + 1] - rs[k]) * (t - ts[k]) / w; };
            s += 0.5 * (lin(lo) + lin(hi)) * (hi - lo);
        }
        out.push_back(0.5 * s);
    }
    return out;
}

Fop FopParams::to_fop() const {
    if (pieces < 2) throw ValidationError("FopParams: pieces must be >= 2");
    if (p.size() != std::size_t(pieces + 1)) throw ValidationError("FopParams: wrong parameter count");
    const int P = pieces;
    const double qu = std::min(sig(p[0]), q_bar_cap - 1e-9);
    const double qb = qu + (q_bar_cap - qu) * std::max(sig(p[1]), 1e-12);
    std::vector<double> br(std::size_t(P) + 1), lv(std::size_t(P) + 1);
    for (int k = 0; k < P; ++k) br[k] = k == P - 1 ? qb : qu + (qb - qu) * k / (P - 1);
    br[P] = 1.0;
    double mx = 0.0;
    for (int j = 0; j < P - 1; ++j) mx = std::max(mx, p[2 + j]);
    std::vector<double> w(P);
    double S = 0.0;
    for (int j = 0; j < P; ++j) {
        w[j] = std::exp((j < P - 1 ? p[2 + j] : 0.0) - mx);
        S += w[j];
    }
    lv[0] = 0.0;
    double c = 0.0;
    for (int k = 1; k < P; ++k) {
        c += w[k - 1] / S;
        lv[k] = std::min(c, 1.0);
    }
    lv[P] = 1.0;
    return Fop(br, lv);
}

FopParams FopParams::from_fop(const Fop& g, int pieces) {
    FopParams fp;
    fp.pieces = pieces;
    const int P = pieces;
    double qu = g.q_under(), qb = g.q_bar();
    // Level profile: piecewise linear through the midpoints of the support pieces.
    std::vector<double> tm, mm;
    for (std::size_t i = 1; i < g.q_bar_index(); ++i) {
        tm.push_back(0.5 * (g.piece_start(i) + g.piece_end(i)));
        mm.push_back(g.level(i));
    }
    if (!(qb - qu > 1e-6) || tm.empty()) {
        qu = std::max(1e-3, qu - 0.05);
        qb = std::min(q_bar_cap - 1e-3, qb + 0.05);
        tm = {qu, qb};
        mm = {0.3, 0.3};
    }
    if (tm.size() == 1 || mm.front() == mm.back()) {
        // Flat profile: a mild ramp keeps every increment away from zero.
        const double c = mm.front();
        tm = {qu, qb};
        mm = {0.85 * c, std::min(1.15 * c, 0.5 * (1.0 + c))};
    }
    auto prof = [&](double t) {
        if (t <= tm.front()) return mm.front();
        if (t >= tm.back()) return mm.back();
        std::size_t i = std::size_t(std::upper_bound(tm.begin(), tm.end(), t) - tm.begin()) - 1;
        const double r = (t - tm[i]) / (tm[i + 1] - tm[i]);
        return mm[i] + r * (mm[i + 1] - mm[i]);
    };
    std::vector<double> m(P + 1);
    m[0] = 0.0;
    for (int k = 1; k < P; ++k) m[k] = prof(qu + (qb - qu) * (k - 0.5) / (P - 1));
    m[P] = 1.0;
    std::vector<double> w(P);
    for (int j = 0; j < P; ++j) w[j] = std::max(m[j + 1] - m[j], 1e-4);
    fp.p.resize(P + 1);
    fp.p[0] = logit(qu);
    fp.p[1] = logit(std::clamp((qb - qu) / (q_bar_cap - qu), 1e-9, 1.0 - 1e-9));
    for (int j = 0; j < P - 1; ++j) fp.p[2 + j] = std::log(w[j] / w[P - 1]);
    return fp;
}

namespace {

struct Problem {
    double alpha, kappa;
    int P, nx;
    int evals = 0;
    int budget = 0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_p;
};

double eval_value(Problem& pr, const std::vector<double>& p) {
    ++pr.evals;
    FopParams fp{pr.P, p};
    double v;
    try {
        v = parisi_value(fp.to_fop(), pr.kappa, pr.alpha, pr.nx);
    } catch (const std::exception&) {
        return 1e10;
    }
    if (!std::isfinite(v)) v = 1e10;
    if (v < pr.best) pr.best = v, pr.best_p = p;
    return v;
}

double eval_grad(Problem& pr, const std::vector<double>& p, std::vector<double>& grad) {
    ++pr.evals;
    const int P = pr.P;
    FopParams fp{P, p};
    grad.assign(p.size(), 0.0);
    Fop g = fp.to_fop();
    ParisiGradient pg;
    try {
        pg = parisi_gradient(g, pr.kappa, pr.alpha, pr.nx);
    } catch (const std::exception&) {
        return 1e10;
    }
    if (!std::isfinite(pg.value)) return 1e10;
    if (pg.value < pr.best) pr.best = pg.value, pr.best_p = p;
    const double qu = g.q_under();
    const double s0 = sig(p[0]), s1 = sig(p[1]);
    double dqu = 0.0, dqb = 0.0;
    for (int k = 0; k < P; ++k) {
        const double f = double(k) / (P - 1);
        dqu += pg.d_breakpoints[k] * (1.0 - f);
        dqb += pg.d_breakpoints[k] * f;
    }
    const double dqu_dp0 = s0 * (1.0 - s0);
    grad[0] = dqu * dqu_dp0 + dqb * dqu_dp0 * (1.0 - s1);
    grad[1] = dqb * (q_bar_cap - qu) * s1 * (1.0 - s1);
    const auto& lv = g.levels();
    std::vector<double> w(P);
    for (int j = 0; j < P; ++j) w[j] = lv[j + 1] - lv[j];
    for (int j = 0; j < P - 1; ++j) {
        double s = 0.0;
        for (int k = 1; k < P; ++k) s += pg.d_levels[k] * (w[j] * (j < k ? 1.0 : 0.0) - w[j] * lv[k]);
        grad[2 + j] = s;
    }
    return pg.value;
}

std::vector<double> to_vec(const gsl_vector* v) {
    std::vector<double> out(v->size);
    for (std::size_t i = 0; i < v->size; ++i) out[i] = gsl_vector_get(v, i);
    return out;
}

double gsl_f(const gsl_vector* x, void* ctx) { return eval_value(*static_cast<Problem*>(ctx), to_vec(x)); }

void gsl_fdf(const gsl_vector* x, void* ctx, double* f, gsl_vector* g) {
    std::vector<double> grad;
    *f = eval_grad(*static_cast<Problem*>(ctx), to_vec(x), grad);
    for (std::size_t i = 0; i < grad.size(); ++i) gsl_vector_set(g, i, grad[i]);
}
void gsl_df(const gsl_vector* x, void* ctx, gsl_vector* g) {
    double f;
    gsl_fdf(x, ctx, &f, g);
}

void nelder_mead(Problem& pr, std::vector<double> p0, int max_evals) {
    const std::size_t n = p0.size();
    gsl_multimin_function fn{gsl_f, n, &pr};
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* step = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, p0[i]), gsl_vector_set(step, i, 0.3);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, x, step);
    const int stop = pr.evals + max_evals;
    while (pr.evals < stop && pr.evals < pr.budget) {
        if (gsl_multimin_fminimizer_iterate(s)) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-5) == GSL_SUCCESS) break;
    }
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(x);
    gsl_vector_free(step);
}

bool bfgs(Problem& pr, std::vector<double> p0, double grad_tol) {
    const std::size_t n = p0.size();
    gsl_multimin_function_fdf fn{gsl_f, gsl_df, gsl_fdf, n, &pr};
    gsl_vector* x = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) gsl_vector_set(x, i, p0[i]);
    gsl_multimin_fdfminimizer* s =
        gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
    gsl_multimin_fdfminimizer_set(s, &fn, x, 0.05, 0.1);
    bool ok = false;
    while (pr.evals < pr.budget) {
        const int st = gsl_multimin_fdfminimizer_iterate(s);
        if (gsl_multimin_test_gradient(s->gradient, grad_tol) == GSL_SUCCESS) {
            ok = true;
            break;
        }
        if (st) {
            ok = gsl_multimin_test_gradient(s->gradient, 10 * grad_tol) == GSL_SUCCESS;
            break;
        }
    }
    gsl_multimin_fdfminimizer_free(s);
    gsl_vector_free(x);
    return ok;
}

}  // namespace

VariationalResult assess(const Fop& g, double alpha, double kappa, const MinimizeOptions& opt) {
    VariationalResult r;
    r.gamma_star = g;
    r.q_under = g.q_under();
    r.q_bar = g.q_bar();
    r.threshold = opt.threshold;
    r.min_jump = opt.min_jump;
    r.pieces = int(g.q_bar_index());
    const PdeSolution sol = solve(g, kappa, PdeGridSpec::coarse(g, kappa, opt.nx));
    r.value = parisi_value(sol, alpha);
    const PathLaw law(sol);
    const StationarityReport st = stationarity_residuals(law, alpha, 41);
    r.max_r1 = st.max_r1;
    r.max_r2 = st.max_r2;
    r.grad_residual = st.curve.empty() ? std::abs(st.endpoint) : std::max(st.max_r1, st.max_r2);
    r.fixed_point = fixed_point_check(sol, alpha);
    const GardnerResult rs = gardner_rs(alpha, kappa);
    r.rs_q = rs.q_star;
    r.infeasible = rs.minus_infinity;
    r.rs_value = rs.minus_infinity ? -std::numeric_limits<double>::infinity()
                                   : parisi_value(Fop::step(rs.q_star), kappa, alpha, opt.nx);
    r.frsb = detect_lambda_membership(r, opt.min_jump, opt.threshold);
    return r;
}

VariationalResult minimize(double alpha, double kappa, const MinimizeOptions& opt) {
    if (!(alpha > 0.0)) throw ValidationError("minimize: alpha must be positive");
    if (opt.pieces < 1) throw ValidationError("minimize: pieces must be >= 1");
    gsl_set_error_handler_off();
    const GardnerResult rs = gardner_rs(alpha, kappa);
    VariationalResult r;
    r.threshold = opt.threshold;
    r.min_jump = opt.min_jump;
    r.rs_q = rs.q_star;
    if (rs.minus_infinity) {
        r.infeasible = true;
        r.value = r.rs_value = -std::numeric_limits<double>::infinity();
        r.gamma_star = Fop::step(std::min(rs.q_star, q_bar_cap));
        r.q_under = r.q_bar = r.gamma_star.q_bar();
        return r;
    }
    const Fop rs_fop = Fop::step(rs.q_star);
    const double rs_val = parisi_value(rs_fop, kappa, alpha, opt.nx);
    if (opt.pieces == 1) {
        VariationalResult a = assess(rs_fop, alpha, kappa, opt);
        a.converged = true;
        a.evaluations = 1;
        return a;
    }

    Problem pr;
    pr.alpha = alpha;
    pr.kappa = kappa;
    pr.P = 2;
    pr.nx = opt.nx;
    pr.budget = opt.budget;
    Fop cur = opt.init ? *opt.init : rs_fop;
    bool converged = false;
    std::vector<int> ladder;
    for (int P = 2; P < opt.pieces; P *= 2) ladder.push_back(P);
    ladder.push_back(opt.pieces);
    if (opt.init && int(opt.init->q_bar_index()) == opt.pieces) ladder.assign(1, opt.pieces);
    for (std::size_t s = 0; s < ladder.size(); ++s) {
        pr.P = ladder[s];
        pr.best = std::numeric_limits<double>::infinity();
        pr.best_p.clear();
        FopParams fp = FopParams::from_fop(cur, pr.P);
        if (s == 0 && !opt.init) {
            // Seed a one-step breaking around the RS overlap.
            Fop seed({std::max(1e-3, rs.q_star - 0.05), std::min(q_bar_cap - 1e-3, rs.q_star + 0.05), 1.0},
                     {0.0, 0.3, 1.0});
            fp = FopParams::from_fop(seed, pr.P);
            nelder_mead(pr, fp.p, std::max(50, opt.budget / 8));
            if (!pr.best_p.empty()) fp.p = pr.best_p;
        }
        const double pre = pr.best;
        converged = bfgs(pr, fp.p, opt.grad_tol);
        if (!pr.best_p.empty() && pr.best <= pre) fp.p = pr.best_p;
        cur = FopParams{pr.P, fp.p}.to_fop();
        if (pr.evals >= pr.budget) break;
    }

    VariationalResult out;
    if (parisi_value(cur, kappa, alpha, opt.nx) < rs_val) {
        out = assess(cur, alpha, kappa, opt);
    } else {
        out = assess(rs_fop, alpha, kappa, opt);
    }
    out.converged = converged;
    out.evaluations = pr.evals;
    return out;
}

bool detect_lambda_membership(const VariationalResult& r, double min_jump, double threshold) {
    if (!(r.q_under < r.q_bar)) return false;
    if (!strictly_increasing_on_support(r.gamma_star, min_jump)) return false;
    return r.grad_residual <= threshold;
}

}  // namespace percamp
