#include "percamp/law.hpp"

#include <algorithm>
#include <cmath>

#include "percamp/error.hpp"
#include "percamp/parallel.hpp"

namespace percamp {

namespace {

// Normalized tilted weights of the nodes x + s z_k under exp(m Phi(row, .)).
void tilted_weights(const RowView& row, const QuadratureRule& rule, double x, double s, double m,
                    double* y, Jet* jets, double* th) {
    const std::size_t K = rule.size();
    double fmax = -1e300;
    for (std::size_t k = 0; k < K; ++k) {
        y[k] = x + s * rule.nodes[k];
        jets[k] = row.jet(y[k]);
        fmax = std::max(fmax, jets[k].f);
    }
    double S = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        th[k] = m == 0.0 ? rule.weights[k] : rule.weights[k] * std::exp(m * (jets[k].f - fmax));
        S += th[k];
    }
    for (std::size_t k = 0; k < K; ++k) th[k] /= S;
}

}  // namespace

PathLaw::PathLaw(const PdeSolution& sol, const QuadratureRule* rule)
    : sol_(&sol), rule_(rule ? rule : &default_rule()) {
    const Fop& g = sol.gamma;
    T_.push_back(0.0);
    for (std::size_t i = 0; i < g.q_bar_index(); ++i) T_.push_back(g.piece_end(i));
    const std::size_t nx = std::size_t(sol.grid.nx), K = rule_->size();
    const double x0 = sol.grid.x_min, h = sol.grid.dx();
    w_.assign(T_.size(), {});

    for (std::size_t p = 0; p + 1 < T_.size(); ++p) {
        const std::size_t ka = sol.level_index(T_[p + 1]);
        if (ka == PdeSolution::npos) throw ValidationError("PathLaw: breakpoint level missing");
        const RowView row = sol.row(ka);
        const double s = std::sqrt(T_[p + 1] - T_[p]);
        const double m = g.level(p);
        const std::size_t npts = p == 0 ? 1 : nx;

        std::vector<double> ys(npts * K), ths(npts * K);
        parallel_for(npts, [&](std::size_t lo, std::size_t hi) {
            std::vector<Jet> jets(K);
            for (std::size_t j = lo; j < hi; ++j) {
                const double x = p == 0 ? 0.0 : x0 + double(j) * h;
                tilted_weights(row, *rule_, x, s, m, &ys[j * K], jets.data(), &ths[j * K]);
            }
        }, 16);

        std::vector<double> next(nx, 0.0);
        for (std::size_t j = 0; j < npts; ++j) {
            const double pj = p == 0 ? 1.0 : w_[p][j];
            if (pj == 0.0) continue;
            for (std::size_t k = 0; k < K; ++k) {
                const double mass = pj * ths[j * K + k];
                const double u = (ys[j * K + k] - x0) / h;
                if (u <= 0.0) {
                    next[0] += mass;
                    continue;
                }
                if (u >= double(nx - 1)) {
                    next[nx - 1] += mass;
                    continue;
                }
                const int jj = int(u);
                const int b = std::clamp(jj - 1, 0, int(nx) - 4);
                const double r = u - b;
                next[b] += mass * (-(r - 1) * (r - 2) * (r - 3) / 6.0);
                next[b + 1] += mass * (r * (r - 2) * (r - 3) / 2.0);
                next[b + 2] += mass * (-r * (r - 1) * (r - 3) / 2.0);
                next[b + 3] += mass * (r * (r - 1) * (r - 2) / 6.0);
            }
        }
        w_[p + 1] = std::move(next);
    }
}

std::vector<double> PathLaw::expect(double t, int nfun, const Integrand& fn) const {
    const PdeSolution& sol = *sol_;
    const std::size_t k = sol.level_index(t);
    if (k != PdeSolution::npos) return expect(t, sol.row(k), nfun, fn);
    PdeRow r = sol.slice(t, rule_);
    return expect(t, view_of(r, sol.grid, sol.kappa), nfun, fn);
}

std::vector<double> PathLaw::expect(double t, const RowView& row_t, int nfun,
                                    const Integrand& fn) const {
    const PdeSolution& sol = *sol_;
    const double qb = sol.gamma.q_bar();
    if (!(t >= 0.0 && t <= qb)) throw DomainError("PathLaw: t outside [0, q_bar]");
    auto it = std::upper_bound(T_.begin(), T_.end(), t);
    const std::size_t p = std::size_t(it - T_.begin()) - 1;
    const std::size_t nx = std::size_t(sol.grid.nx), K = rule_->size();
    const double x0 = sol.grid.x_min, h = sol.grid.dx();
    const std::size_t nf = std::size_t(nfun);
    std::vector<double> acc(nf, 0.0);

    if (T_[p] == t) {
        if (p == 0) {
            fn(0.0, row_t.jet(0.0), acc.data());
            return acc;
        }
        std::vector<double> part(nx * nf, 0.0);
        parallel_for(nx, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t j = lo; j < hi; ++j) {
                if (w_[p][j] == 0.0) continue;
                std::vector<double> tmp(nf, 0.0);
                fn(x0 + double(j) * h, row_t.node(int(j)), tmp.data());
                for (std::size_t f = 0; f < nf; ++f) part[f * nx + j] = w_[p][j] * tmp[f];
            }
        });
        for (std::size_t f = 0; f < nf; ++f) acc[f] = stable_sum(&part[f * nx], nx);
        return acc;
    }

    const double s = std::sqrt(t - T_[p]);
    const double m = sol.gamma.level(p);
    const std::size_t npts = p == 0 ? 1 : nx;
    std::vector<double> part(npts * nf, 0.0);
    parallel_for(npts, [&](std::size_t lo, std::size_t hi) {
        std::vector<Jet> jets(K);
        std::vector<double> ys(K), th(K), tmp(nf);
        for (std::size_t j = lo; j < hi; ++j) {
            const double pj = p == 0 ? 1.0 : w_[p][j];
            if (pj == 0.0) continue;
            const double x = p == 0 ? 0.0 : x0 + double(j) * h;
            tilted_weights(row_t, *rule_, x, s, m, ys.data(), jets.data(), th.data());
            std::fill(tmp.begin(), tmp.end(), 0.0);
            std::vector<double> one(nf);
            for (std::size_t k = 0; k < K; ++k) {
                std::fill(one.begin(), one.end(), 0.0);
                fn(ys[k], jets[k], one.data());
                for (std::size_t f = 0; f < nf; ++f) tmp[f] += th[k] * one[f];
            }
            for (std::size_t f = 0; f < nf; ++f) part[f * npts + j] = pj * tmp[f];
        }
    }, 16);
    for (std::size_t f = 0; f < nf; ++f) acc[f] = stable_sum(&part[f * npts], npts);
    return acc;
}

namespace {
LawStats stats_from(const std::vector<double>& v, double t, double lambda) {
    LawStats s;
    s.t = t;
    s.lambda = lambda;
    s.e_d1 = v[0];
    s.e_d1sq = v[1];
    s.e_d2sq = v[2];
    s.e_d2cube = v[3];
    s.e_d3sq = v[4];
    s.e_x = v[5];
    s.e_xsq = v[6];
    return s;
}

void stats_integrand(double x, const Jet& j, double* o) {
    o[0] += j.d1;
    o[1] += j.d1 * j.d1;
    o[2] += j.d2 * j.d2;
    o[3] += j.d2 * j.d2 * j.d2;
    o[4] += j.d3 * j.d3;
    o[5] += x;
    o[6] += x * x;
}
}  // namespace

LawStats law_stats(const PathLaw& law, double t) {
    return stats_from(law.expect(t, 7, stats_integrand), t, law.solution().gamma.lambda(t));
}

LawStats law_stats(const PathLaw& law, double t, const RowView& row_t) {
    return stats_from(law.expect(t, row_t, 7, stats_integrand), t, law.solution().gamma.lambda(t));
}

}  // namespace percamp
