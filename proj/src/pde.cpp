#include "percamp/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include "percamp/container.hpp"
#include "percamp/error.hpp"
#include "percamp/parallel.hpp"

namespace percamp {

namespace {

Jet gauss_tail_jet(double kappa, double y, double lambda) {
    const double sl = std::sqrt(lambda);
    const double z = (kappa - y) / sl;
    const MillsJet a = mills_jet(z);
    return {log_gauss_tail(z), a.a / sl, -a.d1 / lambda, a.d2 / (lambda * sl)};
}

void insert_unique(std::vector<double>& v, double t) {
    for (double u : v)
        if (std::abs(u - t) <= 1e-13) return;
    v.push_back(t);
}

}  // namespace

// ---------------------------------------------------------------- grid spec

double PdeGridSpec::default_x_min(double kappa) { return kappa - 12.0; }

double PdeGridSpec::default_x_max(double kappa) {
    const double a = std::abs(kappa);
    return std::max(kappa + 12.0 + 6.0 * std::max(1.0, a), kappa + 9.0 + 8.0 * a);
}

PdeGridSpec PdeGridSpec::make(const Fop& g, double kappa, double dt_max, int nx,
                              const std::vector<double>& extra_times) {
    if (!(dt_max > 0.0)) throw DomainError("PdeGridSpec: dt_max must be positive");
    PdeGridSpec s;
    s.x_min = default_x_min(kappa);
    s.x_max = default_x_max(kappa);
    s.nx = nx;
    const double qb = g.q_bar();
    std::vector<double> t{0.0};
    for (std::size_t i = 0; i < g.q_bar_index(); ++i) {
        const double a = g.piece_start(i), b = g.piece_end(i);
        const int k = std::max(1, int(std::ceil((b - a) / dt_max - 1e-9)));
        for (int j = 1; j < k; ++j) t.push_back(a + (b - a) * j / k);
        t.push_back(b);
    }
    for (double e : extra_times) {
        if (e < 0.0 || e > qb) throw DomainError("PdeGridSpec: extra time outside [0, q_bar]");
        insert_unique(t, e);
    }
    std::sort(t.begin(), t.end());
    s.t_nodes = std::move(t);
    return s;
}

PdeGridSpec PdeGridSpec::coarse(const Fop& g, double kappa, int nx) {
    PdeGridSpec s;
    s.x_min = default_x_min(kappa);
    s.x_max = default_x_max(kappa);
    s.nx = nx;
    s.t_nodes = {0.0};
    for (std::size_t i = 0; i < g.q_bar_index(); ++i) s.t_nodes.push_back(g.piece_end(i));
    return s;
}

void PdeGridSpec::validate(const Fop& g, double kappa) const {
    const double qb = g.q_bar();
    if (nx < 5) throw ValidationError("PdeGridSpec: nx must be at least 5");
    if (!(x_min < kappa - 8.0 * std::sqrt(1.0 - qb)))
        throw ValidationError("PdeGridSpec: x_min does not cover kappa - 8 sqrt(1 - q_bar)");
    if (!(x_max > kappa + 8.0 + 8.0 * std::abs(kappa)))
        throw ValidationError("PdeGridSpec: x_max does not cover kappa + 8 + 8|kappa|");
    if (t_nodes.empty() || t_nodes.front() != 0.0 || t_nodes.back() != qb)
        throw ValidationError("PdeGridSpec: t_nodes must run from 0 to q_bar");
    for (std::size_t k = 1; k < t_nodes.size(); ++k)
        if (!(t_nodes[k] > t_nodes[k - 1]))
            throw ValidationError("PdeGridSpec: t_nodes not strictly increasing");
    for (std::size_t i = 0; i < g.q_bar_index(); ++i) {
        const double b = g.piece_end(i);
        if (!std::binary_search(t_nodes.begin(), t_nodes.end(), b))
            throw ValidationError("PdeGridSpec: breakpoint missing from t_nodes");
    }
}

// ---------------------------------------------------------------- rows

RowView::RowView(const double* phi, const double* d1, const double* d2, const double* d3,
                 double x_min, double dx, int nx, double kappa, double lambda, EdgeFit left,
                 EdgeFit right)
    : phi_(phi), d1_(d1), d2_(d2), d3_(d3), x_min_(x_min), x_max_(x_min + dx * (nx - 1)),
      dx_(dx), inv_dx_(1.0 / dx), nx_(nx), kappa_(kappa), lambda_(lambda), left_(left),
      right_(right) {}

Jet RowView::continuation(double y, const EdgeFit& e) const {
    Jet c = gauss_tail_jet(kappa_, y, lambda_);
    const double d = y - e.x_edge;
    c.f += e.c0 + d * (e.c1 + d * e.c2);
    c.d1 += e.c1 + 2.0 * e.c2 * d;
    c.d2 += 2.0 * e.c2;
    return c;
}

Jet RowView::jet(double y) const {
    if (y < x_min_) return continuation(y, left_);
    if (y > x_max_) return continuation(y, right_);
    const double s = (y - x_min_) * inv_dx_;
    int j = int(s);
    if (j > nx_ - 2) j = nx_ - 2;
    const double u = s - j;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h10 = (u3 - 2 * u2 + u) * dx_;
    const double h01 = -2 * u3 + 3 * u2, h11 = (u3 - u2) * dx_;
    Jet r;
    r.f = h00 * phi_[j] + h10 * d1_[j] + h01 * phi_[j + 1] + h11 * d1_[j + 1];
    r.d1 = h00 * d1_[j] + h10 * d2_[j] + h01 * d1_[j + 1] + h11 * d2_[j + 1];
    r.d2 = h00 * d2_[j] + h10 * d3_[j] + h01 * d2_[j + 1] + h11 * d3_[j + 1];
    int b = std::clamp(j - 1, 0, nx_ - 4);
    const double w = s - b;
    const double l0 = -(w - 1) * (w - 2) * (w - 3) / 6.0;
    const double l1 = w * (w - 2) * (w - 3) / 2.0;
    const double l2 = -w * (w - 1) * (w - 3) / 2.0;
    const double l3 = w * (w - 1) * (w - 2) / 6.0;
    r.d3 = l0 * d3_[b] + l1 * d3_[b + 1] + l2 * d3_[b + 2] + l3 * d3_[b + 3];
    return r;
}

EdgeFit fit_edge(const Jet& at, double x_edge, double kappa, double lambda) {
    const Jet c = gauss_tail_jet(kappa, x_edge, lambda);
    EdgeFit e;
    e.x_edge = x_edge;
    e.c0 = at.f - c.f;
    e.c1 = at.d1 - c.d1;
    e.c2 = 0.5 * (at.d2 - c.d2);
    return e;
}

RowView view_of(const PdeRow& r, const PdeGridSpec& grid, double kappa) {
    const int nx = grid.nx;
    const EdgeFit l = fit_edge({r.phi[0], r.d1[0], r.d2[0], r.d3[0]}, grid.x_min, kappa, r.lambda);
    const EdgeFit rt = fit_edge({r.phi[nx - 1], r.d1[nx - 1], r.d2[nx - 1], r.d3[nx - 1]},
                                grid.x_max, kappa, r.lambda);
    return RowView(r.phi.data(), r.d1.data(), r.d2.data(), r.d3.data(), grid.x_min, grid.dx(), nx,
                   kappa, r.lambda, l, rt);
}

void cole_hopf_row(const RowView& anchor, double s, double m, const PdeGridSpec& grid,
                   const QuadratureRule& rule, double* phi, double* d1, double* d2, double* d3) {
    const std::size_t K = rule.size();
    const double x0 = grid.x_min, h = grid.dx();
    parallel_for(std::size_t(grid.nx), [&](std::size_t lo, std::size_t hi) {
        std::vector<Jet> jets(K);
        std::vector<double> th(K);
        for (std::size_t j = lo; j < hi; ++j) {
            const double x = x0 + double(j) * h;
            for (std::size_t k = 0; k < K; ++k) jets[k] = anchor.jet(x + s * rule.nodes[k]);
            if (m == 0.0) {
                double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
                for (std::size_t k = 0; k < K; ++k) {
                    const double w = rule.weights[k];
                    a0 += w * jets[k].f;
                    a1 += w * jets[k].d1;
                    a2 += w * jets[k].d2;
                    a3 += w * jets[k].d3;
                }
                phi[j] = a0;
                d1[j] = a1;
                d2[j] = a2;
                d3[j] = a3;
                continue;
            }
            double fmax = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < K; ++k) fmax = std::max(fmax, jets[k].f);
            double S = 0.0, mu1 = 0.0, mu2 = 0.0, mu3 = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                th[k] = rule.weights[k] * std::exp(m * (jets[k].f - fmax));
                S += th[k];
            }
            if (!(S > 0.0) || !std::isfinite(S))
                throw NumericalError("cole_hopf_row: quadrature weights degenerate");
            const double inv = 1.0 / S;
            for (std::size_t k = 0; k < K; ++k) {
                th[k] *= inv;
                mu1 += th[k] * jets[k].d1;
                mu2 += th[k] * jets[k].d2;
                mu3 += th[k] * jets[k].d3;
            }
            double var = 0.0, cov = 0.0, k3 = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double c = jets[k].d1 - mu1;
                var += th[k] * c * c;
                cov += th[k] * c * (jets[k].d2 - mu2);
                k3 += th[k] * c * c * c;
            }
            phi[j] = fmax + std::log(S) / m;
            d1[j] = mu1;
            d2[j] = mu2 + m * var;
            d3[j] = mu3 + 3.0 * m * cov + m * m * k3;
        }
    }, 16);
}

// ---------------------------------------------------------------- closed forms

double terminal_condition(double kappa, double q_bar, double x) {
    if (!(q_bar < 1.0)) throw DomainError("terminal_condition: q_bar must be < 1");
    return log_gauss_tail((kappa - x) / std::sqrt(1.0 - q_bar));
}

Jet closed_tail_jet(double kappa, double t, double x) {
    if (!(t < 1.0)) throw DomainError("closed tail: t must be < 1");
    return gauss_tail_jet(kappa, x, 1.0 - t);
}

double eval_closed_tail(double kappa, double t, double x, int order) {
    if (order < 0 || order > 3) throw DomainError("eval_closed_tail: order must be in 0..3");
    const Jet j = closed_tail_jet(kappa, t, x);
    return order == 0 ? j.f : order == 1 ? j.d1 : order == 2 ? j.d2 : j.d3;
}

// ---------------------------------------------------------------- solution

std::size_t PdeSolution::level_index(double t) const {
    const auto& tn = grid.t_nodes;
    auto it = std::lower_bound(tn.begin(), tn.end(), t);
    if (it != tn.end() && *it == t) return std::size_t(it - tn.begin());
    return npos;
}

RowView PdeSolution::row(std::size_t k) const {
    const std::size_t nx = std::size_t(grid.nx), off = k * nx;
    return RowView(phi.data() + off, dphi.data() + off, d2phi.data() + off, d3phi.data() + off,
                   grid.x_min, grid.dx(), grid.nx, kappa, lambda_at[k], left[k], right[k]);
}

void PdeSolution::finalize_edges() {
    const std::size_t nx = std::size_t(grid.nx);
    left.resize(nt());
    right.resize(nt());
    for (std::size_t k = 0; k < nt(); ++k) {
        const std::size_t a = k * nx, b = a + nx - 1;
        left[k] = fit_edge({phi[a], dphi[a], d2phi[a], d3phi[a]}, grid.x_min, kappa, lambda_at[k]);
        right[k] = fit_edge({phi[b], dphi[b], d2phi[b], d3phi[b]}, grid.x_max, kappa, lambda_at[k]);
    }
}

Jet PdeSolution::eval_jet(double t, double x) const {
    const double qb = gamma.q_bar();
    if (!(t >= 0.0 && t <= qb)) throw DomainError("eval: t outside [0, q_bar]");
    const auto& tn = grid.t_nodes;
    auto it = std::lower_bound(tn.begin(), tn.end(), t);
    std::size_t k1 = std::size_t(it - tn.begin());
    if (*it == t) return row(k1).jet(x);
    const std::size_t k0 = k1 - 1;
    const double w = (t - tn[k0]) / (tn[k1] - tn[k0]);
    const Jet a = row(k0).jet(x), b = row(k1).jet(x);
    return {a.f + w * (b.f - a.f), a.d1 + w * (b.d1 - a.d1), a.d2 + w * (b.d2 - a.d2),
            a.d3 + w * (b.d3 - a.d3)};
}

double PdeSolution::eval(int order, double t, double x) const {
    if (order < 0 || order > 3) throw DomainError("eval: order must be in 0..3");
    const Jet j = eval_jet(t, x);
    return order == 0 ? j.f : order == 1 ? j.d1 : order == 2 ? j.d2 : j.d3;
}

double eval(const PdeSolution& sol, int order, double t, double x) { return sol.eval(order, t, x); }

PdeRow PdeSolution::slice(double t, const QuadratureRule* rule) const {
    const double qb = gamma.q_bar();
    if (!(t >= 0.0 && t <= qb)) throw DomainError("slice: t outside [0, q_bar]");
    const std::size_t nx = std::size_t(grid.nx);
    PdeRow r;
    r.t = t;
    r.lambda = gamma.lambda(t);
    r.phi.resize(nx);
    r.d1.resize(nx);
    r.d2.resize(nx);
    r.d3.resize(nx);
    const std::size_t k = level_index(t);
    if (k != npos) {
        const std::size_t off = k * nx;
        std::copy_n(phi.begin() + off, nx, r.phi.begin());
        std::copy_n(dphi.begin() + off, nx, r.d1.begin());
        std::copy_n(d2phi.begin() + off, nx, r.d2.begin());
        std::copy_n(d3phi.begin() + off, nx, r.d3.begin());
        return r;
    }
    const std::size_t i = gamma.piece_of(t);
    const double b = gamma.piece_end(i);
    const std::size_t ka = level_index(b);
    if (ka == npos) throw ValidationError("slice: anchor level missing");
    cole_hopf_row(row(ka), std::sqrt(b - t), gamma.level(i), grid, rule ? *rule : default_rule(),
                  r.phi.data(), r.d1.data(), r.d2.data(), r.d3.data());
    return r;
}

void check_bounds(const PdeSolution& sol, const SolveOptions& opt) {
    const double tol = opt.bound_tol;
    const double lower2 = -1.0 / (1.0 - sol.gamma.q_bar());
    const std::size_t nx = std::size_t(sol.grid.nx);
    struct Worst {
        double excess = 0.0;
        std::string fam;
        double t = 0, x = 0, v = 0, b = 0;
    } worst;
    auto note = [&](double excess, const char* fam, double t, double x, double v, double b) {
        if (excess > worst.excess) worst = {excess, fam, t, x, v, b};
    };
    for (std::size_t k = 0; k < sol.nt(); ++k) {
        const double t = sol.grid.t_nodes[k], lam = sol.lambda_at[k];
        for (std::size_t j = 0; j < nx; ++j) {
            const double x = sol.grid.x(int(j));
            const std::size_t o = k * nx + j;
            const double f = sol.phi[o], d1 = sol.dphi[o], d2 = sol.d2phi[o], d3 = sol.d3phi[o];
            if (!std::isfinite(f) || !std::isfinite(d1) || !std::isfinite(d2) || !std::isfinite(d3))
                throw BoundViolation("finite", t, x, f, 0.0);
            note(f - tol, "phi<=0", t, x, f, 0.0);
            note(-d1 - tol, "dphi>=0", t, x, d1, 0.0);
            const double lb = (sol.kappa - x) / lam;
            note(lb - d1 - tol, "dphi>=(kappa-x)/lambda", t, x, d1, lb);
            note(d2 - tol, "d2phi<=0", t, x, d2, 0.0);
            note(lower2 - d2 - tol, "d2phi>=-1/(1-qbar)", t, x, d2, lower2);
            note(std::abs(d3) - opt.d3_ceiling, "|d3phi|<=ceiling", t, x, d3, opt.d3_ceiling);
        }
    }
    if (worst.excess > 0.0) throw BoundViolation(worst.fam, worst.t, worst.x, worst.v, worst.b);
}

PdeSolution solve(const Fop& g, double kappa, const PdeGridSpec& spec, const SolveOptions& opt) {
    spec.validate(g, kappa);
    const QuadratureRule& rule = opt.rule ? *opt.rule : default_rule();
    PdeSolution sol;
    sol.grid = spec;
    sol.gamma = g;
    sol.kappa = kappa;
    const std::size_t nt = spec.t_nodes.size(), nx = std::size_t(spec.nx);
    sol.phi.assign(nt * nx, 0.0);
    sol.dphi.assign(nt * nx, 0.0);
    sol.d2phi.assign(nt * nx, 0.0);
    sol.d3phi.assign(nt * nx, 0.0);
    sol.left.resize(nt);
    sol.right.resize(nt);
    sol.lambda_at.resize(nt);
    for (std::size_t k = 0; k < nt; ++k) sol.lambda_at[k] = g.lambda(spec.t_nodes[k]);

    auto fit_row = [&](std::size_t k) {
        const std::size_t a = k * nx, b = a + nx - 1;
        sol.left[k] = fit_edge({sol.phi[a], sol.dphi[a], sol.d2phi[a], sol.d3phi[a]}, spec.x_min,
                               kappa, sol.lambda_at[k]);
        sol.right[k] = fit_edge({sol.phi[b], sol.dphi[b], sol.d2phi[b], sol.d3phi[b]}, spec.x_max,
                                kappa, sol.lambda_at[k]);
    };

    const double qb = g.q_bar();
    {
        const std::size_t off = (nt - 1) * nx;
        parallel_for(nx, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t j = lo; j < hi; ++j) {
                const Jet c = closed_tail_jet(kappa, qb, spec.x(int(j)));
                sol.phi[off + j] = c.f;
                sol.dphi[off + j] = c.d1;
                sol.d2phi[off + j] = c.d2;
                sol.d3phi[off + j] = c.d3;
            }
        });
        fit_row(nt - 1);
    }
    for (std::size_t k = nt - 1; k-- > 0;) {
        const double t = spec.t_nodes[k];
        const std::size_t i = g.piece_of(t);
        const double b = g.piece_end(i);
        const std::size_t ka = sol.level_index(b);
        if (ka == PdeSolution::npos || ka <= k) throw ValidationError("solve: anchor level missing");
        const std::size_t off = k * nx;
        cole_hopf_row(sol.row(ka), std::sqrt(b - t), g.level(i), spec, rule, sol.phi.data() + off,
                      sol.dphi.data() + off, sol.d2phi.data() + off, sol.d3phi.data() + off);
        fit_row(k);
    }
    if (opt.check_bounds) check_bounds(sol, opt);
    return sol;
}

// ---------------------------------------------------------------- cache

std::uint64_t pde_cache_key(const Fop& g, double kappa, const PdeGridSpec& spec) {
    Hasher h;
    h.add(std::string("pde"))
        .add(g.breakpoints())
        .add(g.levels())
        .add(kappa)
        .add(spec.x_min)
        .add(spec.x_max)
        .add(std::uint64_t(spec.nx))
        .add(spec.t_nodes);
    return h.value();
}

void save_pde(const PdeSolution& sol, const std::string& path, std::uint64_t params_hash) {
    Container c;
    c.params_hash = params_hash;
    c.kind = "pde";
    c.x_min = sol.grid.x_min;
    c.x_max = sol.grid.x_max;
    c.nx = std::uint64_t(sol.grid.nx);
    c.t_nodes = sol.grid.t_nodes;
    c.add("kappa", {sol.kappa});
    c.add("breakpoints", sol.gamma.breakpoints());
    c.add("levels", sol.gamma.levels());
    c.add("phi", sol.phi);
    c.add("dphi", sol.dphi);
    c.add("d2phi", sol.d2phi);
    c.add("d3phi", sol.d3phi);
    write_container(c, path);
}

PdeSolution load_pde(const std::string& path) {
    const Container c = read_container(path);
    if (c.kind != "pde") throw ValidationError("load_pde: container kind is '" + c.kind + "'");
    PdeSolution sol;
    sol.grid.x_min = c.x_min;
    sol.grid.x_max = c.x_max;
    sol.grid.nx = int(c.nx);
    sol.grid.t_nodes = c.t_nodes;
    sol.kappa = c.array("kappa").at(0);
    sol.gamma = Fop(c.array("breakpoints"), c.array("levels"));
    sol.phi = c.array("phi");
    sol.dphi = c.array("dphi");
    sol.d2phi = c.array("d2phi");
    sol.d3phi = c.array("d3phi");
    const std::size_t n = sol.nt() * c.nx;
    if (sol.phi.size() != n || sol.dphi.size() != n || sol.d2phi.size() != n || sol.d3phi.size() != n)
        throw ValidationError("load_pde: array sizes inconsistent with grid");
    sol.grid.validate(sol.gamma, sol.kappa);
    sol.lambda_at.resize(sol.nt());
    for (std::size_t k = 0; k < sol.nt(); ++k) sol.lambda_at[k] = sol.gamma.lambda(sol.grid.t_nodes[k]);
    sol.finalize_edges();
    return sol;
}

PdeSolution solve_cached(const Fop& g, double kappa, const PdeGridSpec& spec,
                         const std::string& cache_dir, const SolveOptions& opt) {
    std::string dir = cache_dir;
    if (dir.empty()) {
        const char* env = std::getenv("PERCAMP_CACHE_DIR");
        if (env) dir = env;
    }
    const std::uint64_t key = pde_cache_key(g, kappa, spec);
    if (dir.empty()) return solve(g, kappa, spec, opt);
    std::filesystem::create_directories(dir);
    const std::string path = (std::filesystem::path(dir) / ("pde-" + hex64(key) + ".bin")).string();
    if (std::filesystem::exists(path)) {
        try {
            PdeSolution sol = load_pde(path);
            if (sol.gamma == g && sol.kappa == kappa && sol.grid.t_nodes == spec.t_nodes &&
                sol.grid.nx == spec.nx && sol.grid.x_min == spec.x_min && sol.grid.x_max == spec.x_max)
                return sol;
        } catch (const std::exception&) {
            // stale or corrupt entry: recompute below
        }
    }
    PdeSolution sol = solve(g, kappa, spec, opt);
    save_pde(sol, path, key);
    return sol;
}

}  // namespace percamp
