#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "percamp/fop.hpp"
#include "percamp/special.hpp"

namespace percamp {

struct PdeGridSpec {
    double x_min = 0.0;
    double x_max = 0.0;
    int nx = 2049;
    std::vector<double> t_nodes;

    double dx() const { return (x_max - x_min) / (nx - 1); }
    double x(int j) const { return x_min + j * dx(); }

    // Default window, breakpoints plus a uniform refinement of step dt_max
    // inside each piece, plus any extra levels requested by the caller.
    static PdeGridSpec make(const Fop& g, double kappa, double dt_max = 1e-3, int nx = 2049,
                            const std::vector<double>& extra_times = {});
    // Only t = 0 and the breakpoints up to q_bar.
    static PdeGridSpec coarse(const Fop& g, double kappa, int nx = 2049);

    static double default_x_min(double kappa);
    static double default_x_max(double kappa);

    void validate(const Fop& g, double kappa) const;
};

struct Jet {
    double f = 0.0, d1 = 0.0, d2 = 0.0, d3 = 0.0;
};

// Matches log N((kappa - y)/sqrt(lambda)) plus a quadratic at one edge of a row.
struct EdgeFit {
    double x_edge = 0.0;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
};

// One time level: four arrays on the x-grid plus the continuation data.
struct PdeRow {
    double t = 0.0;
    double lambda = 1.0;
    std::vector<double> phi, d1, d2, d3;
};

class RowView {
public:
    RowView() = default;
    RowView(const double* phi, const double* d1, const double* d2, const double* d3, double x_min,
            double dx, int nx, double kappa, double lambda, EdgeFit left, EdgeFit right);

    Jet jet(double y) const;
    Jet node(int j) const { return {phi_[j], d1_[j], d2_[j], d3_[j]}; }
    int nx() const { return nx_; }
    double lambda() const { return lambda_; }

    const double* phi() const { return phi_; }
    const double* d1() const { return d1_; }
    const double* d2() const { return d2_; }
    const double* d3() const { return d3_; }

private:
    const double *phi_ = nullptr, *d1_ = nullptr, *d2_ = nullptr, *d3_ = nullptr;
    double x_min_ = 0.0, x_max_ = 0.0, dx_ = 1.0, inv_dx_ = 1.0;
    int nx_ = 0;
    double kappa_ = 0.0, lambda_ = 1.0;
    EdgeFit left_, right_;

    Jet continuation(double y, const EdgeFit& e) const;
};

struct SolveOptions {
    double bound_tol = 1e-6;
    double d3_ceiling = 1e8;
    bool check_bounds = true;
    const QuadratureRule* rule = nullptr;
};

class PdeSolution {
public:
    PdeGridSpec grid;
    Fop gamma{{0.5, 1.0}, {0.0, 1.0}};
    double kappa = 0.0;
    std::vector<double> phi, dphi, d2phi, d3phi;  // row-major (t, x)
    std::vector<double> lambda_at;                // lambda(t) per level
    std::vector<EdgeFit> left, right;             // continuation per level

    std::size_t nt() const { return grid.t_nodes.size(); }
    std::size_t level_index(double t) const;  // npos if t is not a stored level
    static constexpr std::size_t npos = std::size_t(-1);

    RowView row(std::size_t k) const;
    double eval(int order, double t, double x) const;
    Jet eval_jet(double t, double x) const;

    // Exact Cole-Hopf row at an arbitrary t in [0, q_bar].
    PdeRow slice(double t, const QuadratureRule* rule = nullptr) const;

    void finalize_edges();
};

double terminal_condition(double kappa, double q_bar, double x);
Jet closed_tail_jet(double kappa, double t, double x);
double eval_closed_tail(double kappa, double t, double x, int order);

PdeSolution solve(const Fop& g, double kappa, const PdeGridSpec& spec, const SolveOptions& opt = {});
double eval(const PdeSolution& sol, int order, double t, double x);

// Fits the edge continuation for one row.
EdgeFit fit_edge(const Jet& at_edge, double x_edge, double kappa, double lambda);
RowView view_of(const PdeRow& r, const PdeGridSpec& grid, double kappa);

// One Cole-Hopf step: row at time t from the anchor row at t + s^2, level m.
void cole_hopf_row(const RowView& anchor, double s, double m, const PdeGridSpec& grid,
                   const QuadratureRule& rule, double* phi, double* d1, double* d2, double* d3);

// Checks the four bound families; throws BoundViolation.
void check_bounds(const PdeSolution& sol, const SolveOptions& opt);

std::uint64_t pde_cache_key(const Fop& g, double kappa, const PdeGridSpec& spec);
void save_pde(const PdeSolution& sol, const std::string& path, std::uint64_t params_hash);
PdeSolution load_pde(const std::string& path);
// Looks up or fills the cache directory (PERCAMP_CACHE_DIR or the given dir).
PdeSolution solve_cached(const Fop& g, double kappa, const PdeGridSpec& spec,
                         const std::string& cache_dir, const SolveOptions& opt = {});

}  // namespace percamp
