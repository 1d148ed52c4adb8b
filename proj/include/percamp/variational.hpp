#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "percamp/fop.hpp"
#include "percamp/law.hpp"
#include "percamp/pde.hpp"
#include "percamp/state_evolution.hpp"

namespace percamp {

inline constexpr double q_bar_cap = 1.0 - 1e-3;

// P(gamma) = alpha Phi(0,0) + 1/2 int_0^qbar dq/lambda + 1/2 log(1 - qbar).
double parisi_value(const Fop& g, double kappa, double alpha, const PdeGridSpec& spec);
double parisi_value(const Fop& g, double kappa, double alpha, int nx = 2049);
double parisi_value(const PdeSolution& sol, double alpha);

// Exact directional derivatives from the deterministic law: derivative with
// respect to each level m_1..m_{n-1} and to each breakpoint q_1..q_n.
struct ParisiGradient {
    double value = 0.0;
    std::vector<double> d_levels;       // index i -> level i (1 .. n-1)
    std::vector<double> d_breakpoints;  // index i -> breakpoint i (0 .. n-1), q_bar last
};
ParisiGradient parisi_gradient(const Fop& g, double kappa, double alpha, int nx = 2049);

// Per-segment integral of the stationarity integrand from Monte-Carlo paths,
// one entry per level inside [q_under, q_bar).
std::vector<double> functional_gradient(const PdeSolution& sol, const SdePaths& paths, double alpha);

// Unconstrained coordinates: q_under = sig(p0), q_bar = q_under + (cap - q_under) sig(p1),
// levels m_k = sum_{i<k} w_i with w = softmax(p2 .. p_n, 0).
struct FopParams {
    int pieces = 1;  // levels inside [q_under, q_bar] plus the final jump to 1
    std::vector<double> p;
    Fop to_fop() const;
    static FopParams from_fop(const Fop& g, int pieces);
};

struct MinimizeOptions {
    int pieces = 16;
    int budget = 4000;        // objective evaluations, all stages together
    double grad_tol = 1e-7;   // stop when the unconstrained gradient norm is below
    int nx = 2049;
    double threshold = 0.02;  // stationarity threshold for membership
    double min_jump = 1e-3;
    std::uint64_t seed = 0;
    std::optional<Fop> init;
};

struct VariationalResult {
    Fop gamma_star = Fop::step(0.5);
    double value = 0.0;
    double rs_value = 0.0;
    double rs_q = 0.0;
    double grad_residual = 0.0;  // max |r1|, |r2| on [q_under, q_bar] (law based)
    double max_r1 = 0.0, max_r2 = 0.0;
    double fixed_point = 0.0;
    bool frsb = false;
    bool converged = false;
    bool infeasible = false;
    double q_under = 0.0, q_bar = 0.0;
    int evaluations = 0;
    int pieces = 1;
    double threshold = 0.02, min_jump = 1e-3;
};

VariationalResult minimize(double alpha, double kappa, const MinimizeOptions& opt = {});

// Residuals and membership flag of a given gamma (no optimization).
VariationalResult assess(const Fop& g, double alpha, double kappa, const MinimizeOptions& opt = {});

bool detect_lambda_membership(const VariationalResult& r, double min_jump, double threshold = 0.02);

}  // namespace percamp
