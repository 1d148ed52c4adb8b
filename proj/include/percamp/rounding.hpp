#pragma once

#include <cstddef>
#include <vector>

#include "percamp/disorder.hpp"

namespace percamp {

struct RoundingOptions {
    double tol = 1e-8;       // KKT residual target
    int max_iter = 50000;    // accelerated gradient iterations, all rounds together
    double screen = 0.05;    // rows with (A x)_a < kappa + screen join the working set
    int max_rounds = 50;
};

struct RoundedSolution {
    std::vector<double> sigma_star, sigma_hat, multipliers;
    double kkt_residual = 0.0;
    double primal_infeasibility = 0.0, complementarity = 0.0, dual_infeasibility = 0.0;
    double dual_gap = 0.0;
    double min_margin = 0.0;   // min_a (A sigma_hat)_a
    double norm_ratio = 0.0;   // ||sigma_hat|| / sqrt(q_bar N)
    double eps3 = 0.0;         // 1 - ||sigma_star|| / sqrt(q_bar N)
    double distance = 0.0;     // ||sigma_star - u||
    int iterations = 0, rounds = 0;
    std::size_t working_set = 0, active = 0;
    bool converged = false;
};

// argmin ||sigma - u|| subject to A sigma >= kappa, by accelerated projected
// gradient on the dual restricted to a working set of rows, followed by an
// exact solve on the active rows; rows violated by the current primal point
// are added until none remain.
RoundedSolution project_polytope(const Disorder& dis, const std::vector<double>& u, double kappa,
                                 const RoundingOptions& opt = {});

// Dense variant for a given matrix (m x n, row-major), used on small problems.
RoundedSolution project_polytope_dense(const std::vector<double>& a, std::size_t m, std::size_t n,
                                       const std::vector<double>& u, double kappa,
                                       const RoundingOptions& opt = {});

std::vector<double> rescale_to_sphere(const std::vector<double>& sigma, double q_bar);

struct VerifyReport {
    double min_margin = 0.0;
    std::size_t violations = 0;       // rows below kappa_eff - slack
    double kappa_eff = 0.0;
    double violation_norm = 0.0;      // ||(kappa 1 - A sigma)_+|| / sqrt(N)
    double norm_ratio = 0.0;
};
// kappa_eff defaults to kappa; slack is absolute.
VerifyReport verify_solution(const Disorder& dis, const std::vector<double>& sigma, double kappa,
                             double q_bar, double kappa_eff = 0.0, double slack = 0.0);

// Completes sigma_hat, min_margin, norm_ratio and eps3 of a projection result.
void finish_rounding(const Disorder& dis, RoundedSolution& r, double kappa, double q_bar);

// s_min(A)^2 by Lanczos on A^T A (alpha > 1) or A A^T (alpha < 1).
struct SminResult {
    double smin2 = 0.0;         // s_min(A)^2 = s_min(G)^2 / N
    double smax2 = 0.0;
    double predicted = 0.0;     // (sqrt(alpha) - 1)^2
    bool near_edge = false;     // |alpha - 1| < 0.05
    bool transposed = false;    // computed on A A^T
    int steps = 0;
};
SminResult smin_check(const Disorder& dis, int max_steps = 400);

// Largest eigenvalue of A^T A restricted to dense rows, by power iteration.
double power_iteration(const std::vector<double>& a, std::size_t m, std::size_t n, int iters = 200);

}  // namespace percamp
