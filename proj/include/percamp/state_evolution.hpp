#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "percamp/fop.hpp"
#include "percamp/law.hpp"
#include "percamp/pde.hpp"

namespace percamp {

struct SdeOptions {
    std::size_t n_paths = 200000;
    double dt = 1e-3;
    double t_end = -1.0;  // negative: q_bar
    std::uint64_t seed = 0;
    bool antithetic = true;
    bool record_m = true;
    std::size_t record_every = 10;  // steps between recorded levels
    std::vector<double> record_times;  // extra recorded times, snapped to steps
};

// Paths are stored time-major: value(k, p) = x[k * n_paths + p].
struct SdePaths {
    std::vector<double> times;
    std::size_t n_paths = 0;
    std::vector<double> x;   // X_t
    std::vector<double> b;   // B_t (running sum of the increments used)
    std::vector<double> m;   // M_t, empty unless requested
    std::vector<double> cv1; // int 2 dPhi d2Phi dB
    std::vector<double> cv2; // int 2 d2Phi d3Phi dB
    double q_under = 0.0;

    double at(const std::vector<double>& a, std::size_t k, std::size_t p) const {
        return a[k * n_paths + p];
    }
    std::size_t time_index(double t) const;  // npos if absent
    static constexpr std::size_t npos = std::size_t(-1);
};

SdePaths simulate_sde(const PdeSolution& sol, const SdeOptions& opt);

// Monte-Carlo moments at one recorded time, with standard errors. The squared
// moments subtract the Ito control variates, which have mean exactly zero.
struct SdeMoments {
    double t = 0.0;
    double e_d1 = 0.0, se_d1 = 0.0;
    double e_d1sq = 0.0, se_d1sq = 0.0;
    double e_d2sq = 0.0, se_d2sq = 0.0;
    double e_x = 0.0, e_xsq = 0.0, se_xsq = 0.0;
};
SdeMoments sde_moments(const PdeSolution& sol, const SdePaths& paths, std::size_t k);

struct Residual {
    double t = 0.0;
    double r1 = 0.0, r2 = 0.0;
    double se1 = 0.0, se2 = 0.0;
};
struct StationarityReport {
    std::vector<Residual> curve;  // empty when q_under == q_bar
    double endpoint = 0.0;        // alpha E dPhi(q_under)^2 - q_under / lambda(q_under)^2
    double endpoint_se = 0.0;
    double max_r1 = 0.0, max_r2 = 0.0;
};
StationarityReport stationarity_residuals(const PdeSolution& sol, double alpha,
                                          const SdePaths& paths);
// Same curves from the deterministic law on n_grid uniform points of [q_under, q_bar].
StationarityReport stationarity_residuals(const PathLaw& law, double alpha, int n_grid = 41);

// Exact row at time t: a stored level when present, otherwise a Cole-Hopf slice.
struct RowAt {
    double t = 0.0;
    PdeRow owned;
    RowView view;
    RowAt() = default;
    RowAt(const RowAt&) = delete;
    RowAt& operator=(const RowAt&) = delete;
    RowAt(RowAt&&) = default;
    RowAt& operator=(RowAt&&) = default;
};
RowAt row_at(const PdeSolution& sol, double t);

// f(x) = lambda(q_under) dPhi(q_under, x) and its derivative.
struct RsNonlinearity {
    RowView row;
    PdeRow owned;
    double lambda = 1.0;
    double q_under = 0.0;
    double f(double x) const { return lambda * row.jet(x).d1; }
    double df(double x) const { return lambda * row.jet(x).d2; }
};
RsNonlinearity rs_nonlinearity(const PdeSolution& sol);

double fixed_point_check(const PdeSolution& sol, double alpha);
double psi_map(double t, const PdeSolution& sol, double alpha);
double psi_map(double t, const RsNonlinearity& f, double alpha, const QuadratureRule& rule);

struct Schedule {
    int ell_under = 0;
    double alpha = 0.0;
    double q_under = 0.0, q_bar = 0.0;
    std::vector<double> a_seq;        // a_0 .. a_{ell_under}
    double eps0 = 0.0;
    double delta = 0.0;
    std::vector<double> q_levels;     // q_{ell_under}, q_{ell_under+1}, ... <= q_bar
    std::vector<double> normalizers;  // E[a(q_j, X_{q_j})^2] per q_levels entry
    std::vector<double> normalizer_se;
    bool normalizers_mc = false;
    bool normalizers_discrete = false;
};

// Constants only (a_seq, eps0, delta, q_levels); normalizers left empty.
Schedule schedule_constants(const PdeSolution& sol, double alpha, int ell_under);
// Full schedule. Normalizers come from the SDE paths when given (their
// recorded times must contain q_levels), otherwise from the deterministic law.
Schedule build_schedule(const PdeSolution& sol, double alpha, int ell_under,
                        const SdePaths* paths = nullptr);

// Replaces the normalizers by E[a(q_j, X^delta_j)^2] for the discrete chain
// X_{j+1} = X_j + b(q_j, X_j) delta + dV_j, X_0 ~ N(0, q_under), dV_j ~ N(0, delta).
void discrete_normalizers(const PdeSolution& sol, Schedule& s, std::size_t n_samples = 1 << 20,
                          std::uint64_t seed = 0);

double conditional_mean_margin(double kappa, double q, double x);

// Discrete cavity recursions driven by V_j = B_{q_j} of the simulated paths,
// compared with (X_{q_j}, M_{q_j}). Returns the largest mean-square gaps.
struct ContinuumGap {
    double mse_x = 0.0, mse_m = 0.0;
};
ContinuumGap continuum_gap(const PdeSolution& sol, const Schedule& s, const SdePaths& paths);

}  // namespace percamp
