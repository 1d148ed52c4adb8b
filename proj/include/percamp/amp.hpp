#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "percamp/disorder.hpp"
#include "percamp/pde.hpp"
#include "percamp/state_evolution.hpp"

namespace percamp {

struct AmpOptions {
    bool keep_v = true;          // keep v^0 .. v^{ell-1} of the first stage
    double divergence = 10.0;    // ||u|| > divergence * sqrt(N) aborts
    double track_tol = 0.05;     // online check of ||u^l||^2 / N against q_l
    // Rescale each first-stage iterate to ||u|| = sqrt(q_under N). The norm
    // fixed point of the first stage has slope 1 + alpha E[f f''] > 1, so
    // finite-N fluctuations grow geometrically without it.
    bool renormalize = true;
    // Choose eps0 so that <(v^{l+1} - v^l) v^l>_M = 0 holds on the sample at the
    // base step (one extra product); the limit is the schedule value.
    bool calibrate_eps0 = true;
};

// u_hist[l] = u^l. For the first stage v_hist[l] = v^l (l < ell_under) and
// f_last = f(v^{ell_under - 1}). The incremental stage stores v^{ell_under} ..
// v^{ell_end}, the cavity fields x^j and magnetizations m^j alongside.
struct AmpTrace {
    std::size_t n = 0, m = 0;
    int ell_under = 0;
    int first = 0;  // iteration index of u_hist[0]
    std::vector<std::vector<double>> u_hist, v_hist, x_hist, m_hist;
    std::vector<std::vector<double>> onsager;  // per pass, b_{l,s} for the listed s
    std::vector<double> f_last;
    std::vector<double> norm2;     // ||u^l||^2 / N per stored u, before any rescaling
    std::vector<double> target;    // predicted value of norm2
    std::vector<std::string> warnings;
    std::vector<double> au;        // A u of the final iterate (incremental stage)
    double eps0 = 0.0;             // value used at the base step

    const std::vector<double>& u_final() const { return u_hist.back(); }
};

AmpTrace rs_amp(const Disorder& dis, const PdeSolution& sol, int ell_under,
                const AmpOptions& opt = {});

// Requires s.normalizers and a trace from rs_amp with the same ell_under.
AmpTrace iamp(const Disorder& dis, const PdeSolution& sol, const Schedule& s,
              const AmpTrace& rs, const AmpOptions& opt = {});

// Overlaps of the first-stage iterates against the (q_under, a_k) pattern.
struct OverlapReport {
    int ell_max = 0;
    double max_norm_gap = 0.0;     // max_l |<u^l, u^l>/N - q_under|
    double max_overlap_gap = 0.0;  // max_{k<l} |<u^l, u^k>/N - a_k|
    std::vector<std::vector<double>> gram;
};
OverlapReport rs_overlaps(const AmpTrace& rs, const Schedule& s, int ell_max);

// Increment statistics of the incremental stage with Monte-Carlo errors.
struct IncrementRow {
    int j = 0;
    double mean_sq = 0.0, se_sq = 0.0;  // <(v^{j+1} - v^j)^2>_M
};
struct CrossRow {
    int l = 0, j = 0;                   // <(v^{l+1} - v^l) v^j>_M
    double value = 0.0, se = 0.0;
};
struct IncrementReport {
    double delta = 0.0;
    std::vector<IncrementRow> increments;
    std::vector<CrossRow> cross;
    double max_rel_gap = 0.0;  // max |mean_sq - delta| / delta
    double max_sigma = 0.0;    // max |value| / se over cross rows
};
IncrementReport increment_report(const AmpTrace& tr, const Schedule& s);

// Statistic psi of A u^l against the state-evolution prediction.
struct SeCheckRow {
    std::string psi;
    double empirical = 0.0, predicted = 0.0, gap = 0.0, mc_sigma = 0.0;
    double q = 0.0;
};
std::vector<SeCheckRow> empirical_se_check(const AmpTrace& tr, const Schedule& s,
                                           const PdeSolution& sol, const SdePaths& paths);

}  // namespace percamp
