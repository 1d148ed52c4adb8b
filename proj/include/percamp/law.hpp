#pragma once

#include <functional>
#include <vector>

#include "percamp/pde.hpp"

namespace percamp {

// Law of the process dX = gamma(t) dPhi(t, X) dt + dB, X_0 = 0, propagated
// deterministically on the x-grid. Within a piece of constant level m the
// transition kernel is the Gaussian kernel reweighted by exp(m Phi); the
// discrete kernel is the transpose of the Cole-Hopf quadrature operator, so
// expectations are consistent with the PDE rows to interpolation accuracy.
class PathLaw {
public:
    explicit PathLaw(const PdeSolution& sol, const QuadratureRule* rule = nullptr);

    // fn(x, jet, out) adds its nfun values for one point into out.
    using Integrand = std::function<void(double x, const Jet& j, double* out)>;
    std::vector<double> expect(double t, int nfun, const Integrand& fn) const;
    // Same, with a caller-provided row for time t (must be the exact row at t).
    std::vector<double> expect(double t, const RowView& row_t, int nfun, const Integrand& fn) const;

    // Weights of X at the breakpoint T_p on the x-grid (p >= 1).
    const std::vector<double>& weights_at(std::size_t p) const { return w_[p]; }
    const std::vector<double>& times() const { return T_; }

    const PdeSolution& solution() const { return *sol_; }

private:
    const PdeSolution* sol_;
    const QuadratureRule* rule_;
    std::vector<double> T_;               // 0, q_1, ..., q_bar
    std::vector<std::vector<double>> w_;  // grid weights per T_p (w_[0] unused)
};

struct LawStats {
    double t = 0.0;
    double lambda = 0.0;
    double e_d1 = 0.0;    // E dPhi
    double e_d1sq = 0.0;  // E dPhi^2
    double e_d2sq = 0.0;  // E (d2Phi)^2
    double e_d2cube = 0.0;
    double e_d3sq = 0.0;
    double e_x = 0.0;
    double e_xsq = 0.0;
};

LawStats law_stats(const PathLaw& law, double t);
LawStats law_stats(const PathLaw& law, double t, const RowView& row_t);

}  // namespace percamp
