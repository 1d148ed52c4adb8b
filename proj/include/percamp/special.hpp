#pragma once

#include <cstddef>
#include <vector>

namespace percamp {

// log P(Z >= x) for standard Gaussian Z.
double log_gauss_tail(double x);

// Inverse Mills ratio A(x) = phi(x) / P(Z >= x).
double mills(double x);

// k-th derivative of A, k in {1, 2, 3}.
double mills_deriv(double x, int k);

// A and its first three derivatives in one pass.
struct MillsJet {
    double a, d1, d2, d3;
};
MillsJet mills_jet(double x);

double gauss_pdf(double x);
double gauss_cdf(double x);

enum class QuadratureKind { gauss_hermite_probabilist };

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    QuadratureKind kind = QuadratureKind::gauss_hermite_probabilist;

    std::size_t size() const { return nodes.size(); }

    template <class F>
    double expect(F&& f) const {
        double s = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) s += weights[k] * f(nodes[k]);
        return s;
    }
};

// Probabilist Gauss-Hermite rule, weights normalized to sum to one.
QuadratureRule gauss_hermite(int n);

// Shared 120-node rule.
const QuadratureRule& default_rule();

// E[(kappa - Z)_+^2]
double rs_second_moment(double kappa);

// 1 / E[(kappa - Z)_+^2]
double rs_capacity(double kappa);

// Bracketed replica-symmetric objective at overlap q.
double gardner_objective(double alpha, double kappa, double q,
                         const QuadratureRule& rule = default_rule());

struct GardnerResult {
    double value = 0.0;
    double q_star = 0.0;
    bool minus_infinity = false;
};

inline constexpr double gardner_guard = 1e-6;

GardnerResult gardner_rs(double alpha, double kappa);

}  // namespace percamp
