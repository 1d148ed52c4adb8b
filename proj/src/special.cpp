#include "percamp/special.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "percamp/error.hpp"

namespace percamp {

namespace {

constexpr double log_sqrt_2pi = 0.91893853320467274178;
constexpr double cf_switch = 6.0;

void require_finite(double x, const char* who) {
    if (std::isnan(x)) throw DomainError(std::string(who) + ": NaN argument");
}

// A(x) - x for x > cf_switch, from the continued fraction
// A(x) = x + 1/(x + 2/(x + 3/(x + ...))), evaluated with modified Lentz.
double mills_excess_cf(double x) {
    constexpr double tiny = 1e-300;
    double f = tiny, c = tiny, d = 0.0;
    for (int j = 1; j < 5000; ++j) {
        const double a = j;
        d = x + a * d;
        if (d == 0.0) d = tiny;
        c = x + a / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return f;
}

}  // namespace

double gauss_pdf(double x) { return std::exp(-0.5 * x * x - log_sqrt_2pi); }

double gauss_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double log_gauss_tail(double x) {
    require_finite(x, "log_gauss_tail");
    if (x > cf_switch) {
        const double a = x + mills_excess_cf(x);
        return -std::log(a) - 0.5 * x * x - log_sqrt_2pi;
    }
    if (x < -cf_switch) return std::log1p(-std::exp(log_gauss_tail(-x)));
    return std::log(0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0));
}

double mills(double x) {
    require_finite(x, "mills");
    if (x > cf_switch) return x + mills_excess_cf(x);
    return std::exp(-0.5 * x * x - log_sqrt_2pi - log_gauss_tail(x));
}

MillsJet mills_jet(double x) {
    require_finite(x, "mills_jet");
    MillsJet j{};
    double excess;
    if (x > cf_switch) {
        excess = mills_excess_cf(x);
        j.a = x + excess;
    } else {
        j.a = mills(x);
        excess = j.a - x;
    }
    j.d1 = j.a * excess;
    j.d2 = (2.0 * j.a - x) * j.d1 - j.a;
    j.d3 = 2.0 * j.d1 * j.d1 - 2.0 * j.d1 + (2.0 * j.a - x) * j.d2;
    return j;
}

double mills_deriv(double x, int k) {
    if (k < 1 || k > 3) throw DomainError("mills_deriv: order must be 1, 2 or 3");
    const MillsJet j = mills_jet(x);
    return k == 1 ? j.d1 : (k == 2 ? j.d2 : j.d3);
}

QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw DomainError("gauss_hermite: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    if (n == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 1.0;
        return rule;
    }

    // Golub-Welsch seed, then Newton polish on the orthonormal recurrence.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& seeds = es.eigenvalues();

    auto eval = [n](double x, double& pn, double& dpn, double& christoffel) {
        double p0 = 1.0, p1 = x;
        christoffel = 1.0 + x * x;
        for (int k = 1; k < n - 1; ++k) {
            const double p2 = (x * p1 - std::sqrt(double(k)) * p0) / std::sqrt(double(k + 1));
            p0 = p1;
            p1 = p2;
            christoffel += p1 * p1;
        }
        // p1 = p_{n-1}, p0 = p_{n-2}; advance to p_n
        pn = (x * p1 - std::sqrt(double(n - 1)) * p0) / std::sqrt(double(n));
        dpn = std::sqrt(double(n)) * p1;
    };

    for (int i = 0; i < n; ++i) {
        double x = seeds[i];
        double pn, dpn, ch;
        for (int it = 0; it < 8; ++it) {
            eval(x, pn, dpn, ch);
            const double step = pn / dpn;
            x -= step;
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        eval(x, pn, dpn, ch);
        rule.nodes[i] = x;
        rule.weights[i] = 1.0 / ch;
    }

    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;

    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;
    return rule;
}

const QuadratureRule& default_rule() {
    static const QuadratureRule rule = gauss_hermite(120);
    return rule;
}

double rs_second_moment(double kappa) {
    require_finite(kappa, "rs_second_moment");
    if (kappa >= 0.0) {
        return (1.0 + kappa * kappa) * gauss_cdf(kappa) + kappa * gauss_pdf(kappa);
    }
    const double y = -kappa;
    const double a = mills(y);
    return gauss_pdf(y) * (1.0 + y * y - y * a) / a;
}

double rs_capacity(double kappa) { return 1.0 / rs_second_moment(kappa); }

double gardner_objective(double alpha, double kappa, double q, const QuadratureRule& rule) {
    if (!(q >= 0.0 && q < 1.0)) throw DomainError("gardner_objective: q must lie in [0,1)");
    const double sq = std::sqrt(q), sc = std::sqrt(1.0 - q);
    double e = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k)
        e += rule.weights[k] * log_gauss_tail((kappa - sq * rule.nodes[k]) / sc);
    return alpha * e + 0.5 * q / (1.0 - q) + 0.5 * std::log1p(-q);
}

GardnerResult gardner_rs(double alpha, double kappa) {
    if (!(alpha > 0.0)) throw DomainError("gardner_rs: alpha must be positive");
    const double q_max = 1.0 - gardner_guard;
    auto f = [&](double q) { return gardner_objective(alpha, kappa, q); };

    // log-spaced toward q = 1 so the guard region is resolved
    constexpr int grid = 2000;
    auto q_at = [&](int i) {
        return i == grid ? q_max : 1.0 - std::pow(gardner_guard, double(i) / grid);
    };
    int best = 0;
    double best_val = f(0.0);
    for (int i = 1; i <= grid; ++i) {
        const double v = f(q_at(i));
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }

    GardnerResult res;
    if (best == grid && alpha > rs_capacity(kappa)) {
        res.value = -std::numeric_limits<double>::infinity();
        res.q_star = q_max;
        res.minus_infinity = true;
        return res;
    }

    double lo = q_at(std::max(best - 1, 0));
    double hi = q_at(std::min(best + 1, grid));
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    double fc = f(c), fd = f(d);
    while (hi - lo > 1e-10) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    double q = 0.5 * (lo + hi);
    double v = f(q);
    for (double cand : {lo, hi, q_at(best)}) {
        const double fv = f(cand);
        if (fv < v) {
            v = fv;
            q = cand;
        }
    }
    res.value = v;
    res.q_star = q;
    return res;
}

}  // namespace percamp
