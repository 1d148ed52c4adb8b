#include "percamp/fop.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "percamp/error.hpp"

namespace percamp {

Fop::Fop(std::vector<double> breakpoints, std::vector<double> levels)
    : q_(std::move(breakpoints)), m_(std::move(levels)) {
    if (q_.size() != m_.size() || m_.size() < 2)
        throw ValidationError("Fop: need n+1 breakpoints and n+1 levels with n >= 1");
    for (std::size_t i = 0; i < q_.size(); ++i) {
        if (!std::isfinite(q_[i]) || !std::isfinite(m_[i]))
            throw ValidationError("Fop: non-finite entry");
        if (q_[i] <= 0.0 || q_[i] > 1.0)
            throw ValidationError("Fop: breakpoint " + std::to_string(i) + " outside (0,1]");
        if (i > 0 && !(q_[i] > q_[i - 1]))
            throw ValidationError("Fop: breakpoints not strictly increasing at " + std::to_string(i));
        if (m_[i] < 0.0 || m_[i] > 1.0)
            throw ValidationError("Fop: level " + std::to_string(i) + " outside [0,1]");
        if (i > 0 && m_[i] < m_[i - 1])
            throw ValidationError("Fop: levels decrease at " + std::to_string(i));
    }
    if (q_.back() != 1.0) throw ValidationError("Fop: last breakpoint must be 1");
    if (m_.front() != 0.0) throw ValidationError("Fop: first level must be 0");
    if (m_.back() != 1.0) throw ValidationError("Fop: last level must be 1");

    const std::size_t n = m_.size();
    lam_at_start_.assign(n, 0.0);
    double acc = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        acc += m_[i] * (piece_end(i) - piece_start(i));
        lam_at_start_[i] = acc;
    }
    std::size_t under = 0;
    while (m_[under] == 0.0) ++under;
    q_under_ = piece_start(under);
    bar_piece_ = 0;
    while (m_[bar_piece_] != 1.0) ++bar_piece_;
    q_bar_ = piece_start(bar_piece_);
}

Fop Fop::step(double q) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("Fop::step: q must lie in (0,1)");
    return Fop({q, 1.0}, {0.0, 1.0});
}

std::size_t Fop::piece_of(double t) const {
    auto it = std::upper_bound(q_.begin(), q_.end(), t);
    std::size_t i = std::size_t(it - q_.begin());
    return std::min(i, m_.size() - 1);
}

double Fop::gamma(double t) const { return m_[piece_of(t)]; }

double Fop::lambda(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("lambda_of: q outside [0,1]");
    if (q == 1.0) return 0.0;
    const std::size_t i = piece_of(q);
    return lam_at_start_[i] - m_[i] * (q - piece_start(i));
}

template <class Seg>
double Fop::integrate_pieces(double a, double b, Seg seg) const {
    if (!(a >= 0.0 && b <= 1.0 && a <= b)) throw DomainError("Fop: integration range invalid");
    double total = 0.0;
    for (std::size_t i = piece_of(a); i < m_.size(); ++i) {
        const double lo = std::max(a, piece_start(i));
        const double hi = std::min(b, piece_end(i));
        if (hi > lo) {
            const double la = lam_at_start_[i] - m_[i] * (lo - piece_start(i));
            const double lb = lam_at_start_[i] - m_[i] * (hi - piece_start(i));
            total += seg(m_[i], hi - lo, la, lb);
        }
        if (piece_end(i) >= b) break;
    }
    return total;
}

double Fop::inv_lambda_integral(double a, double b) const {
    return integrate_pieces(a, b, [](double m, double dq, double la, double lb) {
        if (m == 0.0) return dq / la;
        return std::log1p(m * dq / lb) / m;
    });
}

double Fop::inv_lambda2_integral(double a, double b) const {
    return integrate_pieces(a, b, [](double, double dq, double la, double lb) {
        return dq / (la * lb);
    });
}

double lambda_of(const Fop& g, double q) { return g.lambda(q); }

double l1_distance(const Fop& a, const Fop& b) {
    std::set<double> cuts{0.0, 1.0};
    cuts.insert(a.breakpoints().begin(), a.breakpoints().end());
    cuts.insert(b.breakpoints().begin(), b.breakpoints().end());
    double total = 0.0;
    for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
        const double lo = *it, hi = *std::next(it);
        const double mid = 0.5 * (lo + hi);
        total += std::abs(a.gamma(mid) - b.gamma(mid)) * (hi - lo);
    }
    return total;
}

bool strictly_increasing_on_support(const Fop& g, double min_jump) {
    if (!(g.q_under() < g.q_bar())) return false;
    std::size_t first = 0;
    while (g.level(first) == 0.0) ++first;
    const std::size_t last = g.q_bar_index() - 1;  // support levels first .. last
    if (last <= first) return false;
    for (std::size_t k = first; k < last; ++k)
        if (g.level(k + 1) - g.level(k) < min_jump) return false;
    return true;
}

}  // namespace percamp
