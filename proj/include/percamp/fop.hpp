#pragma once

#include <cstddef>
#include <vector>

namespace percamp {

// Piecewise-constant order parameter
//   gamma = sum_i m_i 1[q_i, q_{i+1}),  q_0 = 0, q_{n+1} = 1, m_0 = 0, m_n = 1.
// breakpoints holds q_1..q_{n+1}; levels holds m_0..m_n.
class Fop {
public:
    Fop(std::vector<double> breakpoints, std::vector<double> levels);

    static Fop step(double q);

    const std::vector<double>& breakpoints() const { return q_; }
    const std::vector<double>& levels() const { return m_; }

    // number of pieces including [0, q_1) and [q_n, 1]
    std::size_t pieces() const { return m_.size(); }
    double piece_start(std::size_t i) const { return i == 0 ? 0.0 : q_[i - 1]; }
    double piece_end(std::size_t i) const { return q_[i]; }
    double level(std::size_t i) const { return m_[i]; }

    // index of the piece containing t (right-continuous)
    std::size_t piece_of(double t) const;

    double gamma(double t) const;
    double q_under() const { return q_under_; }
    double q_bar() const { return q_bar_; }
    std::size_t q_bar_index() const { return bar_piece_; }

    double lambda(double q) const;
    // integral of 1/lambda and 1/lambda^2 over [a, b], closed form
    double inv_lambda_integral(double a, double b) const;
    double inv_lambda2_integral(double a, double b) const;

    bool operator==(const Fop& o) const { return q_ == o.q_ && m_ == o.m_; }

private:
    std::vector<double> q_;
    std::vector<double> m_;
    std::vector<double> lam_at_start_;
    double q_under_ = 0.0;
    double q_bar_ = 0.0;
    std::size_t bar_piece_ = 0;

    template <class Seg>
    double integrate_pieces(double a, double b, Seg seg) const;
};

double lambda_of(const Fop& g, double q);
double l1_distance(const Fop& a, const Fop& b);
bool strictly_increasing_on_support(const Fop& g, double min_jump = 1e-3);

}  // namespace percamp
