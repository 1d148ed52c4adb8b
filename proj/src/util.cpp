#include <boost/random/normal_distribution.hpp>
#include <atomic>

#include "percamp/error.hpp"
#include "percamp/parallel.hpp"
#include "percamp/rng.hpp"

namespace percamp {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads = std::max(1, n); }
int threads() { return g_threads.load(); }

double stable_sum(const double* x, std::size_t n) {
    constexpr std::size_t leaf = 256;
    if (n <= leaf) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t leaves = (n + leaf - 1) / leaf;
    const std::size_t half = (leaves / 2) * leaf;
    return stable_sum(x, half) + stable_sum(x + half, n - half);
}

BoundViolation::BoundViolation(std::string fam, double t_, double x_, double v, double b)
    : std::runtime_error("bound violation [" + fam + "] at t=" + std::to_string(t_) +
                         " x=" + std::to_string(x_) + ": value " + std::to_string(v) +
                         " vs bound " + std::to_string(b)),
      family(std::move(fam)), t(t_), x(x_), value(v), bound(b) {}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t substream_key(std::uint64_t seed, std::string_view label, std::uint64_t counter) {
    return splitmix64(splitmix64(seed ^ fnv1a(label)) + counter);
}

NormalSampler::NormalSampler(Engine eng) : eng_(std::move(eng)) {}

double NormalSampler::operator()() {
    boost::random::normal_distribution<double> dist(0.0, 1.0);
    return dist(eng_);
}

}  // namespace percamp
