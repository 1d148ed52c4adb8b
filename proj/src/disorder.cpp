#include "percamp/disorder.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>

#include "percamp/error.hpp"
#include "percamp/parallel.hpp"
#include "percamp/rng.hpp"

namespace percamp {

std::size_t constraints_for(std::size_t n, double alpha) {
    if (n < 1) throw ValidationError("disorder: n must be >= 1");
    if (!(alpha > 0.0)) throw ValidationError("disorder: alpha must be positive");
    const auto m = std::size_t(std::floor(alpha * double(n)));
    if (m < 1) throw ValidationError("disorder: floor(alpha n) must be >= 1");
    return m;
}

namespace {

// Counter-based stream: draw i is splitmix64(key + i).
struct CounterEngine {
    using result_type = std::uint64_t;
    std::uint64_t key, i = 0;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }
    result_type operator()() { return splitmix64(key + i++); }
};

void fill_row(std::uint64_t seed, std::size_t a, std::size_t n, std::int16_t* out) {
    CounterEngine eng{substream_key(seed, "disorder", a)};
    boost::random::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::int16_t(std::lrint(std::clamp(z(eng) * 4096.0, -32767.0, 32767.0)));
    }
}

}  // namespace

double dot_row(const std::int16_t* g, const double* x, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += double(g[i]) * x[i];
        s1 += double(g[i + 1]) * x[i + 1];
        s2 += double(g[i + 2]) * x[i + 2];
        s3 += double(g[i + 3]) * x[i + 3];
    }
    for (; i < n; ++i) s0 += double(g[i]) * x[i];
    return (s0 + s1) + (s2 + s3);
}

void axpy_row(double w, const std::int16_t* g, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += w * double(g[i]);
}

Disorder generate_disorder(std::size_t n, double alpha, std::uint64_t seed,
                           const DisorderOptions& opt) {
    Disorder d;
    d.n = n;
    d.m = constraints_for(n, alpha);
    d.seed = seed;
    d.scale_ = disorder_unit / std::sqrt(double(n));
    const double bytes = double(d.m) * double(n) * sizeof(std::int16_t);
    bool dense = opt.storage == Storage::dense ||
                 (opt.storage == Storage::automatic && bytes <= double(opt.dense_limit));
    if (dense && bytes > double(opt.memory_cap))
        throw ResourceError("disorder: M*N exceeds the memory cap");
    if (!dense) return d;
    d.data_.resize(d.m * n);
    parallel_for(d.m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) fill_row(seed, a, n, &d.data_[a * n]);
    }, 64);
    return d;
}

void Disorder::row(std::size_t a, std::int16_t* buf) const {
    if (dense()) {
        std::copy_n(&data_[a * n], n, buf);
        return;
    }
    fill_row(seed, a, n, buf);
}

void Disorder::for_blocks(
    const std::function<void(std::size_t, std::size_t, const std::int16_t*)>& visit,
    std::size_t first, std::size_t last) const {
    last = std::min(last, m);
    if (first >= last) return;
    const std::size_t nb = (last - first + block_rows - 1) / block_rows;
    parallel_for(nb, [&](std::size_t lo, std::size_t hi) {
        std::vector<std::int16_t> buf;
        for (std::size_t b = lo; b < hi; ++b) {
            const std::size_t r0 = first + b * block_rows, r1 = std::min(last, r0 + block_rows);
            if (dense()) {
                visit(r0, r1, &data_[r0 * n]);
                continue;
            }
            buf.resize((r1 - r0) * n);
            for (std::size_t a = r0; a < r1; ++a) fill_row(seed, a, n, &buf[(a - r0) * n]);
            visit(r0, r1, buf.data());
        }
    }, 1);
}

std::vector<double> Disorder::apply(const std::vector<double>& x) const {
    if (x.size() != n) throw ValidationError("apply: dimension mismatch");
    std::vector<double> y(m);
    for_blocks([&](std::size_t r0, std::size_t r1, const std::int16_t* rows) {
        for (std::size_t a = r0; a < r1; ++a)
            y[a] = scale_ * dot_row(rows + (a - r0) * n, x.data(), n);
    });
    return y;
}

std::vector<double> Disorder::fused(const std::vector<double>& x,
                                    const std::function<double(std::size_t, double)>& rowfn,
                                    std::vector<double>* s_out) const {
    if (!x.empty() && x.size() != n) throw ValidationError("fused: dimension mismatch");
    const std::size_t nb = (m + block_rows - 1) / block_rows;
    std::vector<double> part(nb * n, 0.0);
    if (s_out) s_out->assign(m, 0.0);
    for_blocks([&](std::size_t r0, std::size_t r1, const std::int16_t* rows) {
        double* acc = &part[(r0 / block_rows) * n];
        for (std::size_t a = r0; a < r1; ++a) {
            const std::int16_t* g = rows + (a - r0) * n;
            const double s = x.empty() ? 0.0 : scale_ * dot_row(g, x.data(), n);
            if (s_out) (*s_out)[a] = s;
            const double w = rowfn(a, s);
            if (w != 0.0) axpy_row(w, g, acc, n);
        }
    });
    std::vector<double> y(n, 0.0);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t i = 0; i < n; ++i) y[i] += part[b * n + i];
    for (double& v : y) v *= scale_;
    return y;
}

std::vector<double> Disorder::apply_t(const std::vector<double>& w) const {
    if (w.size() != m) throw ValidationError("apply_t: dimension mismatch");
    return fused({}, [&](std::size_t a, double) { return w[a]; });
}

std::vector<double> Disorder::rows_of_a(const std::vector<std::size_t>& rows) const {
    std::vector<double> out(rows.size() * n);
    std::vector<std::int16_t> buf(n);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= m) throw ValidationError("rows_of_a: row out of range");
        row(rows[r], buf.data());
        for (std::size_t i = 0; i < n; ++i) out[r * n + i] = scale_ * double(buf[i]);
    }
    return out;
}

}  // namespace percamp
