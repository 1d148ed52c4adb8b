#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace percamp {

// Entries of G are standard Gaussians rounded to the fixed-point grid
// k / 4096 with |k| <= 32767. Row a uses the counter stream
// splitmix64(key_a + i), key_a = substream_key(seed, "disorder", a), fed to the
// boost ziggurat sampler, so a row never depends on how or when it is produced.
// A = G / sqrt(n).
inline constexpr double disorder_unit = 1.0 / 4096.0;

enum class Storage { automatic, dense, stream };

struct DisorderOptions {
    Storage storage = Storage::automatic;
    std::size_t memory_cap = std::size_t(8) << 30;    // bytes, dense storage
    std::size_t dense_limit = std::size_t(3) << 30;   // automatic: stream above this
};

class Disorder {
public:
    std::size_t n = 0, m = 0;
    std::uint64_t seed = 0;

    bool dense() const { return !data_.empty(); }
    double scale() const { return scale_; }  // multiplies the integer entries to give A

    // Integer row a of G (length n) into buf.
    void row(std::size_t a, std::int16_t* buf) const;
    const std::int16_t* dense_row(std::size_t a) const { return &data_[a * n]; }

    // Rows in fixed blocks; visit(block_begin, block_end, rows) with rows
    // pointing at (end - begin) * n integers.
    static constexpr std::size_t block_rows = 512;
    void for_blocks(const std::function<void(std::size_t, std::size_t, const std::int16_t*)>& visit,
                    std::size_t first = 0, std::size_t last = std::size_t(-1)) const;

    // y = A x (x length n, y length m).
    std::vector<double> apply(const std::vector<double>& x) const;
    // y = A^T w (w length m).
    std::vector<double> apply_t(const std::vector<double>& w) const;
    // One pass: s_a = (A x)_a, w_a = rowfn(a, s_a), returns A^T w. Also
    // stores s into s_out when non-null.
    std::vector<double> fused(const std::vector<double>& x,
                              const std::function<double(std::size_t, double)>& rowfn,
                              std::vector<double>* s_out = nullptr) const;

    // Dense double copy of the selected rows of A (rows x n, row-major).
    std::vector<double> rows_of_a(const std::vector<std::size_t>& rows) const;

    friend Disorder generate_disorder(std::size_t n, double alpha, std::uint64_t seed,
                                      const DisorderOptions& opt);

private:
    std::vector<std::int16_t> data_;
    double scale_ = 1.0;
};

Disorder generate_disorder(std::size_t n, double alpha, std::uint64_t seed,
                           const DisorderOptions& opt = {});

std::size_t constraints_for(std::size_t n, double alpha);

double dot_row(const std::int16_t* g, const double* x, std::size_t n);
void axpy_row(double w, const std::int16_t* g, double* y, std::size_t n);

}  // namespace percamp
