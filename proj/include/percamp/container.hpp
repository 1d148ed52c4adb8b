#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace percamp {

inline constexpr char container_magic[8] = {'P', 'C', 'A', 'M', 'P', 'B', 'I', 'N'};
inline constexpr std::uint32_t container_version = 1;

// Binary layout, all integers and floats little-endian:
//   magic[8] | u32 version | u64 params_hash | str kind
//   | f64 x_min | f64 x_max | u64 nx | u64 nt | f64[nt] t_nodes
//   | str meta | u32 n_arrays | { str name | u64 count | f64[count] }
// where str = u32 length + bytes.
struct Container {
    std::uint64_t params_hash = 0;
    std::string kind;
    double x_min = 0.0, x_max = 0.0;
    std::uint64_t nx = 0;
    std::vector<double> t_nodes;
    std::string meta;
    std::vector<std::pair<std::string, std::vector<double>>> arrays;

    void add(std::string name, std::vector<double> data);
    const std::vector<double>& array(const std::string& name) const;
    bool has(const std::string& name) const;
};

void write_container(const Container& c, const std::string& path);
Container read_container(const std::string& path);

// Stable hash helper for cache keys and params hashes.
class Hasher {
public:
    Hasher& add(double v);
    Hasher& add(std::uint64_t v);
    Hasher& add(const std::string& s);
    Hasher& add(const std::vector<double>& v);
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 1469598103934665603ull;
    void bytes(const unsigned char* p, std::size_t n);
};

std::string hex64(std::uint64_t v);

}  // namespace percamp
