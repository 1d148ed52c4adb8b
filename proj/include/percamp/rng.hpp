#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace percamp {

// Substream derivation: key = splitmix64(seed ^ fnv1a(label)) mixed with the
// counter through a second splitmix64 round. Every stream is a mt19937_64
// seeded with its key, so stream (label, i) never depends on scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull);
std::uint64_t substream_key(std::uint64_t seed, std::string_view label, std::uint64_t counter);

using Engine = std::mt19937_64;

inline Engine substream(std::uint64_t seed, std::string_view label, std::uint64_t counter) {
    return Engine(substream_key(seed, label, counter));
}

// Ziggurat normal sampler (boost.random); bit-identical for a given engine state.
class NormalSampler {
public:
    explicit NormalSampler(Engine eng);
    double operator()();

private:
    Engine eng_;
};

}  // namespace percamp
