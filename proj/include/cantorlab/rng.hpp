#pragma once

#include <cstdint>
#include <random>

namespace cantorlab {

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// uniform mappings below avoid std::uniform_*_distribution, whose output is
// implementation-defined, so byte-identical reruns are guaranteed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // log-uniform in [lo,hi], lo > 0
    double logUniform(double lo, double hi) {
        return lo * std::exp(uniform() * std::log(hi / lo));
    }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

    // independent stream for sample i (splitmix64 of seed ^ index)
    static std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 eng_;
};

} // namespace cantorlab
