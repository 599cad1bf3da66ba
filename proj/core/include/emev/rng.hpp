#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace emev {

// Deterministic random source. Distribution shaping is done here rather than
// with std:: distributions so that streams are reproducible independent of the
// standard library implementation.
class Rng {
   public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, 2*pi)
    double angle() { return uniform() * 2.0 * M_PI; }

    // Standard normal via Box-Muller; draws two uniforms per call and keeps
    // no state so the stream position is predictable.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // splitmix64 mix of (master, index); used to derive per-sample seeds.
    static uint64_t derive(uint64_t master, uint64_t index) {
        uint64_t z = master + 0x9e3779b97f4a7c15ull * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

   private:
    std::mt19937_64 gen_;
};

}  // namespace emev
