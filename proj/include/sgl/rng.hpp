#pragma once

#include <cmath>
#include <cstdint>

namespace sgl {

// Deterministic counter-free generator built on splitmix64. The sequence
// depends only on the 64-bit seed, so runs reproduce bit-exactly across
// platforms and standard-library versions (std::normal_distribution does not
// guarantee that).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on (0, 1); never returns 0 so log() stays finite.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller. Always consumes two uniforms; no cached
    // spare, so the stream position is a pure function of the call count.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Index below n with negligible modulo bias for lab-scale n.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t state_;
};

// Counter-based stream split: (master seed, run index) -> independent stream
// key. Used by sweeps so parallel runs own disjoint, reproducible streams.
inline std::uint64_t derive_stream(std::uint64_t master_seed, std::uint64_t run_index) {
    Rng mix(master_seed ^ (0xA0761D6478BD642FULL * (run_index + 1)));
    mix.next_u64();
    return mix.next_u64();
}

}  // namespace sgl
