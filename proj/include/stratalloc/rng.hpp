#pragma once

#include <cstdint>
#include <random>

namespace stratalloc {

// Deterministic random source. Wraps std::mt19937_64 but draws uniforms and
// bounded integers itself, so results do not depend on the standard library's
// distribution implementations and are reproducible across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Unbiased via rejection; n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    std::uint64_t next() { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

// SplitMix64 finisher; used to derive well-separated sub-stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One stream per domain run: root seed XOR domain index. Keeps per-domain
// results independent of worker scheduling.
inline std::uint64_t domain_seed(std::uint64_t root, std::size_t domain_index) {
    return root ^ static_cast<std::uint64_t>(domain_index);
}

}  // namespace stratalloc
