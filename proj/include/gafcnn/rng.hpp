#ifndef GAFCNN_RNG_HPP
#define GAFCNN_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace gafcnn {

/// Deterministic random source. std::mt19937 has a standard-mandated output
/// sequence, and all value mappings here are spelled out explicitly, so the
/// same seed yields the same draws on every platform and compiler.
/// std::shuffle and the std distributions are deliberately not used; their
/// algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint32_t seed) : engine_(seed) {}

    std::uint32_t next_u32() { return engine_(); }

    /// Uniform in [0, 1), 32 bits of resolution.
    double next_unit() {
        return static_cast<double>(next_u32()) * (1.0 / 4294967296.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Approximate standard normal (12-draw Irwin-Hall). Plenty for noise
    /// synthesis; not intended for tail-accurate statistics.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += next_unit();
        return s - 6.0;
    }

    /// Uniform integer in [0, n), unbiased via rejection.
    std::uint32_t bounded(std::uint32_t n) {
        if (n <= 1) return 0;
        const std::uint64_t span = 0x1'0000'0000ULL;
        const std::uint64_t rem = span % n;
        if (rem == 0) return next_u32() % n;  // n divides 2^32, no bias
        const auto limit = static_cast<std::uint32_t>(span - rem);
        std::uint32_t x = next_u32();
        while (x >= limit) x = next_u32();
        return x % n;
    }

    /// Fisher-Yates with explicit index mapping.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = bounded(static_cast<std::uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937 engine_;
};

}  // namespace gafcnn

#endif
