#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace rml {

// SplitMix64 finalizer. Full-avalanche 64-bit mixer; the standard constants.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream keyed by (seed, a, b, c). Draw k of a stream is a pure
// function of (key, k), so the value of any entry never depends on the order
// in which other entries are sampled. Workers can therefore share a seed and
// split by index without coordination.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t a = 0,
                        std::uint64_t b = 0, std::uint64_t c = 0)
        : key_(mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c)), ctr_(0) {}

    std::uint64_t next_u64() { return mix64(key_ ^ (0x632be59bd9b4e019ULL * ++ctr_)); }

    // Uniform on (0, 1]; never returns 0, safe under log().
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; second value of each pair is cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // (g1 + i g2) with independent standard normal parts.
    std::complex<double> next_gaussian_pair() {
        const double g1 = next_gaussian();
        const double g2 = next_gaussian();
        return {g1, g2};
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace rml
