#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace molang {

// splitmix64; used to derive independent streams from (seed, index) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index + 0x51'7c'c1'b7'27'22'0a'95ULL));
}

// Deterministic generator with pinned distribution algorithms. The standard
// library's distributions are implementation-defined, so every draw we rely
// on for reproducibility goes through this class instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x106689d45497fdb5ULL : seed) {
        // warm up so nearby seeds decorrelate
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        state_ = mix64(state_ + 0x9e3779b97f4a7c15ULL);
        return state_;
    }

    // uniform in [0, 1) with 53 bits
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), n >= 1; rejection-free modulo is fine here
    // since n is far below 2^64 in all call sites
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // uniform integer in [lo, hi] inclusive
    long next_range(long lo, long hi) {
        return lo + static_cast<long>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // standard normal via Box-Muller (no cached spare, keeps the stream simple)
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // geometric on {1, 2, ...} with mean `mean` (success prob 1/mean)
    long next_geometric(double mean) {
        if (mean <= 1.0) return 1;
        const double p = 1.0 / mean;
        double u = next_double();
        if (u < 1e-300) u = 1e-300;
        long k = 1 + static_cast<long>(std::floor(std::log(u) / std::log(1.0 - p)));
        return k < 1 ? 1 : k;
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace molang
