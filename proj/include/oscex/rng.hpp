#ifndef OSCEX_RNG_HPP
#define OSCEX_RNG_HPP

#include <cmath>
#include <cstdint>

namespace oscex {

/// SplitMix64; used to expand seeds into generator state.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t s) : state(s) {}
    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

/// xoshiro256++ (Blackman/Vigna). Small, fast, and the stream for a given
/// seed is a pure function of that seed, so per-path streams derived from
/// (master_seed, path_index) are reproducible and merge order-independent.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in (0,1); 53-bit mantissa, never exactly 0.
    double next_double() {
        return ((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; caches the second variate.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double c = std::cos(6.283185307179586476925286766559 * u2);
        double s = std::sin(6.283185307179586476925286766559 * u2);
        spare_ = r * s;
        has_spare_ = true;
        return r * c;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
    double spare_ = 0;
    bool has_spare_ = false;
};

/// Stream seed for path k under a master seed. Pure function of (seed, k).
inline uint64_t path_stream_seed(uint64_t master_seed, uint64_t k) {
    SplitMix64 sm(master_seed ^ (0x9E3779B97F4A7C15ULL * (k + 1)));
    return sm.next();
}

} // namespace oscex

#endif
