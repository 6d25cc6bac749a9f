#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace lertlab {

// Deterministic PRNG used everywhere instead of <random> distributions.
// std::uniform_*_distribution is implementation-defined, which would break
// the bit-reproducibility contract across standard libraries; the raw
// xoshiro-style mixing below is pinned.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable seed derivation for named substreams, e.g. per (epoch, sentence).
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t s = master;
    for (char c : tag) {
        s ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        splitmix64(s);
    }
    s ^= 0x1000000000000001ULL * (a + 1);
    splitmix64(s);
    s ^= 0x2000000000000003ULL * (b + 1);
    splitmix64(s);
    return s;
}

class Rng {
  public:
    explicit Rng(uint64_t seed = 0) {
        uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    // xoshiro256**
    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, n). Rejection sampling keeps it exactly uniform.
    uint64_t next_index(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Index drawn from unnormalized weights by cumulative scan.
    size_t next_weighted(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = next_real() * total;
        double acc = 0.0;
        for (size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    // Standard normal via Box-Muller (one value per call, no cache, so the
    // stream position is a pure function of the call count).
    double next_normal() {
        double u1 = next_real();
        double u2 = next_real();
        while (u1 <= 0.0) u1 = next_real();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Truncated normal: resample outside [-2, 2] sigmas.
    double next_trunc_normal(double stddev) {
        for (;;) {
            double z = next_normal();
            if (std::fabs(z) <= 2.0) return z * stddev;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    uint64_t state_[4];
};

}  // namespace lertlab
