#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace belle {

// Counter-based pseudo-random stream. A draw is a pure function of
// (seed, stream_id, counter), so replay is exact and streams with distinct
// ids never share state. Not shareable across threads; give each worker its
// own stream_id instead.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    RngStream(uint64_t seed, uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id), key_(derive_key(seed, stream_id)) {}

    uint64_t seed() const { return seed_; }
    uint64_t stream_id() const { return stream_id_; }
    uint64_t counter() const { return counter_; }

    // Independent substream; deterministic in (this stream, substream index).
    RngStream derive(uint64_t substream) const {
        return RngStream(seed_, mix64(stream_id_ + kGolden * (substream + 1)));
    }

    uint64_t next_u64() { return mix64(key_ + kGolden * ++counter_); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; pairs are cached so draws stay cheap.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    void fill_normal(double* out, size_t n, double mean = 0.0, double stddev = 1.0) {
        for (size_t i = 0; i < n; ++i) out[i] = mean + stddev * normal();
    }

    std::vector<double> normal_vec(size_t n) {
        std::vector<double> v(n);
        fill_normal(v.data(), n);
        return v;
    }

    // Bernoulli(keep_prob) keep mask.
    std::vector<uint8_t> bernoulli_mask(size_t n, double keep_prob) {
        std::vector<uint8_t> m(n);
        for (size_t i = 0; i < n; ++i) m[i] = uniform() < keep_prob ? 1 : 0;
        return m;
    }

    uint64_t next_index(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  private:
    static constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    static uint64_t mix64(uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    static uint64_t derive_key(uint64_t seed, uint64_t stream_id) {
        return mix64(seed + kGolden * mix64(stream_id + kGolden));
    }

    uint64_t seed_ = 0;
    uint64_t stream_id_ = 0;
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace belle
