#pragma once

#include <cstdint>
#include <utility>

namespace ttml {

// Deterministic splitmix64 generator. The <random> distributions are
// implementation-defined, so every draw that must reproduce bitwise across
// toolchains goes through this class instead.
class Rng {
 public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    // Independent stream addressed by up to three indices, e.g. the
    // per-image augmentation streams hash(seed, epoch, image, view).
    static Rng stream(uint64_t seed, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
        Rng r(seed);
        r.state_ = mix(r.state_ ^ mix(a ^ 0x9e3779b97f4a7c15ull));
        r.state_ = mix(r.state_ ^ mix(b ^ 0xbf58476d1ce4e5b9ull));
        r.state_ = mix(r.state_ ^ mix(c ^ 0x94d049bb133111ebull));
        return r;
    }

    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // [0, 1)
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniformf(float lo, float hi) { return float(uniform(lo, hi)); }

    // [0, n), n > 0
    int64_t below(int64_t n) {
        return int64_t((static_cast<__uint128_t>(next()) * static_cast<__uint128_t>(n)) >> 64);
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = last - first;
        for (auto i = n - 1; i > 0; --i) {
            auto j = below(i + 1);
            std::swap(first[i], first[j]);
        }
    }

 private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t state_;
};

}  // namespace ttml
