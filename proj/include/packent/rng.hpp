#pragma once

#include <cstdint>

namespace packent {

/// Counter-based generator: value = mix(seed, stream, counter).  Splittable
/// by stream id, so per-point or per-trial work stays deterministic under a
/// single recorded seed regardless of evaluation order.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    CounterRng split(std::uint64_t substream) const {
        return CounterRng(mix(seed_ ^ 0xa0761d6478bd642full, substream), stream_);
    }

    std::uint64_t next_u64() { return at(counter_++); }

    std::uint64_t at(std::uint64_t counter) const {
        std::uint64_t x = seed_;
        x = mix(x, stream_ ^ 0xe7037ed1a0b428dbull);
        x = mix(x, counter ^ 0x8ebc6af09c88c6e3ull);
        return x;
    }

    /// Uniform double in [0,1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool next_bernoulli(double p) { return next_double() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  private:
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        // splitmix64 finalizer over the running state
        std::uint64_t z = a + 0x9e3779b97f4a7c15ull + b;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

}  // namespace packent
