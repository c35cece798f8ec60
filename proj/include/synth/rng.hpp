#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace synth {

// Counter-based random stream. A stream is identified by (seed, name, index);
// the k-th draw is a pure function of (key, k), so identical seed + stream +
// draw index gives identical values on every platform. Streams derived for
// different names never collide in practice (64-bit mixed keys).
class RngStream {
  public:
    RngStream() = default;
    explicit RngStream(uint64_t key) : key_(key) {}

    static RngStream derive(uint64_t seed, std::string_view name, uint64_t index = 0);

    uint64_t next_u64();
    // Uniform in [0, 1).
    double next_double();
    // Standard normal via Box-Muller; consumes two uniforms per draw.
    double next_gaussian();
    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n);

    // Derive a child stream, e.g. one per attack-target record.
    RngStream child(uint64_t index) const;

    uint64_t key() const { return key_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

  private:
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

// i.i.d. N(0, std^2) draws; std = 0 returns zeros. Negative std is rejected.
std::vector<double> gaussian_noise(RngStream& rng, size_t count, double std_dev);

}  // namespace synth
