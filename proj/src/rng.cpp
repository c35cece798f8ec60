#include "synth/rng.hpp"

#include <cmath>

#include "synth/error.hpp"

namespace synth {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

RngStream RngStream::derive(uint64_t seed, std::string_view name, uint64_t index) {
    uint64_t key = mix(seed + kGolden);
    key = mix(key ^ fnv1a(name));
    key = mix(key ^ (index * kGolden + 1));
    return RngStream(key);
}

RngStream RngStream::child(uint64_t index) const {
    return RngStream(mix(key_ ^ (index * kGolden + 0x5851F42D4C957F2DULL)));
}

uint64_t RngStream::next_u64() {
    return mix(key_ + (++counter_) * kGolden);
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
    // u1 in (0,1] so log() is finite
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t RngStream::next_below(uint64_t n) {
    if (n == 0) throw ValidationError("next_below: n must be positive");
    // rejection sampling to avoid modulo bias
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

std::vector<double> gaussian_noise(RngStream& rng, size_t count, double std_dev) {
    if (std_dev < 0.0) throw ValidationError("gaussian_noise: negative std");
    std::vector<double> out(count, 0.0);
    if (std_dev == 0.0) return out;
    for (size_t i = 0; i < count; ++i) out[i] = std_dev * rng.next_gaussian();
    return out;
}

}  // namespace synth
