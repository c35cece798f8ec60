#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "synth/error.hpp"
#include "synth/rng.hpp"

using namespace synth;

TEST_CASE("same seed, name, and draw index give identical values") {
    RngStream a = RngStream::derive(42, "noise-z");
    RngStream b = RngStream::derive(42, "noise-z");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("draws are a pure function of the counter") {
    RngStream a = RngStream::derive(7, "subsample");
    std::vector<uint64_t> first;
    for (int i = 0; i < 10; ++i) first.push_back(a.next_u64());
    a.set_counter(0);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == first[i]);
    a.set_counter(5);
    CHECK(a.next_u64() == first[5]);
}

TEST_CASE("different stream names decorrelate") {
    RngStream a = RngStream::derive(42, "init-generator");
    RngStream b = RngStream::derive(42, "init-discriminator");
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("different seeds decorrelate") {
    RngStream a = RngStream::derive(1, "noise-z");
    RngStream b = RngStream::derive(2, "noise-z");
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("child streams are distinct from the parent and each other") {
    RngStream parent = RngStream::derive(9, "attack-reident");
    std::set<uint64_t> keys{parent.key()};
    for (uint64_t i = 0; i < 100; ++i) keys.insert(parent.child(i).key());
    CHECK(keys.size() == 101);
}

TEST_CASE("next_double lies in [0, 1)") {
    RngStream rng = RngStream::derive(3, "u");
    for (int i = 0; i < 10000; ++i) {
        double v = rng.next_double();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("next_below respects the bound and hits every residue") {
    RngStream rng = RngStream::derive(4, "b");
    std::set<uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        uint64_t v = rng.next_below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS_AS(rng.next_below(0), ValidationError);
}

TEST_CASE("gaussian draws have roughly standard moments") {
    RngStream rng = RngStream::derive(5, "g");
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = rng.next_gaussian();
        sum += v;
        sq += v * v;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("gaussian_noise with zero std is exactly zero and advances nothing visible") {
    RngStream rng = RngStream::derive(6, "noise");
    auto v = gaussian_noise(rng, 50, 0.0);
    for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("gaussian_noise scales by the std") {
    RngStream a = RngStream::derive(6, "noise");
    RngStream b = RngStream::derive(6, "noise");
    auto u = gaussian_noise(a, 100, 1.0);
    auto w = gaussian_noise(b, 100, 2.5);
    for (size_t i = 0; i < u.size(); ++i) CHECK(w[i] == doctest::Approx(2.5 * u[i]));
}

TEST_CASE("gaussian_noise rejects negative std") {
    RngStream rng = RngStream::derive(6, "noise");
    CHECK_THROWS_AS(gaussian_noise(rng, 3, -1.0), ValidationError);
}
