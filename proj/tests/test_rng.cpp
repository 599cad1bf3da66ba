#include <doctest.h>

#include <cmath>

#include "emev/rng.hpp"

using namespace emev;

TEST_CASE("rng streams are deterministic in the seed") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        double va = a.uniform(), vb = b.uniform(), vc = c.uniform();
        all_equal = all_equal && va == vb;
        any_diff = any_diff || va != vc;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform stays in [0,1) and matches first/second moments") {
    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sq += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sq / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("normal matches N(0,1) moments") {
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double g = rng.normal();
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("derive produces distinct decorrelated child seeds") {
    uint64_t a = Rng::derive(1, 0);
    uint64_t b = Rng::derive(1, 1);
    uint64_t c = Rng::derive(2, 0);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(Rng::derive(1, 0) == a);
}
