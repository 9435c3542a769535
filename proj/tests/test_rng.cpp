#include <cmath>
#include <vector>

#include "belle/rng.hpp"
#include "doctest.h"

using namespace belle;

TEST_SUITE_BEGIN("rng");

TEST_CASE("identical (seed, stream) pairs replay identical draws") {
    RngStream a(1234, 7), b(1234, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream c(1234, 7), d(1234, 7);
    for (int i = 0; i < 1000; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("distinct stream ids give distinct sequences") {
    RngStream a(1234, 0), b(1234, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("derived substreams are deterministic and distinct") {
    RngStream root(99, 3);
    RngStream s1 = root.derive(0);
    RngStream s2 = root.derive(0);
    RngStream s3 = root.derive(1);
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.stream_id() != s3.stream_id());
    CHECK(s1.next_u64() != s3.next_u64());
}

TEST_CASE("uniform moments") {
    RngStream r(42, 0);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        s += u;
        s2 += u * u;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(5e-3));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(2e-2));
}

TEST_CASE("normal moments over 1e6 draws") {
    RngStream r(7, 5);
    const int n = 1000000;
    double s = 0, s2 = 0, s3 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
        s3 += x * x * x;
    }
    CHECK(std::fabs(s / n) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(std::fabs(s3 / n) < 0.02);
}

TEST_CASE("bernoulli keep mask frequency within 0.3% of p over 1e6 draws") {
    for (double p : {0.5, 0.9}) {
        RngStream r(2024, 11);
        auto mask = r.bernoulli_mask(1000000, p);
        double s = 0;
        for (uint8_t m : mask) s += m;
        const double freq = s / static_cast<double>(mask.size());
        CHECK(std::fabs(freq - p) / p < 0.003);
    }
}

TEST_SUITE_END();
