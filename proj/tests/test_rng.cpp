#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "shapebridge/rng.hpp"

using shapebridge::CounterRng;

TEST_CASE("identical seed, stream and draw index give identical output") {
    CounterRng a(42, 7);
    CounterRng b(42, 7);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }

    CounterRng c(42, 7);
    CounterRng d(42, 7);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(c.next_gaussian() == d.next_gaussian());
    }
}

TEST_CASE("different seeds or streams decorrelate") {
    CounterRng a(1, 0);
    CounterRng b(2, 0);
    CounterRng c(1, 1);
    int same_ab = 0;
    int same_ac = 0;
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t va = a.next_u64();
        if (va == b.next_u64()) ++same_ab;
        if (va == c.next_u64()) ++same_ac;
    }
    REQUIRE(same_ab == 0);
    REQUIRE(same_ac == 0);
}

TEST_CASE("split streams are reproducible and distinct") {
    CounterRng base(123, 5);
    CounterRng s0 = base.split(0);
    CounterRng s1 = base.split(1);
    CounterRng s0_again = base.split(0);
    REQUIRE(s0.next_u64() == s0_again.next_u64());
    CounterRng s0_b = base.split(0);
    CounterRng s1_b = base.split(1);
    int same = 0;
    for (int i = 0; i < 1000; ++i) {
        if (s0_b.next_u64() == s1_b.next_u64()) ++same;
    }
    REQUIRE(same == 0);
}

TEST_CASE("uniform draws land in [0,1) with mean near one half") {
    CounterRng rng(7, 0);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = rng.next_uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    double mean = sum / n;
    // SE of the mean is 1/sqrt(12 n) ~ 9.1e-4; allow 4 SE.
    REQUIRE(std::abs(mean - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("gaussian draws have unit variance and vanishing excess kurtosis") {
    CounterRng rng(99, 3);
    const int n = 100000;
    double s1 = 0.0;
    double s2 = 0.0;
    double s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = rng.next_gaussian();
        s1 += g;
        s2 += g * g;
        s4 += g * g * g * g;
    }
    double mean = s1 / n;
    double var = s2 / n - mean * mean;
    double kurt = (s4 / n) / (var * var);
    REQUIRE(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    // Var of sample variance for a normal is 2/n -> SE ~ 0.0045.
    REQUIRE(std::abs(var - 1.0) < 0.02);
    // Kurtosis of a normal is 3; SE of the estimate ~ sqrt(24/n) ~ 0.0155.
    REQUIRE(std::abs(kurt - 3.0) < 0.08);
}
