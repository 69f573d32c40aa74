#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "nsm/errors.hpp"
#include "nsm/field_io.hpp"
#include "nsm/rng.hpp"
#include "nsm/stats.hpp"
#include "oracle.hpp"

using namespace nsm;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter streams are reproducible and independent by key") {
    CounterRng a(7, "increments", 3), b(7, "increments", 3), c(7, "increments", 4), e(7, "initials", 3);
    bool differ_index = false, differ_purpose = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differ_index |= x != c.next_u64();
        differ_purpose |= x != e.next_u64();
    }
    CHECK(differ_index);
    CHECK(differ_purpose);
    CHECK(purpose_id("increments") != purpose_id("refine"));
}

TEST_CASE("uniform and normal moments") {
    CounterRng r(11, "test", 0);
    const int n = 200000;
    double su = 0, s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK_MESSAGE((u > 0.0 && u < 1.0), "uniform out of range");
        su += u;
        const double z = r.normal();
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(s1 / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
    for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
}

TEST_CASE("statistics helpers") {
    std::vector<double> ints(1000);
    for (int i = 0; i < 1000; ++i) ints[std::size_t(i)] = i + 1;
    CHECK(stats::pairwise_sum(ints) == 500500.0);
    // Error of the cascade grows like log n, far below naive accumulation.
    std::vector<double> tenths(1 << 20, 0.1);
    double naive = 0.0;
    for (double t : tenths) naive += t;
    const double exact = 0.1 * double(1 << 20);
    CHECK(std::abs(stats::pairwise_sum(tenths) - exact) <= 1e-12 * exact);
    CHECK(std::abs(stats::pairwise_sum(tenths) - exact) < std::abs(naive - exact));
    const std::vector<double> y{2, 4, 4, 4, 5, 5, 7, 9};
    const auto ms = stats::mean_se(y);
    CHECK(ms.mean == doctest::Approx(5.0));
    CHECK(ms.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(ms.se == doctest::Approx(std::sqrt(32.0 / 7.0 / 8.0)));
    // Wilson 0/10 upper bound: z^2 / (n + z^2).
    const double z2 = 1.959963984540054 * 1.959963984540054;
    const auto w = stats::wilson(0, 10);
    CHECK(w.lo == 0.0);  // exact, so "CI excludes 0" can never hold without a success
    CHECK(w.hi == doctest::Approx(z2 / (10 + z2)));
    const auto w2 = stats::wilson(10, 10);
    CHECK(w2.lo == doctest::Approx(10 / (10 + z2)));
    CHECK(w2.hi == 1.0);
    const std::vector<double> xs{0, 1, 2, 3, 4}, ys{1, 3, 5, 7, 9};
    const auto f = stats::linear_fit(xs, ys);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope_se == doctest::Approx(0.0).scale(1.0));
    CHECK(stats::median({3, 1, 2}) == 2.0);
    CHECK(stats::quantile({0, 10}, 0.25) == doctest::Approx(2.5));
}

TEST_CASE("field files round-trip and reject damage") {
    std::mt19937_64 gen(1);
    const auto w = oracle::random_field(4, gen);
    std::stringstream ss;
    write_field(ss, w);
    const std::string bytes = ss.str();
    CHECK(bytes.size() == 16 + std::size_t(w.size()) * 16);
    std::stringstream in(bytes);
    CHECK(read_field(in) == w);

    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream b1(bad);
    CHECK_THROWS_AS(read_field(b1), FormatError);
    std::stringstream b2(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_field(b2), FormatError);
    // Swap the first two mode records: ordering is part of the format.
    std::string swapped = bytes;
    std::swap_ranges(swapped.begin() + 16, swapped.begin() + 24, swapped.begin() + 32);
    std::stringstream b3(swapped);
    CHECK_THROWS_AS(read_field(b3), FormatError);

    const auto dir = std::filesystem::temp_directory_path() / "nsm_io_test";
    std::filesystem::create_directories(dir);
    const auto file = (dir / "f.nssf").string();
    std::vector<SpectralField> many{w, w * 2.0, oracle::random_field(4, gen)};
    save_fields(file, many);
    CHECK(load_fields(file) == many);
    save_field(file, w);
    CHECK(load_field(file) == w);
    CHECK_THROWS_AS(load_field((dir / "missing.nssf").string()), Error);
    std::filesystem::remove_all(dir);
}
