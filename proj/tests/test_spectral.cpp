#include "doctest.h"

#include <cmath>
#include <random>

#include "nsm/errors.hpp"
#include "nsm/lattice.hpp"
#include "nsm/spectral.hpp"
#include "oracle.hpp"

using namespace nsm;

TEST_CASE("lattice size and ordering") {
    for (int K = 1; K <= 9; ++K) {
        CHECK(lattice::size(K) == (2 * K + 1) * (2 * K + 1) - 1);
        const auto ms = lattice::modes(K);
        REQUIRE(int(ms.size()) == lattice::size(K));
        for (int i = 0; i < int(ms.size()); ++i) {
            CHECK(lattice::index(K, ms[i]) == i);
            CHECK(lattice::mode(K, i) == ms[i]);
            if (i > 0) CHECK(ms[i - 1] < ms[i]);
        }
    }
    CHECK_THROWS_AS(ModeIndex(0, 0), std::invalid_argument);
    CHECK(ModeIndex(0, 3).is_sin_type());
    CHECK(ModeIndex(0, -3).is_cos_type());
    CHECK(ModeIndex(2, -5).is_sin_type());
    CHECK(ModeIndex(-1, 7).is_cos_type());
}

TEST_CASE("dealiasing grid") {
    for (int K = 1; K <= 30; ++K) {
        const int n = lattice::grid_for(K);
        CHECK(n >= 3 * K + 1);
        int m = n;
        for (int p : {2, 3, 5})
            while (m % p == 0) m /= p;
        CHECK(m == 1);
        CHECK(lattice::dealiased_kmax(n) >= K);
    }
    CHECK(lattice::grid_for(8) == 25);
}

TEST_CASE("physical transform matches direct trigonometric sums") {
    std::mt19937_64 gen(3);
    const int K = 5;
    SpectralTransform tr(K);
    const auto w = oracle::random_field(K, gen);
    const auto vals = tr.to_physical(w.coeffs());
    const int n = tr.grid();
    double err = 0, scale = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const double x1 = 2 * oracle::kPi * a / n, x2 = 2 * oracle::kPi * b / n;
            const double ref = oracle::eval(w, x1, x2);
            err = std::max(err, std::abs(vals[std::size_t(a * n + b)] - ref));
            scale = std::max(scale, std::abs(ref));
        }
    CHECK(err <= 1e-12 * scale);
    const auto back = tr.from_physical(vals);
    CHECK((back - w.coeffs()).norm() <= 1e-12 * w.norm());
}

TEST_CASE("Biot-Savart velocity matches the streamfunction curl") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> ux(-oracle::kPi, oracle::kPi);
    for (int trial = 0; trial < 5; ++trial) {
        const auto w = oracle::random_field(4, gen);
        const auto u = biot_savart(w);
        for (int p = 0; p < 20; ++p) {
            const double x1 = ux(gen), x2 = ux(gen);
            const auto ref = oracle::velocity(w, x1, x2);
            CHECK(oracle::eval(u.u1, x1, x2) == doctest::Approx(ref[0]).epsilon(1e-12).scale(1.0));
            CHECK(oracle::eval(u.u2, x1, x2) == doctest::Approx(ref[1]).epsilon(1e-12).scale(1.0));
        }
        CHECK(divergence_norm(u) <= 1e-13 * w.norm());
    }
}

TEST_CASE("partial derivative is exact") {
    std::mt19937_64 gen(6);
    const auto w = oracle::random_field(3, gen);
    for (int axis = 0; axis < 2; ++axis) {
        const auto dw = partial(w, axis);
        for (double x : {0.3, -1.7, 2.9})
            CHECK(oracle::eval(dw, x, 0.5 * x) == doctest::Approx(oracle::eval_d(w, axis, x, 0.5 * x)).scale(1.0));
    }
}

TEST_CASE("bilinear term matches exact quadrature of the advection product") {
    std::mt19937_64 gen(7);
    for (int K : {2, 4}) {
        const auto v = oracle::random_field(K, gen);
        const auto w = oracle::random_field(K, gen);
        const auto ref = oracle::advection(v, w);
        const auto got = bilinear_B(biot_savart(v), w);
        CHECK((got - ref).norm() <= 1e-12 * std::max(1.0, ref.norm()));
        const auto bt = b_tilde(v, w);
        const auto bt_ref = oracle::advection(v, w) + oracle::advection(w, v);
        CHECK((bt - bt_ref).norm() <= 1e-12 * std::max(1.0, bt_ref.norm()));
    }
}

TEST_CASE("antisymmetry and Sobolev shift over random fields") {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 100; ++trial) {
        const int K = 3 + trial % 6;
        const auto w = oracle::random_field(K, gen);
        const auto v = oracle::random_field(K, gen);
        const auto u = biot_savart(w);
        const double scale = bilinear_B(u, v).norm() * v.norm();
        CHECK(std::abs(bilinear_B(u, v).dot(v)) <= 1e-10 * scale);
        for (double a : {0.0, 0.5, 1.0, 2.0})
            CHECK(sobolev_norm(u, a) == doctest::Approx(sobolev_norm(w, a - 1)).epsilon(1e-12));
    }
}

TEST_CASE("projections and lattice handling") {
    std::mt19937_64 gen(9);
    const auto w = oracle::random_field(6, gen);
    const auto lo = project(w, 4, Part::low), hi = project(w, 4, Part::high);
    CHECK((lo + hi - w).norm() <= 1e-15 * w.norm());
    CHECK(std::abs(lo.dot(hi)) <= 1e-14);
    CHECK(lo.at({3, 2}) == w.at({3, 2}));
    CHECK(lo.at({3, 3}) == 0.0);  // |k| > 4
    CHECK(hi.at({4, 1}) == w.at({4, 1}));
    CHECK(w.resized(8).resized(6) == w);
    CHECK(w.at({9, 9}) == 0.0);
    CHECK_THROWS_AS(SpectralField::basis(2, {3, 0}), std::out_of_range);
    const auto u = biot_savart(oracle::random_field(3, gen));
    CHECK_THROWS_AS(bilinear_B(u, w), LatticeMismatch);
}
