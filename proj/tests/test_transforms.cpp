#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "hadl/transforms.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace hadl;
using Catch::Approx;
using support::thrown_kind;

namespace {
const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
}

TEST_CASE("haar of a constant signal has zero detail", "[haar]") {
    const std::vector<double> x{1, 1, 1, 1};
    const auto h = haar_forward(x);
    REQUIRE(h.approx.size() == 2);
    CHECK(h.approx[0] == Approx(std::numbers::sqrt2).epsilon(1e-15));
    CHECK(h.approx[1] == Approx(std::numbers::sqrt2).epsilon(1e-15));
    CHECK(h.detail[0] == 0.0);
    CHECK(h.detail[1] == 0.0);
}

TEST_CASE("haar of a ramp", "[haar]") {
    const std::vector<double> x{1, 2, 3, 4};
    const auto h = haar_forward(x);
    CHECK(h.approx[0] == Approx(3 * kInvSqrt2).epsilon(1e-15));
    CHECK(h.approx[1] == Approx(7 * kInvSqrt2).epsilon(1e-15));
    CHECK(h.approx[0] == Approx(2.1213203).margin(1e-7));
    CHECK(h.approx[1] == Approx(4.9497475).margin(1e-7));
    CHECK(h.detail[0] == Approx(kInvSqrt2).epsilon(1e-15));
    CHECK(h.detail[1] == Approx(kInvSqrt2).epsilon(1e-15));
}

TEST_CASE("haar rejects odd and too-short input", "[haar][errors]") {
    const std::vector<double> three{1, 2, 3};
    const std::vector<double> one{1};
    CHECK(thrown_kind([&] { haar_forward(three); }) == ErrorKind::OddLength);
    CHECK(thrown_kind([&] { haar_forward(one); }) == ErrorKind::TooShort);
    CHECK(thrown_kind([&] { haar_forward(std::span<const double>{}); }) == ErrorKind::TooShort);
}

TEST_CASE("haar perfect reconstruction and energy", "[haar][property]") {
    std::mt19937_64 rng(11);
    for (std::size_t n = 2; n <= 128; n += 2) {
        const auto x = oracle::random_vector(n, rng, 10.0);
        const auto h = haar_forward(x);
        const auto back = haar_inverse(h);
        REQUIRE(back.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
        const double e_in = energy(x);
        const double e_out = energy(h.approx) + energy(h.detail);
        CHECK(std::abs(e_out - e_in) / e_in < 1e-12);

        std::vector<double> a, d;
        oracle::haar(x, a, d);
        CHECK(oracle::max_rel_error(h.approx, a) < 1e-15);
        CHECK(oracle::max_rel_error(h.detail, d) < 1e-15);
    }
}

TEST_CASE("haar_batch transforms rows independently", "[haar]") {
    Tensor3 x(1, 1, 4, 1.0);
    const Tensor3 y = haar_batch(x);
    REQUIRE(y.length() == 2);
    CHECK(y(0, 0, 0) == Approx(std::numbers::sqrt2));
    CHECK(y(0, 0, 1) == Approx(std::numbers::sqrt2));

    Tensor3 z(1, 2, 6);
    for (std::size_t t = 0; t < 6; ++t) {
        z(0, 0, t) = static_cast<double>(t + 1);
        z(0, 1, t) = -3.0 * static_cast<double>(t);
    }
    const Tensor3 zz = haar_batch(z);
    CHECK(zz(0, 0, 0) == Approx(3 * kInvSqrt2));
    CHECK(zz(0, 0, 1) == Approx(7 * kInvSqrt2));
    CHECK(zz(0, 0, 2) == Approx(11 * kInvSqrt2));

    std::mt19937_64 rng(5);
    Tensor3 b(2, 1, 4);
    for (double& v : b.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    Tensor3 swapped(2, 1, 4);
    for (std::size_t t = 0; t < 4; ++t) {
        swapped(0, 0, t) = b(1, 0, t);
        swapped(1, 0, t) = b(0, 0, t);
    }
    const Tensor3 hb = haar_batch(b);
    const Tensor3 hs = haar_batch(swapped);
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK(hb(0, 0, t) == hs(1, 0, t));
        CHECK(hb(1, 0, t) == hs(0, 0, t));
    }
}

TEST_CASE("dct2_raw of constants and impulses", "[dct]") {
    for (std::size_t n : {1u, 2u, 5u, 16u, 33u}) {
        const std::vector<double> c(n, 2.5);
        const auto y = dct2_raw(c);
        CHECK(y[0] == Approx(2.5 * static_cast<double>(n)).epsilon(1e-14));
        for (std::size_t k = 1; k < n; ++k) CHECK(std::abs(y[k]) < 1e-12);

        std::vector<double> imp(n, 0.0);
        imp[0] = 1.0;
        const auto yi = dct2_raw(imp);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(yi[k] == Approx(std::cos(std::numbers::pi * static_cast<double>(k) / (2.0 * n))).margin(1e-14));
        }
    }
    CHECK(thrown_kind([] { dct2_raw(std::span<const double>{}); }) == ErrorKind::Empty);
}

TEST_CASE("dct2_raw matches the brute-force oracle", "[dct][oracle]") {
    std::mt19937_64 rng(2);
    const auto x8 = oracle::random_vector(8, rng);
    CHECK(oracle::max_rel_error(dct2_raw(x8), oracle::dct2(x8)) < 1e-14);
    for (std::size_t n = 1; n <= 64; ++n) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto x = oracle::random_vector(n, rng, 5.0);
            CHECK(oracle::max_rel_error(dct2_raw(x), oracle::dct2(x)) < 1e-12);
        }
    }
}

TEST_CASE("dct2_raw is linear", "[dct][property]") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 40;
        const auto a = oracle::random_vector(n, rng);
        const auto b = oracle::random_vector(n, rng);
        const double alpha = 1.7, beta = -0.3;
        std::vector<double> mix(n);
        for (std::size_t i = 0; i < n; ++i) mix[i] = alpha * a[i] + beta * b[i];
        const auto ya = dct2_raw(a), yb = dct2_raw(b), ym = dct2_raw(mix);
        for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(ym[k] - (alpha * ya[k] + beta * yb[k])) < 1e-12);
    }
}

TEST_CASE("dct2_scaled applies 2/L", "[dct]") {
    const std::vector<double> c(256, 3.25);
    const Spectrum s = dct2_scaled(c, 512);
    CHECK(s.scale == 2.0 / 512.0);
    CHECK(s.coeffs[0] == Approx(3.25).epsilon(1e-14));
    for (std::size_t k = 1; k < 256; ++k) CHECK(std::abs(s.coeffs[k]) < 1e-12);

    const std::vector<double> zero(16, 0.0);
    for (double v : dct2_scaled(zero, 32).coeffs) CHECK(v == 0.0);

    std::mt19937_64 rng(4);
    const auto x = oracle::random_vector(16, rng);
    const auto ref = oracle::dct2(x);
    const auto got = dct2_scaled(x, 32).coeffs;
    for (std::size_t k = 0; k < 16; ++k) CHECK(got[k] == Approx(ref[k] / 16.0).margin(1e-14));

    CHECK(thrown_kind([&] { dct2_scaled(x, 30); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("batched dct2_scaled agrees with the row form", "[dct]") {
    std::mt19937_64 rng(6);
    Tensor3 t(3, 2, 24);
    for (double& v : t.values()) v = std::normal_distribution<double>()(rng);
    const SpectrumBatch b = dct2_scaled(t, 48);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t c = 0; c < 2; ++c) {
            const auto row = dct2_scaled(t.row(i, c), 48).coeffs;
            for (std::size_t k = 0; k < 24; ++k) CHECK(std::abs(b.coeffs(i, c, k) - row[k]) < 1e-12);
        }
    }
}

TEST_CASE("DctPlan matches dct2_raw", "[dct]") {
    std::mt19937_64 rng(7);
    for (std::size_t n : {1u, 3u, 8u, 64u, 256u}) {
        const DctPlan plan(n);
        Matrix rows(4, static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = std::normal_distribution<double>()(rng);
        const Matrix out = plan.apply(rows);
        for (Eigen::Index r = 0; r < rows.rows(); ++r) {
            std::vector<double> x(rows.row(r).data(), rows.row(r).data() + n);
            const auto ref = dct2_raw(x);
            for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(out(r, static_cast<Eigen::Index>(k)) - ref[k]) < 1e-10);
        }
    }
}

TEST_CASE("orthonormal dct conserves energy", "[dct][energy]") {
    const std::vector<double> imp{1, 0, 0, 0};
    CHECK(energy(dct2_orthonormal(imp)) == Approx(1.0).epsilon(1e-14));

    const std::vector<double> threes{3, 3, 3, 3};
    const auto y = dct2_orthonormal(threes);
    CHECK(y[0] == Approx(6.0).epsilon(1e-14));
    for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(y[k]) < 1e-14);
    CHECK(energy(y) == Approx(36.0).epsilon(1e-14));

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = oracle::random_vector(64, rng, 3.0);
        CHECK(std::abs(energy(dct2_orthonormal(x)) / energy(x) - 1.0) < 1e-9);
    }
}
