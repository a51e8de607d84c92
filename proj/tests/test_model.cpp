#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "hadl/model.hpp"
#include "hadl/transforms.hpp"
#include "support.hpp"

using namespace hadl;
using Catch::Approx;
using support::thrown_kind;

namespace {

Tensor3 random_input(std::size_t b, std::size_t c, std::size_t l, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Tensor3 x(b, c, l);
    for (double& v : x.values()) v = n(rng);
    return x;
}

}  // namespace

TEST_CASE("param_count golden values", "[params]") {
    const std::vector<std::pair<std::size_t, std::uint64_t>> r50{{96, 17696}, {192, 22592}, {336, 29936}, {720, 49520}};
    for (auto [h, total] : r50) CHECK(param_count(512, h, 50, true, true, HeadKind::LowRank).total == total);

    CHECK(param_count(512, 96, 40, true, true, HeadKind::LowRank).total == 14176);
    CHECK(param_count(512, 336, 40, true, true, HeadKind::LowRank).total == 24016);
    CHECK(param_count(512, 96, 40, false, true, HeadKind::LowRank).total == 14080);
    CHECK(param_count(512, 96, 40, false, true, HeadKind::Dense).total == 24576);
    CHECK(param_count(512, 192, 40, true, false, HeadKind::LowRank).total == 28352);
    CHECK(param_count(512, 96, 1, false, true, HeadKind::LowRank).total == 352);

    const auto pc = param_count(512, 192, 50, true, true, HeadKind::LowRank);
    std::uint64_t sum = 0;
    for (const auto& [name, n] : pc.breakdown) sum += n;
    CHECK(sum == pc.total);
    CHECK(pc.breakdown.at("P") == 256 * 50);
    CHECK(pc.breakdown.at("Q") == 50 * 192);
    CHECK(pc.breakdown.at("bias") == 192);
}

TEST_CASE("model construction validates shapes", "[model][errors]") {
    CHECK(thrown_kind([] { HadlModel(511, 96, Variant{}); }) == ErrorKind::OddLength);
    Variant zero_rank;
    zero_rank.rank = 0;
    CHECK(thrown_kind([&] { HadlModel(512, 96, zero_rank); }) == ErrorKind::InvalidConfig);
    CHECK(thrown_kind([] { HadlModel(512, 0, Variant{}); }) == ErrorKind::InvalidConfig);
    Variant no_haar;
    no_haar.use_haar = false;
    CHECK(HadlModel(511, 96, no_haar).input_dim() == 511);

    HadlModel m(8, 2, Variant{});
    CHECK(thrown_kind([&] { m.features(Tensor3(1, 1, 6)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("zero weights expose the bias", "[model]") {
    HadlModel m = init_model(16, 4, Variant{.rank = 3}, 1);
    m.p().setZero();
    m.bias() << 1.0, -2.0, 0.5, 3.0;
    const Tensor3 y = m.forward(random_input(2, 3, 16, 9));
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t h = 0; h < 4; ++h) CHECK(y(b, c, h) == m.bias()(static_cast<Eigen::Index>(h)));
        }
    }
}

TEST_CASE("constant input reaches the head as a DC term", "[model]") {
    HadlModel m = init_model(32, 5, Variant{.rank = 2}, 3);
    m.bias() << 0.1, -0.2, 0.3, -0.4, 0.5;
    const double c = 1.75;
    const Tensor3 x(1, 2, 32, c);
    const Matrix a = m.features(x);
    // One-level Haar of a constant is sqrt(2) c; the scaled DCT keeps only the DC term.
    CHECK(a(0, 0) == Approx(std::numbers::sqrt2 * c).epsilon(1e-13));
    for (Eigen::Index k = 1; k < a.cols(); ++k) CHECK(std::abs(a(0, k)) < 1e-12);
    const Matrix w = m.effective_weight();
    const Tensor3 y = m.forward(x);
    for (std::size_t h = 0; h < 5; ++h) {
        const double expected = a(0, 0) * w(0, static_cast<Eigen::Index>(h)) + m.bias()(static_cast<Eigen::Index>(h));
        CHECK(y(0, 1, h) == Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("full-rank low-rank head equals a dense head", "[model][property]") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t l = 2 * (1 + rng() % 6);
        const std::size_t h = 1 + rng() % 6;
        const std::size_t d = l / 2;
        Variant lr{.rank = std::min(d, h)};
        Variant dv{.head = HeadKind::Dense};
        HadlModel low = init_model(l, h, lr, rng());
        HadlModel dense(l, h, dv);
        dense.dense() = low.effective_weight();
        dense.bias() = low.bias();
        const Tensor3 x = random_input(3, 2, l, rng());
        const Tensor3 a = low.forward(x), b = dense.forward(x);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-10);
    }
}

TEST_CASE("shared head: permuting channels permutes outputs", "[model][property]") {
    HadlModel m = init_model(24, 6, Variant{.rank = 4}, 77);
    const Tensor3 x = random_input(2, 3, 24, 8);
    Tensor3 perm(2, 3, 24);
    const std::size_t order[3] = {2, 0, 1};
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t t = 0; t < 24; ++t) perm(b, c, t) = x(b, order[c], t);
        }
    }
    const Tensor3 y = m.forward(x), yp = m.forward(perm);
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t h = 0; h < 6; ++h) CHECK(yp(b, c, h) == y(b, order[c], h));
        }
    }
}

TEST_CASE("effective weight", "[model]") {
    HadlModel m(4, 2, Variant{.rank = 1});
    m.p().setZero();
    m.q().setZero();
    m.p()(0, 0) = 1.0;
    m.q()(0, 0) = 1.0;
    const Matrix w = m.effective_weight();
    CHECK(w.rows() == 2);
    CHECK(w.cols() == 2);
    CHECK(w(0, 0) == 1.0);
    CHECK(w(0, 1) == 0.0);
    CHECK(w(1, 0) == 0.0);
    CHECK(w(1, 1) == 0.0);

    HadlModel m2 = init_model(10, 3, Variant{.rank = 2}, 4);
    Matrix outer = Matrix::Zero(5, 3);
    for (Eigen::Index k = 0; k < 2; ++k) outer += m2.p().col(k) * m2.q().row(k);
    CHECK((m2.effective_weight() - outer).cwiseAbs().maxCoeff() < 1e-14);

    m2.p().setZero();
    CHECK(m2.effective_weight().cwiseAbs().maxCoeff() == 0.0);

    HadlModel d(8, 2, Variant{.head = HeadKind::Dense});
    CHECK(thrown_kind([&] { d.effective_weight(); }) == ErrorKind::WrongHead);
}

TEST_CASE("flop estimate", "[model]") {
    HadlModel m(4, 2, Variant{.rank = 1});
    CHECK(flop_estimate(m, 1, 1) == 24);
    CHECK(flop_estimate(m, 0, 1) == 0);
    CHECK(flop_estimate(m, 3, 5) == 24 * 15);
}

TEST_CASE("initialization is seeded", "[model][init]") {
    const Variant v{.rank = 7};
    const HadlModel a = init_model(64, 12, v, 42);
    const HadlModel b = init_model(64, 12, v, 42);
    const HadlModel c = init_model(64, 12, v, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.bias().cwiseAbs().maxCoeff() == 0.0);
    const double bound = 1.0 / std::sqrt(32.0);
    CHECK(a.p().cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("checkpoint round trip", "[model][io]") {
    const auto dir = std::filesystem::temp_directory_path() / "hadl_test_model";
    std::filesystem::create_directories(dir);
    for (HeadKind head : {HeadKind::LowRank, HeadKind::Dense}) {
        for (bool bias : {true, false}) {
            Variant v{.use_haar = true, .use_dct = true, .head = head, .rank = 3, .bias = bias};
            HadlModel m = init_model(20, 4, v, 99);
            if (bias) m.bias().setConstant(0.25);
            const auto path = dir / "m.ckpt";
            save_checkpoint(m, path, 0xabcdef);
            const Checkpoint ck = load_checkpoint(path);
            CHECK(ck.model == m);
            CHECK(ck.fingerprint == 0xabcdef);
        }
    }
    {
        std::ofstream junk(dir / "junk.ckpt", std::ios::binary);
        junk << "not a checkpoint at all";
    }
    CHECK(thrown_kind([&] { load_checkpoint(dir / "junk.ckpt"); }) == ErrorKind::BadCheckpoint);
    CHECK(thrown_kind([&] { load_checkpoint(dir / "missing.ckpt"); }) == ErrorKind::Io);
    std::filesystem::remove_all(dir);
}

TEST_CASE("head names parse", "[model]") {
    CHECK(parse_head("lowrank") == HeadKind::LowRank);
    CHECK(parse_head("low-rank") == HeadKind::LowRank);
    CHECK(parse_head("dense") == HeadKind::Dense);
    CHECK(thrown_kind([] { parse_head("conv"); }) == ErrorKind::InvalidConfig);
    CHECK(Variant{}.label() == "haar-dct-lowrank50-bias");
}
