#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <sstream>

#include "hadl/metrics.hpp"
#include "support.hpp"

using namespace hadl;
using Catch::Approx;
using support::thrown_kind;

TEST_CASE("mse and mae", "[metrics]") {
    const std::vector<double> t{1, 2, 3, 4};
    CHECK(mse(t, t) == 0.0);
    CHECK(mae(t, t) == 0.0);
    const std::vector<double> p2{1, -1}, z2{0, 0};
    CHECK(mse(p2, z2) == 1.0);
    CHECK(mae(p2, z2) == 1.0);
    const std::vector<double> p4{3, -1, 0, 2}, z4{0, 0, 0, 0};
    CHECK(mse(p4, z4) == 3.5);
    CHECK(mae(p4, z4) == 1.5);
    const std::vector<double> short_v{1};
    CHECK(thrown_kind([&] { mse(t, short_v); }) == ErrorKind::ShapeMismatch);
    CHECK(thrown_kind([] { mae(std::span<const double>{}, std::span<const double>{}); }) == ErrorKind::Empty);
}

TEST_CASE("mse and mae: permutation and scaling", "[metrics][property]") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> r(20), z(20, 0.0);
        for (double& v : r) v = n(rng);
        const double m = mse(r, z), a = mae(r, z);
        std::vector<double> shuffled = r;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(mse(shuffled, z) == Approx(m).epsilon(1e-14));
        CHECK(mae(shuffled, z) == Approx(a).epsilon(1e-14));
        const double alpha = 2.5;
        std::vector<double> scaled = r;
        for (double& v : scaled) v *= alpha;
        CHECK(mse(scaled, z) == Approx(alpha * alpha * m).epsilon(1e-13));
        CHECK(mae(scaled, z) == Approx(alpha * a).epsilon(1e-13));
    }
}

TEST_CASE("improvement", "[metrics]") {
    CHECK(improvement(0.164, 0.163) == Approx(0.001).margin(1e-12));
    CHECK(improvement(0.367, 0.412) == Approx(-0.045).margin(1e-12));
    CHECK(improvement(0.3, 0.3) == 0.0);
}

TEST_CASE("nrr", "[metrics]") {
    CHECK(nrr(0.4, 0.4) == 1.0);
    CHECK(nrr(0.428, 0.427) == Approx(1.0023).margin(5e-5));
    CHECK(nrr(0.525, 0.427) == Approx(1.2295).margin(5e-5));
    CHECK(thrown_kind([] { nrr(0.4, 0.0); }) == ErrorKind::ZeroBaseline);
}

TEST_CASE("mav", "[metrics]") {
    const std::vector<double> ones{1, 1, 1};
    CHECK(mav(ones) == 0.0);
    const std::vector<double> table{1.002, 1.007, 1.028, 1.044};
    CHECK(mav(table) == Approx(0.02025).margin(1e-12));
    const std::vector<double> sym{0.9, 1.1};
    CHECK(mav(sym) == Approx(0.1).margin(1e-15));
    CHECK(thrown_kind([] { mav(std::span<const double>{}); }) == ErrorKind::Empty);
}

TEST_CASE("robustness report", "[metrics][robustness]") {
    const auto r = make_robustness_report("ETTh1", 192, "v", {0.0, 0.3, 0.7}, {0.4, 0.402, 0.41}, {0.5, 0.5, 0.5});
    REQUIRE(r.nrr_per_eta.size() == 2);
    CHECK(r.nrr_per_eta[0] == Approx(1.005));
    CHECK(r.nrr_per_eta[1] == Approx(1.025));
    REQUIRE(r.mav);
    CHECK(*r.mav == Approx(0.015));

    const auto only_zero = make_robustness_report("d", 1, "v", {0.0}, {0.4}, {0.5});
    CHECK(only_zero.nrr_per_eta.empty());
    CHECK_FALSE(only_zero.mav);
    std::ostringstream out;
    write_robustness_csv(out, only_zero, 0);
    CHECK(out.str().find("undefined") != std::string::npos);

    CHECK(thrown_kind([] { make_robustness_report("d", 1, "v", {0.3}, {0.4}, {0.5}); }) ==
          ErrorKind::MissingZeroEta);
}

TEST_CASE("eval csv layout", "[metrics][csv]") {
    EvalReport r;
    r.dataset = "toy";
    r.lookback = 64;
    r.horizon = 16;
    r.seed = 7;
    r.mse = 0.25;
    r.mae = 0.5;
    r.params = 1234;
    std::ostringstream out;
    write_eval_csv(out, {r}, 0x1f);
    CHECK(out.str() ==
          "# hadl config_fingerprint=000000000000001f\n"
          "dataset,lookback,horizon,variant,use_haar,use_dct,head,rank,bias,seed,eta,mse,mae,params\n"
          "toy,64,16,haar-dct-lowrank50-bias,1,1,lowrank,50,1,7,0,0.25,0.5,1234\n");
}
