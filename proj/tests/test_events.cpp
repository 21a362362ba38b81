#include <cstdint>

#include "doctest.h"
#include "qsync/events.hpp"

using namespace qsync;

TEST_CASE("tag byte packs basis, bit and origin into separate bits") {
    CHECK(EventTag{Basis::Z, 0, Origin::Signal}.pack() == 0b000);
    CHECK(EventTag{Basis::X, 0, Origin::Signal}.pack() == 0b001);
    CHECK(EventTag{Basis::Z, 1, Origin::Signal}.pack() == 0b010);
    CHECK(EventTag{Basis::Z, 0, Origin::Dark}.pack() == 0b100);
    CHECK(EventTag{Basis::X, 1, Origin::Dark}.pack() == 0b111);
}

TEST_CASE("tag byte round-trips through pack and unpack for all combinations") {
    for (uint8_t raw = 0; raw < 8; ++raw) {
        CHECK(EventTag::unpack(raw).pack() == raw);
    }
}

TEST_CASE("event stream validation accepts sorted tagged data") {
    EventStream s;
    s.t_ps = {10, 20, 20, 35};
    s.tags.assign(4, EventTag{});
    CHECK_NOTHROW(s.validate());
    CHECK(s.tagged());
}

TEST_CASE("event stream validation rejects unsorted timestamps") {
    EventStream s;
    s.t_ps = {10, 5};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("event stream validation rejects mismatched tag count") {
    EventStream s;
    s.t_ps = {10, 20};
    s.tags.assign(1, EventTag{});
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("pps train validation rejects non-increasing edges") {
    PpsTrain pps;
    pps.edges_ps = {0, kPsPerSecond, kPsPerSecond};
    CHECK_THROWS_AS(pps.validate(), std::invalid_argument);
}

TEST_CASE("pps train validation rejects an interval far from one second") {
    PpsTrain pps;
    pps.edges_ps = {0, kPsPerSecond / 2};
    CHECK_THROWS_AS(pps.validate(), std::invalid_argument);
}

TEST_CASE("pps train validation allows jitter within the stated allowance") {
    PpsTrain pps;
    pps.edges_ps = {0, kPsPerSecond + 5000, 2 * kPsPerSecond - 4000};
    CHECK_NOTHROW(pps.validate(1000.0));
}

TEST_CASE("channel delay evaluates base, rate and acceleration terms") {
    ChannelState ch;
    ch.base_delay_ps = 100000;
    ch.delay_rate_ps_per_s = 300.0;
    ch.delay_accel_ps_per_ms2 = 0.0;
    CHECK(ch.delay_at_ps(0) == doctest::Approx(100000.0));
    CHECK(ch.delay_at_ps(kPsPerSecond) == doctest::Approx(100300.0));

    ch.delay_accel_ps_per_ms2 = 2.0;
    // at t = 1 ms the quadratic term contributes 0.5 * 2 * 1^2 = 1 ps
    CHECK(ch.delay_at_ps(1'000'000'000LL) == doctest::Approx(100000.0 + 0.3 + 1.0));
}

TEST_CASE("detector model validation rejects out-of-range parameters") {
    SourceDetectorModel src;
    src.eta_a = 1.5;
    CHECK_THROWS_AS(src.validate(), std::invalid_argument);
    src.eta_a = 0.5;
    src.dc_b_cps = -1.0;
    CHECK_THROWS_AS(src.validate(), std::invalid_argument);
    src.dc_b_cps = 0.0;
    src.ttm_resolution_ps = 0;
    CHECK_THROWS_AS(src.validate(), std::invalid_argument);
}

TEST_CASE("per-arm accessors pick the matching efficiency and dark rate") {
    SourceDetectorModel src;
    src.eta_a = 0.25;
    src.eta_b = 0.5;
    src.dc_a_cps = 100.0;
    src.dc_b_cps = 200.0;
    CHECK(src.eta(Arm::A) == 0.25);
    CHECK(src.eta(Arm::B) == 0.5);
    CHECK(src.dark_rate(Arm::A) == 100.0);
    CHECK(src.dark_rate(Arm::B) == 200.0);
}
