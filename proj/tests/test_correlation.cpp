#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "qsync/correlation.hpp"
#include "qsync/rng.hpp"

using namespace qsync;

namespace {

// Literal transliteration of the published pseudocode, kept deliberately
// naive: floor-divide both timestamps, advance one pointer per step.
std::vector<uint64_t> reference_greedy(const std::vector<int64_t>& t_a,
                                       const std::vector<int64_t>& t_b, int64_t n, int64_t dt,
                                       int64_t offset) {
    auto fdiv = [](int64_t x, int64_t d) {
        int64_t q = x / d;
        if ((x % d != 0) && ((x < 0) != (d < 0))) --q;
        return q;
    };
    std::vector<uint64_t> h(static_cast<size_t>(n), 0);
    const int64_t lo = -(n / 2);
    const int64_t up = n - n / 2;
    size_t i = 0, j = 0;
    while (i < t_a.size() && j < t_b.size()) {
        const int64_t k = fdiv(t_a[i], dt) - fdiv(t_b[j], dt) - offset;
        if (k < lo) {
            ++i;
        } else if (k >= up) {
            ++j;
        } else {
            ++h[static_cast<size_t>(k - lo)];
            ++i;
            ++j;
        }
    }
    return h;
}

// Exhaustive quadratic count of every pair whose bin falls in the window.
std::vector<uint64_t> reference_all_pairs(const std::vector<int64_t>& t_a,
                                          const std::vector<int64_t>& t_b, int64_t n, int64_t dt,
                                          int64_t offset) {
    auto fdiv = [](int64_t x, int64_t d) {
        int64_t q = x / d;
        if ((x % d != 0) && ((x < 0) != (d < 0))) --q;
        return q;
    };
    std::vector<uint64_t> h(static_cast<size_t>(n), 0);
    const int64_t lo = -(n / 2);
    const int64_t up = n - n / 2;
    for (int64_t a : t_a) {
        for (int64_t b : t_b) {
            const int64_t k = fdiv(a, dt) - fdiv(b, dt) - offset;
            if (k >= lo && k < up) ++h[static_cast<size_t>(k - lo)];
        }
    }
    return h;
}

std::vector<int64_t> random_sorted(std::mt19937_64& eng, size_t count, int64_t horizon) {
    std::uniform_int_distribution<int64_t> where(0, horizon);
    std::vector<int64_t> t(count);
    for (auto& v : t) v = where(eng);
    std::sort(t.begin(), t.end());
    return t;
}

}  // namespace

TEST_CASE("greedy histogram equals the published pseudocode on random instances") {
    std::mt19937_64 eng = make_engine(404);
    std::uniform_int_distribution<int64_t> nbins(4, 64);
    std::uniform_int_distribution<int64_t> widths(1, 200);
    std::uniform_int_distribution<int64_t> offsets(-10, 10);
    std::uniform_int_distribution<size_t> counts(0, 400);
    for (int inst = 0; inst < 100; ++inst) {
        const int64_t n = nbins(eng);
        const int64_t dt = widths(eng);
        const int64_t off = offsets(eng);
        const auto t_a = random_sorted(eng, counts(eng), 20000);
        const auto t_b = random_sorted(eng, counts(eng), 20000);
        const auto got = dual_pointer_correlate(t_a, t_b, n, dt, off);
        const auto want = reference_greedy(t_a, t_b, n, dt, off);
        REQUIRE(got.counts == want);
    }
}

TEST_CASE("exhaustive histogram equals a quadratic reference on random instances") {
    std::mt19937_64 eng = make_engine(405);
    std::uniform_int_distribution<size_t> counts(0, 300);
    for (int inst = 0; inst < 40; ++inst) {
        const auto t_a = random_sorted(eng, counts(eng), 50000);
        const auto t_b = random_sorted(eng, counts(eng), 50000);
        const auto got = all_pairs_correlate(t_a, t_b, 32, 25, 0);
        const auto want = reference_all_pairs(t_a, t_b, 32, 25, 0);
        REQUIRE(got.counts == want);
    }
}

TEST_CASE("exhaustive counts dominate greedy counts in every bin") {
    std::mt19937_64 eng = make_engine(406);
    for (int inst = 0; inst < 25; ++inst) {
        const auto t_a = random_sorted(eng, 500, 100000);
        const auto t_b = random_sorted(eng, 450, 100000);
        const auto greedy = dual_pointer_correlate(t_a, t_b, 64, 50, 0);
        const auto all = all_pairs_correlate(t_a, t_b, 64, 50, 0);
        for (size_t b = 0; b < greedy.counts.size(); ++b)
            REQUIRE(all.counts[b] >= greedy.counts[b]);
    }
}

TEST_CASE("partitioned exhaustive correlation equals the serial result") {
    std::mt19937_64 eng = make_engine(407);
    const auto t_a = random_sorted(eng, 4000, 5'000'000);
    const auto t_b = random_sorted(eng, 3700, 5'000'000);
    const auto serial = all_pairs_correlate(t_a, t_b, 200, 100, 3);
    for (int parts : {1, 2, 3, 7, 16}) {
        const auto split = all_pairs_correlate_partitioned(t_a, t_b, 200, 100, 3, parts);
        REQUIRE(split.counts == serial.counts);
    }
}

TEST_CASE("well separated pairs are recovered exactly by both correlators") {
    // pairs spaced far apart relative to the window, so greedy and
    // exhaustive must both find exactly the planted delays
    std::mt19937_64 eng = make_engine(408);
    std::uniform_int_distribution<int64_t> delay(-500, 499);
    std::vector<int64_t> t_a, t_b;
    std::vector<int64_t> want_bins;
    int64_t t = 100000;
    for (int p = 0; p < 200; ++p) {
        const int64_t d = delay(eng);
        t_a.push_back(t + d);
        t_b.push_back(t);
        want_bins.push_back(d >= 0 ? d / 50 : -((-d + 49) / 50));
        t += 1'000'000;
    }
    std::sort(t_a.begin(), t_a.end());
    const auto greedy = dual_pointer_correlate(t_a, t_b, 40, 50, 0);
    const auto all = all_pairs_correlate(t_a, t_b, 40, 50, 0);
    CHECK(greedy.total() == 200);
    CHECK(all.total() == 200);
    std::vector<uint64_t> expect(40, 0);
    for (int64_t b : want_bins) ++expect[static_cast<size_t>(b + 20)];
    CHECK(greedy.counts == expect);
    CHECK(all.counts == expect);
}

TEST_CASE("histogram delay axis matches the bin convention") {
    CorrelationHistogram h;
    h.counts.assign(10, 0);
    h.bin_width_ps = 50;
    h.offset_bins = 4;
    CHECK(h.lower() == -5);
    CHECK(h.upper() == 5);
    CHECK(h.delay_of_bin_ps(0) == (-5 + 4) * 50);
    CHECK(h.delay_of_bin_ps(9) == (4 + 4) * 50);
}

TEST_CASE("merging histograms adds counts and demands identical geometry") {
    std::mt19937_64 eng = make_engine(409);
    const auto t_a = random_sorted(eng, 300, 100000);
    const auto t_b = random_sorted(eng, 280, 100000);
    const auto h1 = all_pairs_correlate(t_a, t_b, 16, 50, 0);
    const auto h2 = all_pairs_correlate(t_b, t_a, 16, 50, 0);
    const auto sum = merge(h1, h2);
    for (size_t b = 0; b < 16; ++b) CHECK(sum.counts[b] == h1.counts[b] + h2.counts[b]);

    auto bad = h2;
    bad.bin_width_ps = 25;
    CHECK_THROWS_AS(merge(h1, bad), std::invalid_argument);
}

TEST_CASE("peak fit recovers centre and width of a synthetic gaussian") {
    CorrelationHistogram h;
    h.counts.assign(201, 0);
    h.bin_width_ps = 10;
    const double mu = 137.0, sigma = 45.0, amp = 800.0, base = 20.0;
    for (int64_t b = 0; b < 201; ++b) {
        const double x = static_cast<double>(h.delay_of_bin_ps(b));
        const double v = base + amp * std::exp(-0.5 * (x - mu) * (x - mu) / (sigma * sigma));
        h.counts[static_cast<size_t>(b)] = static_cast<uint64_t>(std::llround(v));
    }
    const auto fit = fit_peak(h);
    CHECK(fit.converged);
    CHECK(fit.mean_ps == doctest::Approx(mu).epsilon(0.01));
    CHECK(fit.sigma_ps == doctest::Approx(sigma).epsilon(0.02));
    CHECK(fit.fwhm_ps == doctest::Approx(2.354820045 * sigma).epsilon(0.02));
    CHECK(fit.amplitude == doctest::Approx(amp).epsilon(0.05));
    CHECK(fit.baseline == doctest::Approx(base).epsilon(0.2));
}

TEST_CASE("peak fit refuses a histogram with no significant peak") {
    CorrelationHistogram h;
    h.counts.assign(101, 50);
    h.bin_width_ps = 10;
    h.counts[30] = 58;  // within counting noise of the floor
    CHECK_THROWS_AS(fit_peak(h), peak_not_found);
}

TEST_CASE("sifting pairs events one-to-one inside the window") {
    const std::vector<int64_t> t_a = {100, 205, 290, 1000};
    const std::vector<int64_t> t_b = {95, 210, 300, 2000};
    // reference offset 0, window 30 ps: |dt| <= 15
    const auto set = sift_coincidences(t_a, t_b, 0, 30);
    REQUIRE(set.size() == 3);
    CHECK(set.pairs[0].index_a == 0);
    CHECK(set.pairs[0].index_b == 0);
    CHECK(set.pairs[0].delta_ps == 5);
    CHECK(set.pairs[1].delta_ps == -5);
    CHECK(set.pairs[2].delta_ps == -10);
    CHECK(set.pairs[2].t_b_ps == 300);
}

TEST_CASE("sifting honours the reference offset and uses each event once") {
    const std::vector<int64_t> t_a = {100000};
    const std::vector<int64_t> t_b = {0, 10};
    const auto set = sift_coincidences(t_a, t_b, 100000, 40);
    REQUIRE(set.size() == 1);
    CHECK(set.pairs[0].index_b == 0);  // greedy takes the first candidate
    CHECK(set.pairs[0].delta_ps == 100000);
}

TEST_CASE("sifting window boundary is inclusive at half width") {
    const std::vector<int64_t> t_a = {115};
    const std::vector<int64_t> t_b = {100};
    CHECK(sift_coincidences(t_a, t_b, 0, 30).size() == 1);
    CHECK(sift_coincidences(t_a, t_b, 0, 29).size() == 0);
}
