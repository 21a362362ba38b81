#include "qsync/timetags.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qsync/rng.hpp"

namespace qsync {

namespace {

enum Role : uint64_t {
    kRoleEmission = 1,
    kRoleTagging = 2,
    kRoleSurvival = 3,
    kRoleJitter = 4,
    kRoleDarks = 5,
    kRolePps = 6,
};

int64_t quantize(int64_t t, int64_t res) {
    if (res <= 1) return t;
    // round to nearest multiple, ties away from zero
    int64_t q = t >= 0 ? (t + res / 2) / res : -((-t + res / 2) / res);
    return q * res;
}

}  // namespace

PairSet generate_truth_pairs(const SourceDetectorModel& src, double duration_s, uint64_t seed) {
    src.validate();
    if (duration_s <= 0) throw std::invalid_argument("generate_truth_pairs: duration_s <= 0");

    PairSet out;
    out.duration_s = duration_s;
    if (src.brightness_cps <= 0) return out;

    const int64_t horizon = static_cast<int64_t>(duration_s * static_cast<double>(kPsPerSecond));
    out.a_ps.reserve(static_cast<size_t>(src.brightness_cps * duration_s * 1.05) + 16);
    out.b_ps.reserve(out.a_ps.capacity());

    auto eng = make_engine(derive_seed(seed, kRoleEmission));
    std::exponential_distribution<double> gap(src.brightness_cps / static_cast<double>(kPsPerSecond));
    std::normal_distribution<double> coherence(0.0, src.coherence_sigma_ps);

    // Exponential gaps accumulated in integer picoseconds; double accumulation
    // would lose sub-ps precision over hour-long runs.
    int64_t t = 0;
    for (;;) {
        t += std::llround(gap(eng));
        if (t >= horizon) break;
        out.a_ps.push_back(t);
        int64_t partner = src.coherence_sigma_ps > 0 ? t + std::llround(coherence(eng)) : t;
        out.b_ps.push_back(partner);
    }
    return out;
}

std::pair<EventStream, EventStream> tag_qkd_outcomes(const PairSet& pairs, double e0,
                                                     uint64_t seed) {
    if (e0 < 0 || e0 > 1) throw std::invalid_argument("tag_qkd_outcomes: e0 outside [0,1]");
    if (pairs.a_ps.size() != pairs.b_ps.size())
        throw std::invalid_argument("tag_qkd_outcomes: pair arrays differ in length");

    EventStream a, b;
    a.t_ps = pairs.a_ps;
    b.t_ps = pairs.b_ps;
    a.tags.resize(pairs.size());
    b.tags.resize(pairs.size());

    auto eng = make_engine(derive_seed(seed, kRoleTagging));
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution flip(e0);

    for (size_t i = 0; i < pairs.size(); ++i) {
        Basis ba = coin(eng) ? Basis::X : Basis::Z;
        Basis bb = coin(eng) ? Basis::X : Basis::Z;
        uint8_t bit_a = coin(eng) ? 1 : 0;
        uint8_t bit_b;
        if (ba == bb) {
            bit_b = flip(eng) ? static_cast<uint8_t>(bit_a ^ 1u) : bit_a;
        } else {
            bit_b = coin(eng) ? 1 : 0;
        }
        a.tags[i] = {ba, bit_a, Origin::Signal};
        b.tags[i] = {bb, bit_b, Origin::Signal};
    }
    return {std::move(a), std::move(b)};
}

EventStream propagate_and_detect(const EventStream& arm_truth, Arm arm,
                                 const ChannelState& channel, const SourceDetectorModel& src,
                                 double duration_s, uint64_t seed) {
    src.validate();
    if (duration_s <= 0) throw std::invalid_argument("propagate_and_detect: duration_s <= 0");

    const double eta = src.eta(arm);
    const double smear = std::hypot(src.det_sigma_ps, src.ttm_sigma_ps);
    const uint64_t arm_salt = arm == Arm::A ? 0x41 : 0x42;

    auto surv_eng = make_engine(derive_seed(seed, kRoleSurvival, arm_salt));
    auto jit_eng = make_engine(derive_seed(seed, kRoleJitter, arm_salt));
    std::bernoulli_distribution survives(eta);
    std::normal_distribution<double> jitter(0.0, smear);

    EventStream out;
    out.t_ps.reserve(static_cast<size_t>(static_cast<double>(arm_truth.size()) * eta) + 64);
    const bool carry_tags = arm_truth.tagged();
    if (carry_tags) out.tags.reserve(out.t_ps.capacity());

    for (size_t i = 0; i < arm_truth.size(); ++i) {
        if (eta < 1.0 && !survives(surv_eng)) continue;
        double t = static_cast<double>(arm_truth.t_ps[i]);
        if (arm == Arm::B) t += channel.delay_at_ps(arm_truth.t_ps[i]);
        if (smear > 0) t += jitter(jit_eng);
        out.t_ps.push_back(quantize(std::llround(t), src.ttm_resolution_ps));
        if (carry_tags) out.tags.push_back(arm_truth.tags[i]);
    }

    const double dark_rate = src.dark_rate(arm);
    if (dark_rate > 0) {
        auto dark_eng = make_engine(derive_seed(seed, kRoleDarks, arm_salt));
        const int64_t horizon =
            static_cast<int64_t>(duration_s * static_cast<double>(kPsPerSecond));
        std::poisson_distribution<int64_t> n_dist(dark_rate * duration_s);
        std::uniform_int_distribution<int64_t> where(0, horizon - 1);
        std::bernoulli_distribution coin(0.5);
        int64_t n = n_dist(dark_eng);
        for (int64_t k = 0; k < n; ++k)
            out.t_ps.push_back(quantize(where(dark_eng), src.ttm_resolution_ps));
        if (carry_tags) {
            for (int64_t k = 0; k < n; ++k) {
                EventTag t;
                t.basis = coin(dark_eng) ? Basis::X : Basis::Z;
                t.bit = coin(dark_eng) ? 1 : 0;
                t.origin = Origin::Dark;
                out.tags.push_back(t);
            }
        }
    }

    if (carry_tags) {
        // sort timestamps and tags together
        std::vector<size_t> idx(out.t_ps.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](size_t l, size_t r) { return out.t_ps[l] < out.t_ps[r]; });
        EventStream sorted;
        sorted.t_ps.resize(out.t_ps.size());
        sorted.tags.resize(out.tags.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            sorted.t_ps[i] = out.t_ps[idx[i]];
            sorted.tags[i] = out.tags[idx[i]];
        }
        return sorted;
    }
    std::sort(out.t_ps.begin(), out.t_ps.end());
    return out;
}

int64_t apply_clock(int64_t t_true_ps, const ClockModel& clock) {
    double t = static_cast<double>(t_true_ps);
    double ts = t / static_cast<double>(kPsPerSecond);
    double tms = t / kPsPerMs;
    double local = t * (1.0 + clock.osc_frac_error) + static_cast<double>(clock.offset_ps) +
                   clock.drift_ps_per_s * ts + 0.5 * clock.drift_accel_ps_per_ms2 * tms * tms;
    return std::llround(local);
}

EventStream apply_clock(const EventStream& events, const ClockModel& clock) {
    EventStream out;
    out.t_ps.resize(events.size());
    out.tags = events.tags;
    int64_t prev = INT64_MIN;
    for (size_t i = 0; i < events.size(); ++i) {
        int64_t v = apply_clock(events.t_ps[i], clock);
        if (v < prev)
            throw std::runtime_error("apply_clock: map reorders events (non-monotonic clock)");
        out.t_ps[i] = v;
        prev = v;
    }
    return out;
}

PpsTrain generate_pps(const ClockModel& clock, double duration_s, uint64_t seed) {
    if (duration_s <= 0) throw std::invalid_argument("generate_pps: duration_s <= 0");
    const int64_t n_edges = static_cast<int64_t>(duration_s) + 1;

    auto eng = make_engine(derive_seed(seed, kRolePps));
    std::normal_distribution<double> jitter(0.0, clock.pps_sigma_ps);

    PpsTrain train;
    train.edges_ps.reserve(static_cast<size_t>(n_edges));
    for (int64_t k = 0; k < n_edges; ++k) {
        int64_t nominal = apply_clock(k * kPsPerSecond, clock);
        int64_t edge = clock.pps_sigma_ps > 0 ? nominal + std::llround(jitter(eng)) : nominal;
        train.edges_ps.push_back(edge);
    }
    return train;
}

}  // namespace qsync
