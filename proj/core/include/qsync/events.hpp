#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qsync {

inline constexpr int64_t kPsPerSecond = 1'000'000'000'000LL;
inline constexpr double kPsPerMs = 1e9;

enum class Basis : uint8_t { Z = 0, X = 1 };
enum class Origin : uint8_t { Signal = 0, Dark = 1 };
enum class Arm : uint8_t { A = 0, B = 1 };

// Per-event QKD annotation, packed into one byte on disk:
// bit 0 basis, bit 1 measured bit, bit 2 origin.
struct EventTag {
    Basis basis = Basis::Z;
    uint8_t bit = 0;
    Origin origin = Origin::Signal;

    uint8_t pack() const {
        return static_cast<uint8_t>(static_cast<uint8_t>(basis) | (bit & 1u) << 1 |
                                    static_cast<uint8_t>(origin) << 2);
    }
    static EventTag unpack(uint8_t raw) {
        EventTag t;
        t.basis = static_cast<Basis>(raw & 1u);
        t.bit = static_cast<uint8_t>((raw >> 1) & 1u);
        t.origin = static_cast<Origin>((raw >> 2) & 1u);
        return t;
    }
    bool operator==(const EventTag&) const = default;
};

// Time-tagged detection record. Timestamps are integer picoseconds and
// non-decreasing. Tags are either absent or one per timestamp.
struct EventStream {
    std::vector<int64_t> t_ps;
    std::vector<EventTag> tags;

    size_t size() const { return t_ps.size(); }
    bool empty() const { return t_ps.empty(); }
    bool tagged() const { return !tags.empty(); }

    bool sorted() const {
        for (size_t i = 1; i < t_ps.size(); ++i)
            if (t_ps[i] < t_ps[i - 1]) return false;
        return true;
    }

    void validate() const {
        if (!tags.empty() && tags.size() != t_ps.size())
            throw std::invalid_argument("EventStream: tag count does not match timestamp count");
        if (!sorted()) throw std::invalid_argument("EventStream: timestamps not sorted");
    }
};

// One-pulse-per-second reference edges as observed on the local time tagger.
struct PpsTrain {
    std::vector<int64_t> edges_ps;

    size_t size() const { return edges_ps.size(); }

    // Edges must be sorted and no interval may deviate from nominal by more
    // than a generous jitter allowance.
    void validate(double sigma_pps_ps = 0.0) const {
        for (size_t i = 1; i < edges_ps.size(); ++i) {
            int64_t d = edges_ps[i] - edges_ps[i - 1];
            if (d <= 0) throw std::invalid_argument("PpsTrain: edges not strictly increasing");
            double dev = static_cast<double>(d - kPsPerSecond);
            double allow = 6.0 * sigma_pps_ps + 1e9;  // drift allowance of 1 ms/s
            if (dev > allow || dev < -allow)
                throw std::invalid_argument("PpsTrain: interval far from one second");
        }
    }
};

// Local oscillator imperfections relative to ideal time. All terms act on
// the true emission time t (seconds scale noted per field).
struct ClockModel {
    int64_t offset_ps = 0;
    double drift_ps_per_s = 0.0;        // linear rate error
    double drift_accel_ps_per_ms2 = 0.0; // quadratic aging / thermal term
    double osc_frac_error = 0.0;         // fractional frequency error
    double pps_sigma_ps = 0.0;           // jitter of the disciplining edges
};

// Free-space path between source and the remote arm. Loss is handled by the
// detection model; this struct owns the propagation delay dynamics.
struct ChannelState {
    int64_t base_delay_ps = 0;
    double delay_rate_ps_per_s = 0.0;
    double delay_accel_ps_per_ms2 = 0.0;
    double loss_db = 0.0;

    double delay_at_ps(int64_t t_ps) const {
        double ts = static_cast<double>(t_ps) / static_cast<double>(kPsPerSecond);
        double tms = static_cast<double>(t_ps) / kPsPerMs;
        return static_cast<double>(base_delay_ps) + delay_rate_ps_per_s * ts +
               0.5 * delay_accel_ps_per_ms2 * tms * tms;
    }
};

// Pair source plus per-arm detection chain parameters.
struct SourceDetectorModel {
    double brightness_cps = 1e6;
    double coherence_sigma_ps = 3.0;  // intra-pair emission jitter
    double det_sigma_ps = 45.0;
    double ttm_sigma_ps = 45.0;
    double eta_a = 1.0;
    double eta_b = 1.0;
    double dc_a_cps = 0.0;
    double dc_b_cps = 0.0;
    double e0 = 0.0;  // intrinsic flip probability for matched bases
    int64_t ttm_resolution_ps = 1;

    double eta(Arm arm) const { return arm == Arm::A ? eta_a : eta_b; }
    double dark_rate(Arm arm) const { return arm == Arm::A ? dc_a_cps : dc_b_cps; }

    void validate() const {
        if (brightness_cps < 0) throw std::invalid_argument("brightness_cps < 0");
        if (coherence_sigma_ps < 0 || det_sigma_ps < 0 || ttm_sigma_ps < 0)
            throw std::invalid_argument("negative jitter sigma");
        if (eta_a < 0 || eta_a > 1 || eta_b < 0 || eta_b > 1)
            throw std::invalid_argument("arm efficiency outside [0,1]");
        if (dc_a_cps < 0 || dc_b_cps < 0) throw std::invalid_argument("negative dark rate");
        if (e0 < 0 || e0 > 1) throw std::invalid_argument("e0 outside [0,1]");
        if (ttm_resolution_ps < 1) throw std::invalid_argument("ttm_resolution_ps < 1");
    }
};

// Source-frame emission times of surviving pair candidates, index aligned.
struct PairSet {
    std::vector<int64_t> a_ps;
    std::vector<int64_t> b_ps;
    double duration_s = 0.0;

    size_t size() const { return a_ps.size(); }
};

}  // namespace qsync
