#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qsync {

struct peak_not_found : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Coincidence histogram over bin-quantised delays. Bin b counts pointer
// coincidences with k = floor(tA/dt) - floor(tB/dt) - offset_bins == b + lower(),
// so the delay axis of bin b is (b + lower() + offset_bins) * bin_width_ps.
struct CorrelationHistogram {
    std::vector<uint64_t> counts;
    int64_t bin_width_ps = 1;
    int64_t offset_bins = 0;
    uint64_t iterations = 0;  // loop steps taken by the producing scan

    int64_t n_bins() const { return static_cast<int64_t>(counts.size()); }
    int64_t lower() const { return -(n_bins() / 2); }
    int64_t upper() const { return n_bins() - n_bins() / 2; }
    int64_t delay_of_bin_ps(int64_t b) const {
        return (b + lower() + offset_bins) * bin_width_ps;
    }
    uint64_t total() const {
        uint64_t s = 0;
        for (uint64_t c : counts) s += c;
        return s;
    }
};

struct GaussianFit {
    double mean_ps = 0.0;   // peak centre on the delay axis
    double sigma_ps = 0.0;
    double fwhm_ps = 0.0;
    double amplitude = 0.0;  // counts at peak above baseline
    double baseline = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct CoincidencePair {
    size_t index_a = 0;
    size_t index_b = 0;
    int64_t t_b_ps = 0;    // arm-B timestamp, used for temporal slicing
    int64_t delta_ps = 0;  // tA - tB
};

struct CoincidenceSet {
    std::vector<CoincidencePair> pairs;
    int64_t window_ps = 0;
    int64_t reference_offset_ps = 0;

    size_t size() const { return pairs.size(); }
};

// Single-pass greedy correlator. Each event contributes to at most one
// histogram increment; pointers only move forward, so the scan is O(nA+nB)
// regardless of bin count. Inputs must be sorted.
CorrelationHistogram dual_pointer_correlate(const std::vector<int64_t>& t_a,
                                            const std::vector<int64_t>& t_b, int64_t n_bins,
                                            int64_t bin_width_ps, int64_t offset_bins = 0);

// Exhaustive counterpart: every (i, j) pair inside the bin window is
// counted. Windowed sweep, O(nA + nB + matches).
CorrelationHistogram all_pairs_correlate(const std::vector<int64_t>& t_a,
                                         const std::vector<int64_t>& t_b, int64_t n_bins,
                                         int64_t bin_width_ps, int64_t offset_bins = 0);

// Time-partitioned evaluation of all_pairs_correlate with one-window overlap
// and associative merge. Equal to the serial result bin for bin; used for
// large streams and as the concurrency correctness check.
CorrelationHistogram all_pairs_correlate_partitioned(const std::vector<int64_t>& t_a,
                                                     const std::vector<int64_t>& t_b,
                                                     int64_t n_bins, int64_t bin_width_ps,
                                                     int64_t offset_bins, int n_parts);

// Bin-wise sum. Histograms must share geometry.
CorrelationHistogram merge(const CorrelationHistogram& lhs, const CorrelationHistogram& rhs);

// Gaussian-plus-baseline least squares on the histogram, Levenberg damped,
// seeded from the argmax bin and the local second moment. Requires a peak
// several counting deviations above the median floor; throws peak_not_found
// otherwise.
GaussianFit fit_peak(const CorrelationHistogram& hist, int max_iterations = 200,
                     double rel_tolerance = 1e-8);

// Greedy one-to-one pairing of events with |(tA - tB) - reference| <= window/2.
// Both inputs sorted; each event is used at most once.
CoincidenceSet sift_coincidences(const std::vector<int64_t>& t_a,
                                 const std::vector<int64_t>& t_b, int64_t reference_offset_ps,
                                 int64_t window_ps);

}  // namespace qsync
