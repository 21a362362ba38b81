#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "qsync/correlation.hpp"
#include "qsync/events.hpp"

namespace qsync {

// Event stream rebased onto the disciplining grid. Timestamps are global:
// window index times the window length plus the in-window position, so the
// in-window part of every timestamp lies in [0, window_n seconds).
struct AlignedStream {
    EventStream events;
    int window_n = 1;
    size_t dropped_leading = 0;   // before the first reference edge
    size_t dropped_trailing = 0;  // inside the final incomplete window
};

// Variance decomposition of both correction stages, all entries in ps^2.
// sigma2_ts keeps the source formula's ratio convention.
struct ErrorBudget {
    double sigma2_sync_a = 0.0;
    double sigma2_sync_b = 0.0;
    double eps_prop2 = 0.0;
    double sigma2_ppsta = 0.0;
    double sigma2_ts = 0.0;
    double sigma2_mu = 0.0;
    double sigma2_tsec = 0.0;
};

enum class NodeAnchor : uint8_t {
    RightBoundary = 0,  // mean of block s anchored at x_s
    Center = 1,         // anchored at the block barycentre position
};

// Uniform temporal slicing of one data block with per-slice offset
// statistics and the interpolation nodes derived from them.
struct SubBlockPartition {
    std::vector<int64_t> boundaries_ps;  // x_0 .. x_S
    double block_span_ps = 0.0;          // uniform slice length
    std::vector<double> means_ps;        // per block, NaN when empty
    std::vector<size_t> counts;
    std::vector<double> variances_ps2;   // variance of each block mean, NaN when empty

    std::vector<int64_t> node_pos_ps;    // interpolation grid (non-empty blocks)
    std::vector<double> node_value_ps;
    std::vector<size_t> node_weight;

    size_t merges = 0;  // starved-slice merges applied

    size_t n_blocks() const { return counts.size(); }
    size_t n_empty() const {
        size_t e = 0;
        for (size_t c : counts) e += c == 0;
        return e;
    }
};

struct TsecVariance {
    double sigma2_ts = 0.0;
    double sigma2_mu = 0.0;
    double sigma2_tsec = 0.0;
};

// Stage one: rebase timestamps with the two-edge linear map
//   t_aligned = (t - p_k) / (p_{k+n} - p_k) * n
// over consecutive n-second windows of the reference train.
AlignedStream pps_align(const EventStream& events, const PpsTrain& pps, int window_n);

// First-order variance of the aligned-timestamp error. t_frac is the
// normalised in-window position in [0, 1]; window_span_s the window length.
// The numerator and denominator of the map share the window-start edge, so
// its jitter enters with weight (1 - t_frac) rather than independently.
double ppsta_variance(double sigma_det_ps, double sigma_pps_a_ps, double sigma_pps_b_ps,
                      double window_span_s, double t_frac, double eps_prop_ps);
double ppsta_variance_single(double sigma_det_ps, double sigma_pps_ps, double window_span_s,
                             double t_frac);

// Histogram-and-fit offset estimate between two aligned streams.
GaussianFit coarse_offset(const AlignedStream& a, const AlignedStream& b, int64_t n_bins,
                          int64_t bin_width_ps, int64_t offset_bins = 0);

// Uniform partition of [start, start + span) into n_blocks slices with
// per-slice offset statistics over the supplied coincidences. Each slice
// reports the variance of its mean: sigma2_event_ps2 / count when a model
// event variance is given, the empirical standard error squared otherwise.
SubBlockPartition partition_and_estimate(const CoincidenceSet& coincidences, int n_blocks,
                                         int64_t span_ps, int64_t start_ps = 0,
                                         NodeAnchor anchor = NodeAnchor::RightBoundary,
                                         double sigma2_event_ps2 =
                                             std::numeric_limits<double>::quiet_NaN());

// Collapses interpolation nodes with fewer than min_pairs coincidences into
// their lighter neighbour until all survivors are adequately sampled.
void merge_starved_blocks(SubBlockPartition& partition, size_t min_pairs);

// Piecewise-linear offset at t_b over the partition nodes. Outside the node
// range the nearest node value is returned and *clamped set when provided.
double tsec_correct(int64_t t_b_ps, const SubBlockPartition& partition,
                    bool* clamped = nullptr);

// Interpolated-offset variance: slicing ratio term plus the two bracketing
// node estimate variances weighted by the interpolation position.
TsecVariance tsec_variance(double alpha, double sigma2_mu_prev, double sigma2_mu_next,
                           double sigma_tb_ps, double delta_tau_s_ps);

// Minimum slice count that keeps quadratic drift within delta_eta of a
// linear interpolant: T_n sqrt(|gamma| / (8 delta_eta)).
double min_subblocks(double t_n_ms, double gamma_ps_per_ms2, double delta_eta_ps);

// Pair budget per slice so that slicing improves on stage one alone.
// Unachievable (slice too fine for the stage-one variance) yields nullopt.
std::optional<double> min_pairs_vs_ppsta(double sigma2_ppsta_ps2, double sigma_tb_ps,
                                         double delta_tau_s_ps);

// Two-sided normal bound on the pairs needed to certify the mean offset to
// +-tolerance: (z sigma / tolerance)^2. Only the 95% level is supported.
double min_pairs_cramer_rao(double sigma_tsec_ps, double tolerance_ps,
                            double confidence = 0.95);

struct HistGeometry {
    int64_t n_bins = 20000;
    int64_t bin_width_ps = 50;
    int64_t offset_bins = 0;
};

struct SyncConfig {
    int align_window_s = 1;
    int sub_blocks = 20;  // 0 selects ceil(min_subblocks(...))
    bool tsec_enabled = true;
    double tau_w_scale = 1.2;     // sift window as multiple of fitted FWHM
    int64_t tau_w_fixed_ps = 0;   // > 0 overrides the FWHM policy
    int64_t data_block_ps = kPsPerSecond;
    HistGeometry coarse_hist{20000, 50, 0};
    HistGeometry fine_hist{4001, 10, 0};
    double sigma_tsec_target_ps = 150.0;
    double gamma_ps_per_ms2 = 0.0;  // curvature scale for automatic slicing
    size_t min_pairs_per_slice = 0;  // 0 selects the certification bound
    NodeAnchor anchor = NodeAnchor::Center;

    // Model terms for the reported error budget only; the correction path
    // never reads them.
    double sigma_event_ps = 63.6;
    double sigma_pps_a_ps = 1000.0;
    double sigma_pps_b_ps = 1000.0;
    double eps_prop_ps = 0.0;
};

struct BlockRecord {
    int64_t block_index = 0;
    int64_t t_start_ps = 0;
    double mu_ps = 0.0;        // stage-one offset used for this block
    size_t n_pairs = 0;
    double sigma_mu_ps = 0.0;  // empirical standard error of the block mean
    double residual_ps = 0.0;  // fitted peak offset after correction
    bool fit_ok = false;
};

struct SyncResult {
    std::vector<BlockRecord> blocks;
    CoincidenceSet coincidences;  // all sifted pairs, aligned timestamps
    ErrorBudget budget;
    double global_mu_ps = 0.0;
    double global_fwhm_ps = 0.0;
    int64_t tau_w_ps = 0;
    int sub_blocks_used = 0;
    size_t slice_merges = 0;
    size_t blocks_failed = 0;
    size_t dropped_leading = 0;
    size_t dropped_trailing = 0;
    double residual_rms_ps = 0.0;
    double residual_std_ps = 0.0;
    bool noise_floor_warning = false;  // 3 sigma_mu above linearisation budget
};

// Full two-stage run: align both arms, establish the coarse offset, then per
// data block sift, slice, interpolate and report the corrected peak offset.
// With tsec_enabled false only the global stage-one offset is applied.
SyncResult run_two_stage(const EventStream& stream_a, const EventStream& stream_b,
                         const PpsTrain& pps_a, const PpsTrain& pps_b, const SyncConfig& cfg);

}  // namespace qsync
