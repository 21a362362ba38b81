#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsync/config.hpp"
#include "qsync/events.hpp"
#include "qsync/linkbudget.hpp"
#include "qsync/stats.hpp"
#include "qsync/syncproto.hpp"

namespace qsync {

struct SimOutput {
    EventStream alice;
    EventStream bob;
    PpsTrain pps_a;
    PpsTrain pps_b;
    uint64_t truth_pairs = 0;
};

// End-to-end generation of one run: pair emission, outcome tagging,
// propagation and detection of both arms (channel loss folded into the
// remote arm efficiency), local clock maps and both disciplining trains.
// Long runs are generated in bounded chunks, each owning derived seed
// substreams, so memory stays flat and reruns are bit identical.
SimOutput simulate_run(const RunConfig& cfg);

// Protocol settings derived from the run description: jitter and reference
// deviations for the reported error budget, the in-window propagation
// spread from the delay ramp, the slicing curvature from the delay
// acceleration.
SyncConfig sync_config_for(const RunConfig& cfg);

SyncResult run_sync(const RunConfig& cfg, const SimOutput& sim);

// Rate model of the same run for the analytic key-rate curves. eta_b stays
// the device efficiency; channel loss is applied by the curve helpers.
RateModel rate_model_for(const RunConfig& cfg, double tau_w_ps);

// Synchronisation noise terms of the run for the analytic curves.
SyncNoiseModel sync_noise_model_for(const RunConfig& cfg);

// Coincidence window implied by the config: the fixed width when one is set,
// otherwise the scaled FWHM of the combined timing uncertainty at the
// residual target.
double default_tau_w_ps(const RunConfig& cfg);

// Polarisation bookkeeping over the sifted coincidences: basis-matched
// fraction, error rate and the resulting key rate.
struct QkdTally {
    uint64_t coincidences = 0;
    uint64_t basis_matched = 0;
    uint64_t errors = 0;
    double duration_s = 0.0;
    double q_cps = 0.0;
    double qber = 0.0;
    double skr_cps = 0.0;
};

QkdTally tally_qkd(const RunConfig& cfg, const SimOutput& sim, const SyncResult& res);

// Long-run health check: per-block corrected offsets as a drift series,
// robust outlier rejection, residual spread and the observed count rates.
struct StabilityReport {
    std::vector<double> residual_ps;  // one entry per data block with pairs
    MadFilterReport filter;
    double rms_ps = 0.0;  // over the kept blocks
    double std_ps = 0.0;
    double rate_a_cps = 0.0;
    double rate_a_std_cps = 0.0;
    double rate_b_cps = 0.0;
    double rate_b_std_cps = 0.0;
    double coincidence_cps = 0.0;
    double coincidence_std_cps = 0.0;
    SyncResult sync;
};

StabilityReport stability_run(const RunConfig& cfg);
StabilityReport stability_analysis(const RunConfig& cfg, const SimOutput& sim);

// Artifact writers. Every file is content deterministic: no wall time, no
// machine identity, canonical number formatting.
void write_simulation(const std::string& dir, const RunConfig& cfg, const SimOutput& sim);
void write_sync_result(const std::string& dir, const RunConfig& cfg, const SyncResult& res);
void write_stability(const std::string& dir, const RunConfig& cfg, const StabilityReport& rep);
void write_loss_curve(const std::string& dir, const RunConfig& cfg,
                      const std::vector<OperatingPoint>& points);
void write_qkd(const std::string& dir, const RunConfig& cfg, const QkdTally& tally);

struct BenchResult {
    size_t n_events = 0;
    size_t trials = 0;
    double events_per_s_mean = 0.0;
    double events_per_s_std = 0.0;
    uint64_t iterations = 0;  // pointer advances of the last trial
};

// Times the correlation kernel on synthetic streams. One warm-up pass is
// excluded from the statistics; at least ten timed trials.
BenchResult bench_correlator(size_t n_a, size_t n_b, int64_t n_bins, int64_t bin_width_ps,
                             size_t trials = 10, uint64_t seed = 1);

// Regenerates one named dataset into dir. Known targets: fig3a (corrected
// spread and key rate versus slice count at deep channel loss), fig3b (key
// rate versus slice count across losses), fig5a (key-rate curve over channel
// loss), fig6 (per-block drift series of a simulated run). Throws on unknown
// names.
void reproduce_target(const RunConfig& cfg, const std::string& name, const std::string& dir);

const std::vector<std::string>& reproduce_targets();

// Table-top reference setup used by the reproduction targets and shipped
// as the default config.
RunConfig tabletop_defaults();

struct SweepPointResult {
    int sub_blocks = 0;
    double residual_rms_ps = 0.0;
    double residual_std_ps = 0.0;
    size_t blocks_failed = 0;
    size_t slice_merges = 0;
};

// Re-runs the correction with each slice count on one shared simulation.
// Points run concurrently up to `workers`; results are ordered by input
// index, so the worker count never changes the output.
std::vector<SweepPointResult> sweep_subblocks(const RunConfig& cfg,
                                              const std::vector<int>& s_values, int workers);

void write_sweep(const std::string& dir, const RunConfig& cfg,
                 const std::vector<SweepPointResult>& points);

}  // namespace qsync
