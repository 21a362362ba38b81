#include "qsync/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <future>
#include <numeric>
#include <random>
#include <stdexcept>

#include "qsync/io.hpp"
#include "qsync/rng.hpp"
#include "qsync/timetags.hpp"
#include "qsync/version.hpp"

namespace qsync {

namespace {

// Substream labels for seed derivation. Values are part of the output
// format: changing them changes every simulated dataset.
enum SeedRole : uint64_t {
    kSeedTruth = 1,
    kSeedQkd = 2,
    kSeedArmA = 3,
    kSeedArmB = 4,
    kSeedPpsA = 5,
    kSeedPpsB = 6,
    kSeedBench = 7,
};

// Generation proceeds in bounded chunks so arbitrarily long runs keep a
// flat working set. Poisson emission is memoryless, so restarting the
// process at the chunk boundary with a fresh substream is statistically
// exact.
constexpr int64_t kChunkSeconds = 8;

constexpr double kFwhmOfSigma = 2.3548200450309493;

// The delay polynomial re-expanded around t0 so a chunk can be generated
// in its own local time frame. Only the integer base rounds; the seam
// error is below half a picosecond.
ChannelState channel_for_chunk(const ChannelState& ch, int64_t t0_s) {
    ChannelState out = ch;
    const double t0 = static_cast<double>(t0_s);
    out.base_delay_ps =
        ch.base_delay_ps + std::llround(ch.delay_rate_ps_per_s * t0 +
                                        0.5e6 * ch.delay_accel_ps_per_ms2 * t0 * t0);
    out.delay_rate_ps_per_s = ch.delay_rate_ps_per_s + 1e6 * ch.delay_accel_ps_per_ms2 * t0;
    return out;
}

void append_shifted(EventStream& into, const EventStream& chunk, int64_t t0_ps) {
    into.t_ps.reserve(into.t_ps.size() + chunk.t_ps.size());
    for (int64_t t : chunk.t_ps) into.t_ps.push_back(t + t0_ps);
    if (chunk.tagged()) {
        into.tags.insert(into.tags.end(), chunk.tags.begin(), chunk.tags.end());
    }
}

// Detection jitter can carry an event across its chunk boundary, so the
// merged stream needs one final ordering pass. Stable on ties, so the
// result does not depend on how the run was chunked into memory.
void sort_with_tags(EventStream& s) {
    if (std::is_sorted(s.t_ps.begin(), s.t_ps.end())) return;
    if (!s.tagged()) {
        std::sort(s.t_ps.begin(), s.t_ps.end());
        return;
    }
    std::vector<size_t> idx(s.t_ps.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return s.t_ps[a] < s.t_ps[b]; });
    std::vector<int64_t> t(s.t_ps.size());
    std::vector<EventTag> g(s.tags.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        t[i] = s.t_ps[idx[i]];
        g[i] = s.tags[idx[i]];
    }
    s.t_ps = std::move(t);
    s.tags = std::move(g);
}

std::vector<std::pair<std::string, std::string>> base_metadata(const RunConfig& cfg) {
    return {{"config_hash", config_hash(cfg)},
            {"seed", std::to_string(cfg.seed)},
            {"version", kVersion}};
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// Per-block event counts of one stream over the data-block grid, as rates.
void block_rates(const std::vector<int64_t>& t, int64_t block_ps, int64_t n_blocks,
                 double* mean_cps, double* std_cps) {
    std::vector<double> rates;
    rates.reserve(static_cast<size_t>(n_blocks));
    const double block_s = static_cast<double>(block_ps) / static_cast<double>(kPsPerSecond);
    for (int64_t b = 0; b < n_blocks; ++b) {
        const auto lo = std::lower_bound(t.begin(), t.end(), b * block_ps);
        const auto hi = std::lower_bound(lo, t.end(), (b + 1) * block_ps);
        rates.push_back(static_cast<double>(hi - lo) / block_s);
    }
    *mean_cps = mean(rates);
    *std_cps = sample_std(rates);
}


CsvTable stability_csv(const RunConfig& cfg, const StabilityReport& rep) {
    CsvTable t;
    t.metadata = base_metadata(cfg);
    t.metadata.emplace_back("rms_ps", format_double(rep.rms_ps));
    t.metadata.emplace_back("std_ps", format_double(rep.std_ps));
    t.metadata.emplace_back("mad_sigma_ps", format_double(rep.filter.mad_sigma));
    t.metadata.emplace_back("outliers_removed", std::to_string(rep.filter.removed));
    const double fraction =
        rep.residual_ps.empty()
            ? 0.0
            : static_cast<double>(rep.filter.removed) / static_cast<double>(rep.residual_ps.size());
    t.metadata.emplace_back("outlier_fraction", format_double(fraction));
    t.metadata.emplace_back("rate_a_cps", format_double(rep.rate_a_cps));
    t.metadata.emplace_back("rate_a_std_cps", format_double(rep.rate_a_std_cps));
    t.metadata.emplace_back("rate_b_cps", format_double(rep.rate_b_cps));
    t.metadata.emplace_back("rate_b_std_cps", format_double(rep.rate_b_std_cps));
    t.metadata.emplace_back("coincidence_cps", format_double(rep.coincidence_cps));
    t.metadata.emplace_back("coincidence_std_cps", format_double(rep.coincidence_std_cps));

    t.columns = {"block_index", "t_start_ps", "residual_ps", "n_pairs", "kept"};
    const double lo = rep.filter.median - 10.0 * rep.filter.mad_sigma;
    const double hi = rep.filter.median + 10.0 * rep.filter.mad_sigma;
    for (const auto& blk : rep.sync.blocks) {
        if (blk.n_pairs == 0) continue;
        const bool kept = rep.filter.degenerate ||
                          (blk.residual_ps >= lo && blk.residual_ps <= hi);
        t.rows.push_back({std::to_string(blk.block_index), std::to_string(blk.t_start_ps),
                          format_double(blk.residual_ps), std::to_string(blk.n_pairs),
                          kept ? "1" : "0"});
    }
    return t;
}

void append_point_fields(std::vector<std::string>& row, const OperatingPoint& p) {
    row.push_back(format_double(p.loss_db));
    row.push_back(format_double(p.distance_m));
    row.push_back(format_double(p.sigma_tsec_ps));
    row.push_back(format_double(p.delta_t_ps));
    row.push_back(format_double(p.gamma_cps));
    row.push_back(format_double(p.qber));
    row.push_back(format_double(p.skr_bps));
}

const std::vector<std::string> kPointColumns = {
    "loss_db", "distance_m", "sigma_tsec_ps", "delta_t_ps", "gamma_cps", "qber", "skr_bps"};

}  // namespace

SimOutput simulate_run(const RunConfig& cfg) {
    validate(cfg);

    // Channel loss acts on the remote arm only; survival sampling happens in
    // the detector model, so it is folded into that arm's efficiency here.
    SourceDetectorModel src = cfg.source;
    src.eta_b = cfg.source.eta_b * std::pow(10.0, -cfg.channel.loss_db / 10.0);

    SimOutput out;
    const double total_s = cfg.duration_s;
    const int64_t n_chunks =
        static_cast<int64_t>(std::ceil(total_s / static_cast<double>(kChunkSeconds)));

    for (int64_t c = 0; c < n_chunks; ++c) {
        const int64_t t0_s = c * kChunkSeconds;
        const double len_s = std::min(static_cast<double>(kChunkSeconds),
                                      total_s - static_cast<double>(t0_s));
        const int64_t t0_ps = t0_s * kPsPerSecond;
        const ChannelState ch = channel_for_chunk(cfg.channel, t0_s);

        const PairSet pairs = generate_truth_pairs(
            src, len_s, derive_seed(cfg.seed, kSeedTruth, static_cast<uint64_t>(c)));
        out.truth_pairs += pairs.size();
        const auto [truth_a, truth_b] = tag_qkd_outcomes(
            pairs, src.e0, derive_seed(cfg.seed, kSeedQkd, static_cast<uint64_t>(c)));

        const EventStream det_a =
            propagate_and_detect(truth_a, Arm::A, ch, src, len_s,
                                 derive_seed(cfg.seed, kSeedArmA, static_cast<uint64_t>(c)));
        const EventStream det_b =
            propagate_and_detect(truth_b, Arm::B, ch, src, len_s,
                                 derive_seed(cfg.seed, kSeedArmB, static_cast<uint64_t>(c)));
        append_shifted(out.alice, det_a, t0_ps);
        append_shifted(out.bob, det_b, t0_ps);
    }

    sort_with_tags(out.alice);
    sort_with_tags(out.bob);
    out.alice = apply_clock(out.alice, cfg.clock_a);
    out.bob = apply_clock(out.bob, cfg.clock_b);
    out.pps_a = generate_pps(cfg.clock_a, total_s, derive_seed(cfg.seed, kSeedPpsA));
    out.pps_b = generate_pps(cfg.clock_b, total_s, derive_seed(cfg.seed, kSeedPpsB));
    return out;
}

SyncConfig sync_config_for(const RunConfig& cfg) {
    SyncConfig s = cfg.sync;
    s.sigma_event_ps = std::hypot(cfg.source.det_sigma_ps, cfg.source.ttm_sigma_ps);
    s.sigma_pps_a_ps = cfg.clock_a.pps_sigma_ps;
    s.sigma_pps_b_ps = cfg.clock_b.pps_sigma_ps;
    // The delay ramp sweeps the true offset across each alignment window;
    // uniform over the window, its spread enters the stage-one budget.
    s.eps_prop_ps = std::fabs(cfg.channel.delay_rate_ps_per_s) *
                    static_cast<double>(cfg.sync.align_window_s) / std::sqrt(12.0);
    if (s.gamma_ps_per_ms2 == 0.0) {
        s.gamma_ps_per_ms2 =
            std::fabs(cfg.channel.delay_accel_ps_per_ms2) +
            std::fabs(cfg.clock_b.drift_accel_ps_per_ms2 - cfg.clock_a.drift_accel_ps_per_ms2);
    }
    return s;
}

SyncResult run_sync(const RunConfig& cfg, const SimOutput& sim) {
    return run_two_stage(sim.alice, sim.bob, sim.pps_a, sim.pps_b, sync_config_for(cfg));
}

double default_tau_w_ps(const RunConfig& cfg) {
    if (cfg.sync.tau_w_fixed_ps > 0) return static_cast<double>(cfg.sync.tau_w_fixed_ps);
    const double delta_t =
        total_timing_uncertainty_ps(cfg.source, cfg.sync.sigma_tsec_target_ps, true);
    return cfg.sync.tau_w_scale * kFwhmOfSigma * delta_t;
}

RateModel rate_model_for(const RunConfig& cfg, double tau_w_ps) {
    RateModel r;
    r.brightness_cps = cfg.source.brightness_cps;
    r.eta_a = cfg.source.eta_a;
    r.eta_b = cfg.source.eta_b;
    r.dc_a_cps = cfg.source.dc_a_cps;
    r.dc_b_cps = cfg.source.dc_b_cps;
    r.e0 = cfg.source.e0;
    r.pol_efficiency = cfg.pol_efficiency;
    r.error_corr_f = cfg.error_corr_f;
    r.sift_fraction = cfg.sift_fraction;
    r.tau_w_ps = tau_w_ps;
    return r;
}

SyncNoiseModel sync_noise_model_for(const RunConfig& cfg) {
    const SyncConfig s = sync_config_for(cfg);
    SyncNoiseModel m;
    const double span_s = static_cast<double>(s.align_window_s);
    m.sigma2_ppsta_ps2 = ppsta_variance(s.sigma_event_ps, s.sigma_pps_a_ps, s.sigma_pps_b_ps,
                                        span_s, 0.5, s.eps_prop_ps);
    m.sigma_tb_ps = std::sqrt(ppsta_variance_single(s.sigma_event_ps, s.sigma_pps_b_ps, span_s,
                                                    0.5) +
                              s.eps_prop_ps * s.eps_prop_ps);
    m.block_ms = static_cast<double>(s.data_block_ps) / kPsPerMs;
    m.gamma_ps_per_ms2 = s.gamma_ps_per_ms2;
    m.sub_blocks = s.sub_blocks > 0 ? s.sub_blocks : 20;
    return m;
}

QkdTally tally_qkd(const RunConfig& cfg, const SimOutput& sim, const SyncResult& res) {
    QkdTally t;
    t.duration_s = cfg.duration_s;
    t.coincidences = res.coincidences.pairs.size();
    if (!sim.alice.tagged() || !sim.bob.tagged()) {
        throw std::invalid_argument("event streams carry no outcome tags");
    }
    const AlignedStream al_a = pps_align(sim.alice, sim.pps_a, cfg.sync.align_window_s);
    const AlignedStream al_b = pps_align(sim.bob, sim.pps_b, cfg.sync.align_window_s);
    for (const auto& pr : res.coincidences.pairs) {
        const EventTag& ta = al_a.events.tags.at(pr.index_a);
        const EventTag& tb = al_b.events.tags.at(pr.index_b);
        if (ta.basis != tb.basis) continue;
        ++t.basis_matched;
        if (ta.bit != tb.bit) ++t.errors;
    }
    if (t.duration_s > 0.0) t.q_cps = static_cast<double>(t.coincidences) / t.duration_s;
    if (t.basis_matched > 0) {
        t.qber = static_cast<double>(t.errors) / static_cast<double>(t.basis_matched);
        const double sifted_cps = static_cast<double>(t.basis_matched) / t.duration_s;
        t.skr_cps = secret_key_rate_cps(sifted_cps, t.qber, cfg.error_corr_f);
    }
    return t;
}

StabilityReport stability_analysis(const RunConfig& cfg, const SimOutput& sim) {
    StabilityReport rep;
    rep.sync = run_sync(cfg, sim);

    for (const auto& blk : rep.sync.blocks) {
        if (blk.n_pairs == 0) continue;
        rep.residual_ps.push_back(blk.residual_ps);
    }
    rep.filter = mad_filter(rep.residual_ps, 10.0);
    rep.rms_ps = rms(rep.filter.kept);
    rep.std_ps = sample_std(rep.filter.kept);

    const int64_t block_ps = cfg.sync.data_block_ps;
    const int64_t n_blocks = static_cast<int64_t>(rep.sync.blocks.size());
    if (n_blocks > 0) {
        block_rates(sim.alice.t_ps, block_ps, n_blocks, &rep.rate_a_cps, &rep.rate_a_std_cps);
        block_rates(sim.bob.t_ps, block_ps, n_blocks, &rep.rate_b_cps, &rep.rate_b_std_cps);
        std::vector<double> coinc;
        coinc.reserve(static_cast<size_t>(n_blocks));
        const double block_s = static_cast<double>(block_ps) / static_cast<double>(kPsPerSecond);
        for (const auto& blk : rep.sync.blocks) {
            coinc.push_back(static_cast<double>(blk.n_pairs) / block_s);
        }
        rep.coincidence_cps = mean(coinc);
        rep.coincidence_std_cps = sample_std(coinc);
    }
    return rep;
}

StabilityReport stability_run(const RunConfig& cfg) {
    const SimOutput sim = simulate_run(cfg);
    return stability_analysis(cfg, sim);
}

void write_simulation(const std::string& dir, const RunConfig& cfg, const SimOutput& sim) {
    ensure_dir(dir);
    save_config(join(dir, "config.json"), cfg);
    write_timetags(join(dir, "alice.qtt"), sim.alice);
    write_timetags(join(dir, "bob.qtt"), sim.bob);
    EventStream pa, pb;
    pa.t_ps = sim.pps_a.edges_ps;
    pb.t_ps = sim.pps_b.edges_ps;
    write_timetags(join(dir, "pps_a.qtt"), pa);
    write_timetags(join(dir, "pps_b.qtt"), pb);

    CsvTable t;
    t.metadata = base_metadata(cfg);
    t.columns = {"key", "value"};
    t.rows.push_back({"duration_s", format_double(cfg.duration_s)});
    t.rows.push_back({"truth_pairs", std::to_string(sim.truth_pairs)});
    t.rows.push_back({"events_a", std::to_string(sim.alice.size())});
    t.rows.push_back({"events_b", std::to_string(sim.bob.size())});
    t.rows.push_back({"pps_edges_a", std::to_string(sim.pps_a.size())});
    t.rows.push_back({"pps_edges_b", std::to_string(sim.pps_b.size())});
    write_csv(join(dir, "simulation.csv"), t);
}

void write_sync_result(const std::string& dir, const RunConfig& cfg, const SyncResult& res) {
    ensure_dir(dir);
    save_config(join(dir, "config.json"), cfg);

    CsvTable blocks;
    blocks.metadata = base_metadata(cfg);
    blocks.columns = {"block_index", "t_start_ps", "mu_ps", "n_pairs", "sigma_mu_ps",
                      "residual_ps"};
    for (const auto& blk : res.blocks) {
        blocks.rows.push_back({std::to_string(blk.block_index), std::to_string(blk.t_start_ps),
                               format_double(blk.mu_ps), std::to_string(blk.n_pairs),
                               format_double(blk.sigma_mu_ps), format_double(blk.residual_ps)});
    }
    write_csv(join(dir, "blocks.csv"), blocks);

    CsvTable s;
    s.metadata = base_metadata(cfg);
    s.columns = {"key", "value"};
    s.rows.push_back({"global_mu_ps", format_double(res.global_mu_ps)});
    s.rows.push_back({"global_fwhm_ps", format_double(res.global_fwhm_ps)});
    s.rows.push_back({"tau_w_ps", std::to_string(res.tau_w_ps)});
    s.rows.push_back({"sub_blocks_used", std::to_string(res.sub_blocks_used)});
    s.rows.push_back({"slice_merges", std::to_string(res.slice_merges)});
    s.rows.push_back({"blocks_failed", std::to_string(res.blocks_failed)});
    s.rows.push_back({"dropped_leading", std::to_string(res.dropped_leading)});
    s.rows.push_back({"dropped_trailing", std::to_string(res.dropped_trailing)});
    s.rows.push_back({"coincidences", std::to_string(res.coincidences.pairs.size())});
    s.rows.push_back({"residual_rms_ps", format_double(res.residual_rms_ps)});
    s.rows.push_back({"residual_std_ps", format_double(res.residual_std_ps)});
    s.rows.push_back({"sigma2_ppsta_ps2", format_double(res.budget.sigma2_ppsta)});
    s.rows.push_back({"sigma2_ts_ps2", format_double(res.budget.sigma2_ts)});
    s.rows.push_back({"sigma2_mu_ps2", format_double(res.budget.sigma2_mu)});
    s.rows.push_back({"sigma2_tsec_ps2", format_double(res.budget.sigma2_tsec)});
    s.rows.push_back({"noise_floor_warning", res.noise_floor_warning ? "1" : "0"});
    write_csv(join(dir, "sync_summary.csv"), s);
}

void write_stability(const std::string& dir, const RunConfig& cfg, const StabilityReport& rep) {
    ensure_dir(dir);
    save_config(join(dir, "config.json"), cfg);
    write_csv(join(dir, "stability.csv"), stability_csv(cfg, rep));
}

void write_loss_curve(const std::string& dir, const RunConfig& cfg,
                      const std::vector<OperatingPoint>& points) {
    ensure_dir(dir);
    save_config(join(dir, "config.json"), cfg);
    CsvTable t;
    t.metadata = base_metadata(cfg);
    t.columns = kPointColumns;
    for (const auto& p : points) {
        std::vector<std::string> row;
        append_point_fields(row, p);
        t.rows.push_back(std::move(row));
    }
    write_csv(join(dir, "loss_curve.csv"), t);
}

void write_qkd(const std::string& dir, const RunConfig& cfg, const QkdTally& tally) {
    ensure_dir(dir);
    save_config(join(dir, "config.json"), cfg);
    CsvTable t;
    t.metadata = base_metadata(cfg);
    t.columns = {"coincidences", "basis_matched", "errors", "duration_s",
                 "q_cps",         "qber",          "skr_cps"};
    t.rows.push_back({std::to_string(tally.coincidences), std::to_string(tally.basis_matched),
                      std::to_string(tally.errors), format_double(tally.duration_s),
                      format_double(tally.q_cps), format_double(tally.qber),
                      format_double(tally.skr_cps)});
    write_csv(join(dir, "qkd.csv"), t);
}

BenchResult bench_correlator(size_t n_a, size_t n_b, int64_t n_bins, int64_t bin_width_ps,
                             size_t trials, uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("need at least one trial");

    // Poisson-like streams over roughly one second, built from exponential
    // gaps so they arrive sorted.
    const auto make_stream = [&](size_t n, uint64_t role_index) {
        std::vector<int64_t> t;
        t.reserve(n);
        if (n == 0) return t;
        auto eng = make_engine(derive_seed(seed, kSeedBench, role_index));
        std::exponential_distribution<double> gap(static_cast<double>(n) / 1e12);
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            acc += gap(eng);
            t.push_back(static_cast<int64_t>(acc));
        }
        return t;
    };
    const std::vector<int64_t> ta = make_stream(n_a, 0);
    const std::vector<int64_t> tb = make_stream(n_b, 1);

    BenchResult r;
    r.n_events = n_a + n_b;
    r.trials = trials;

    // Warm-up pass: touches the memory and settles the clock, not counted.
    CorrelationHistogram h = dual_pointer_correlate(ta, tb, n_bins, bin_width_ps, 0);

    std::vector<double> rates;
    rates.reserve(trials);
    for (size_t k = 0; k < trials; ++k) {
        const auto start = std::chrono::steady_clock::now();
        h = dual_pointer_correlate(ta, tb, n_bins, bin_width_ps, 0);
        const auto stop = std::chrono::steady_clock::now();
        const double sec = std::chrono::duration<double>(stop - start).count();
        rates.push_back(static_cast<double>(r.n_events) / std::max(sec, 1e-12));
    }
    r.iterations = h.iterations;
    r.events_per_s_mean = mean(rates);
    r.events_per_s_std = sample_std(rates);
    return r;
}

RunConfig tabletop_defaults() {
    RunConfig cfg;
    cfg.duration_s = 10.0;
    cfg.seed = 1;
    cfg.error_corr_f = 1.09;
    cfg.sift_fraction = 1.0;
    cfg.pol_efficiency = 0.9;

    cfg.source.brightness_cps = 1e6;
    cfg.source.coherence_sigma_ps = 3.0;
    cfg.source.det_sigma_ps = 45.0;
    cfg.source.ttm_sigma_ps = 45.0;
    cfg.source.eta_a = 0.077;
    cfg.source.eta_b = 0.077;
    cfg.source.dc_a_cps = 1000.0;
    cfg.source.dc_b_cps = 1000.0;
    cfg.source.e0 = 0.01;
    cfg.source.ttm_resolution_ps = 1;

    cfg.clock_a.pps_sigma_ps = 1000.0;
    cfg.clock_b.pps_sigma_ps = 1000.0;

    cfg.channel.base_delay_ps = 100'000;  // 100 ns of fixed path
    cfg.channel.delay_rate_ps_per_s = 300.0;
    cfg.channel.delay_accel_ps_per_ms2 = 0.0;
    cfg.channel.loss_db = 7.5;

    cfg.sync.align_window_s = 1;
    cfg.sync.sub_blocks = 20;
    cfg.sync.tsec_enabled = true;
    cfg.sync.tau_w_scale = 1.2;
    cfg.sync.data_block_ps = kPsPerSecond;
    cfg.sync.sigma_tsec_target_ps = 150.0;
    // Working assumption for the drift curvature inside one block; drives
    // the automatic slice bound and the model trade-off curves.
    cfg.sync.gamma_ps_per_ms2 = 0.3;

    cfg.link.wavelength_m = 1550e-9;
    cfg.link.d_t_m = 0.0246;
    cfg.link.d_r_m = 0.0246;
    cfg.link.r0_m = 0.20;
    cfg.link.tau_ext = 0.02;
    cfg.link.zenith_rad = 0.0;
    return cfg;
}

const std::vector<std::string>& reproduce_targets() {
    static const std::vector<std::string> names = {"fig3a", "fig3b", "fig5a", "fig6"};
    return names;
}

void reproduce_target(const RunConfig& cfg, const std::string& name, const std::string& dir) {
    validate(cfg);
    ensure_dir(dir);
    save_config(join(dir, "config.json"), cfg);
    const RateModel rate = rate_model_for(cfg, default_tau_w_ps(cfg));
    const SyncNoiseModel noise = sync_noise_model_for(cfg);

    if (name == "fig3a") {
        // Corrected-residual trade-off against the slice count at deep
        // channel loss, where the per-slice pair budget matters.
        const auto curve = skr_vs_subblocks(rate, cfg.source, noise, 20.64, 1, 60, &cfg.link);
        CsvTable t;
        t.metadata = base_metadata(cfg);
        t.columns = {"sub_blocks"};
        t.columns.insert(t.columns.end(), kPointColumns.begin(), kPointColumns.end());
        for (const auto& p : curve) {
            std::vector<std::string> row{std::to_string(p.sub_blocks)};
            append_point_fields(row, p.point);
            t.rows.push_back(std::move(row));
        }
        write_csv(join(dir, "fig3a.csv"), t);
        return;
    }
    if (name == "fig3b") {
        // Key rate against the slice count across operating losses.
        const std::vector<double> losses = {7.5, 14.0, 20.64};
        CsvTable t;
        t.metadata = base_metadata(cfg);
        t.columns = {"sub_blocks"};
        t.columns.insert(t.columns.end(), kPointColumns.begin(), kPointColumns.end());
        for (double loss : losses) {
            const auto curve = skr_vs_subblocks(rate, cfg.source, noise, loss, 1, 60, &cfg.link);
            for (const auto& p : curve) {
                std::vector<std::string> row{std::to_string(p.sub_blocks)};
                append_point_fields(row, p.point);
                t.rows.push_back(std::move(row));
            }
        }
        write_csv(join(dir, "fig3b.csv"), t);
        return;
    }
    if (name == "fig5a") {
        // Key rate against channel loss on a half-decibel grid.
        std::vector<double> losses;
        for (int i = 1; i <= 48; ++i) losses.push_back(0.5 * i);
        const auto curve = skr_vs_loss_curve(rate, cfg.source, noise, losses, &cfg.link);
        CsvTable t;
        t.metadata = base_metadata(cfg);
        t.columns = kPointColumns;
        for (const auto& p : curve) {
            std::vector<std::string> row;
            append_point_fields(row, p);
            t.rows.push_back(std::move(row));
        }
        write_csv(join(dir, "fig5a.csv"), t);
        return;
    }
    if (name == "fig6") {
        // Simulated long-run drift series with robust statistics.
        const StabilityReport rep = stability_run(cfg);
        write_csv(join(dir, "fig6.csv"), stability_csv(cfg, rep));
        return;
    }
    throw std::invalid_argument("unknown reproduce target: " + name);
}

std::vector<SweepPointResult> sweep_subblocks(const RunConfig& cfg,
                                              const std::vector<int>& s_values, int workers) {
    if (s_values.empty()) return {};
    const SimOutput sim = simulate_run(cfg);

    const auto job = [&](int s) {
        RunConfig local = cfg;
        local.sync.sub_blocks = s;
        const SyncResult res = run_sync(local, sim);
        SweepPointResult p;
        p.sub_blocks = s;
        p.residual_rms_ps = res.residual_rms_ps;
        p.residual_std_ps = res.residual_std_ps;
        p.blocks_failed = res.blocks_failed;
        p.slice_merges = res.slice_merges;
        return p;
    };

    const size_t n = s_values.size();
    std::vector<SweepPointResult> out(n);
    const size_t lanes = workers < 1 ? 1 : std::min<size_t>(static_cast<size_t>(workers), n);
    if (lanes == 1) {
        for (size_t i = 0; i < n; ++i) out[i] = job(s_values[i]);
        return out;
    }
    // Bounded wave of async tasks; results land by index, so scheduling
    // order never shows in the output.
    std::vector<std::future<SweepPointResult>> inflight;
    std::vector<size_t> slots;
    for (size_t i = 0; i < n; ++i) {
        if (inflight.size() == lanes) {
            out[slots.front()] = inflight.front().get();
            inflight.erase(inflight.begin());
            slots.erase(slots.begin());
        }
        inflight.push_back(std::async(std::launch::async, job, s_values[i]));
        slots.push_back(i);
    }
    for (size_t k = 0; k < inflight.size(); ++k) out[slots[k]] = inflight[k].get();
    return out;
}

void write_sweep(const std::string& dir, const RunConfig& cfg,
                 const std::vector<SweepPointResult>& points) {
    ensure_dir(dir);
    save_config(join(dir, "config.json"), cfg);
    CsvTable t;
    t.metadata = base_metadata(cfg);
    t.columns = {"sub_blocks", "residual_rms_ps", "residual_std_ps", "blocks_failed",
                 "slice_merges"};
    for (const auto& p : points) {
        t.rows.push_back({std::to_string(p.sub_blocks), format_double(p.residual_rms_ps),
                          format_double(p.residual_std_ps), std::to_string(p.blocks_failed),
                          std::to_string(p.slice_merges)});
    }
    write_csv(join(dir, "sweep.csv"), t);
}

}  // namespace qsync
