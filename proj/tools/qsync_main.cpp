// Command line front end: simulate runs, synchronise them, sweep operating
// parameters, benchmark the correlator and regenerate the reference
// datasets. Every run writes into its own directory named after the config
// hash, so repeated invocations never clobber each other.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsync/config.hpp"
#include "qsync/pipeline.hpp"
#include "qsync/version.hpp"

namespace {

using namespace qsync;

std::string utc_stamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

// Options shared by every data-producing subcommand.
struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("-c,--config", o.config_path, "Run configuration (JSON)")
        ->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", o.out_dir, "Output directory (default: derived from config hash)");
    cmd->add_option("--seed", o.seed, "Override the config seed")
        ->each([&o](const std::string&) { o.seed_set = true; });
}

RunConfig load_or_default(const CommonOpts& o) {
    RunConfig cfg = o.config_path.empty() ? tabletop_defaults() : load_config(o.config_path);
    if (o.seed_set) cfg.seed = o.seed;
    validate(cfg);
    return cfg;
}

std::string run_dir(const CommonOpts& o, const RunConfig& cfg, const std::string& kind) {
    if (!o.out_dir.empty()) return o.out_dir;
    return kind + "-" + config_hash(cfg).substr(0, 8) + "-" + utc_stamp();
}

int cmd_simulate(const CommonOpts& o) {
    const RunConfig cfg = load_or_default(o);
    const SimOutput sim = simulate_run(cfg);
    const std::string dir = run_dir(o, cfg, "simulate");
    write_simulation(dir, cfg, sim);
    std::printf("events: %zu (A) %zu (B), pps edges: %zu/%zu, truth pairs: %" PRIu64 "\n",
                sim.alice.t_ps.size(), sim.bob.t_ps.size(), sim.pps_a.edges_ps.size(),
                sim.pps_b.edges_ps.size(), sim.truth_pairs);
    std::printf("wrote %s\n", dir.c_str());
    return 0;
}

int cmd_sync(const CommonOpts& o) {
    const RunConfig cfg = load_or_default(o);
    const SimOutput sim = simulate_run(cfg);
    const SyncResult res = run_sync(cfg, sim);
    const QkdTally tally = tally_qkd(cfg, sim, res);
    const std::string dir = run_dir(o, cfg, "sync");
    write_sync_result(dir, cfg, res);
    write_qkd(dir, cfg, tally);

    size_t with_pairs = 0;
    for (const auto& b : res.blocks)
        if (b.n_pairs > 0) ++with_pairs;
    std::printf("blocks: %zu (%zu with pairs), coincidences: %" PRIu64 " (%.1f cps)\n",
                res.blocks.size(), with_pairs, tally.coincidences, tally.q_cps);
    std::printf("qber: %.4f, key rate: %.1f bps\n", tally.qber, tally.skr_cps);
    if (res.noise_floor_warning)
        std::printf("note: slice statistics sit near the model noise floor\n");
    std::printf("wrote %s\n", dir.c_str());
    return 0;
}

int cmd_sweep(const CommonOpts& o, const std::string& target, double lo, double hi, double step,
              int workers) {
    if (step <= 0) throw std::invalid_argument("--step must be positive");
    if (hi < lo) throw std::invalid_argument("--max must be at least --min");
    const RunConfig cfg = load_or_default(o);
    const std::string dir = run_dir(o, cfg, "sweep-" + target);

    if (target == "subblocks") {
        std::vector<int> s_values;
        for (double s = lo; s <= hi + 1e-9; s += step) s_values.push_back((int)std::lround(s));
        const auto points = sweep_subblocks(cfg, s_values, workers);
        write_sweep(dir, cfg, points);
        std::printf("swept %zu slice counts, wrote %s\n", points.size(), dir.c_str());
        return 0;
    }
    if (target == "loss") {
        std::vector<double> losses;
        for (double l = lo; l <= hi + 1e-9; l += step) losses.push_back(l);
        const RateModel rate = rate_model_for(cfg, default_tau_w_ps(cfg));
        const SyncNoiseModel noise = sync_noise_model_for(cfg);
        const auto points = skr_vs_loss_curve(rate, cfg.source, noise, losses, &cfg.link);
        write_loss_curve(dir, cfg, points);
        std::printf("evaluated %zu loss points, wrote %s\n", points.size(), dir.c_str());
        return 0;
    }
    throw std::invalid_argument("unknown sweep target: " + target);
}

int cmd_bench(size_t na, size_t nb, int64_t bins, int64_t bin_ps, size_t trials, uint64_t seed) {
    const BenchResult b = bench_correlator(na, nb, bins, bin_ps, trials, seed);
    std::printf("correlated %zu events x%zu: %.3g +- %.2g events/s\n", b.n_events, b.trials,
                b.events_per_s_mean, b.events_per_s_std);
    return 0;
}

int cmd_reproduce(const CommonOpts& o, const std::string& target) {
    const RunConfig cfg = load_or_default(o);
    std::vector<std::string> names;
    if (target == "all")
        names = reproduce_targets();
    else
        names.push_back(target);
    const std::string dir = run_dir(o, cfg, "reproduce");
    for (const auto& name : names) {
        reproduce_target(cfg, name, dir);
        std::printf("wrote %s/%s.csv\n", dir.c_str(), name.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage clock synchronisation for entangled-photon time tags"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOpts sim_o;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate one run and store the streams");
    add_common(simulate, sim_o);

    CommonOpts sync_o;
    CLI::App* sync =
        app.add_subcommand("sync", "Simulate, synchronise and tally one run end to end");
    add_common(sync, sync_o);

    CommonOpts sweep_o;
    std::string sweep_target = "subblocks";
    double sweep_min = 1, sweep_max = 60, sweep_step = 1;
    int workers = 4;
    CLI::App* sweep = app.add_subcommand("sweep", "Scan slice counts or channel loss");
    add_common(sweep, sweep_o);
    sweep->add_option("-t,--target", sweep_target, "subblocks or loss")
        ->check(CLI::IsMember({"subblocks", "loss"}));
    sweep->add_option("--min", sweep_min, "First value of the scan");
    sweep->add_option("--max", sweep_max, "Last value of the scan");
    sweep->add_option("--step", sweep_step, "Scan increment");
    sweep->add_option("-j,--workers", workers, "Concurrent correction passes")
        ->check(CLI::PositiveNumber);

    size_t bench_na = 144000, bench_nb = 133000, bench_trials = 10;
    int64_t bench_bins = 20000, bench_bin_ps = 50;
    uint64_t bench_seed = 1;
    CLI::App* bench = app.add_subcommand("bench", "Time the coincidence kernel");
    bench->add_option("--na", bench_na, "Events in stream A");
    bench->add_option("--nb", bench_nb, "Events in stream B");
    bench->add_option("--bins", bench_bins, "Histogram bins");
    bench->add_option("--bin-ps", bench_bin_ps, "Bin width in ps");
    bench->add_option("--trials", bench_trials, "Timed repetitions");
    bench->add_option("--seed", bench_seed, "Stream seed");

    CommonOpts rep_o;
    std::string rep_target = "all";
    CLI::App* reproduce = app.add_subcommand("reproduce", "Regenerate the reference datasets");
    add_common(reproduce, rep_o);
    reproduce->add_option("-t,--target", rep_target, "fig3a, fig3b, fig5a, fig6 or all")
        ->check(CLI::IsMember({"fig3a", "fig3b", "fig5a", "fig6", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim_o);
        if (sync->parsed()) return cmd_sync(sync_o);
        if (sweep->parsed())
            return cmd_sweep(sweep_o, sweep_target, sweep_min, sweep_max, sweep_step, workers);
        if (bench->parsed())
            return cmd_bench(bench_na, bench_nb, bench_bins, bench_bin_ps, bench_trials,
                             bench_seed);
        if (reproduce->parsed()) return cmd_reproduce(rep_o, rep_target);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
