#include "qsync/syncproto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace qsync {

namespace {

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

// Counts values into the correlator's bin convention so fit_peak sees the
// same axis mapping on both paths.
CorrelationHistogram histogram_of(const std::vector<int64_t>& values, int64_t n_bins,
                                  int64_t bin_width_ps, int64_t offset_bins) {
    if (n_bins <= 0 || bin_width_ps <= 0) {
        throw std::invalid_argument("histogram geometry must be positive");
    }
    CorrelationHistogram h;
    h.counts.assign(static_cast<size_t>(n_bins), 0);
    h.bin_width_ps = bin_width_ps;
    h.offset_bins = offset_bins;
    const int64_t lo = h.lower();
    const int64_t hi = h.upper();
    for (int64_t v : values) {
        const int64_t k = floor_div(v, bin_width_ps) - offset_bins;
        if (k >= lo && k < hi) ++h.counts[static_cast<size_t>(k - lo)];
    }
    return h;
}

struct Moments {
    double mean = 0.0;
    double var = std::numeric_limits<double>::quiet_NaN();
    size_t n = 0;
};

Moments moments_of(const std::vector<int64_t>& values) {
    Moments m;
    m.n = values.size();
    if (m.n == 0) return m;
    double sum = 0.0;
    for (int64_t v : values) sum += static_cast<double>(v);
    m.mean = sum / static_cast<double>(m.n);
    if (m.n >= 2) {
        double ss = 0.0;
        for (int64_t v : values) {
            const double d = static_cast<double>(v) - m.mean;
            ss += d * d;
        }
        m.var = ss / static_cast<double>(m.n - 1);
    }
    return m;
}

// Half-open index range of timestamps in [lo, hi).
std::pair<size_t, size_t> slice_range(const std::vector<int64_t>& t, int64_t lo, int64_t hi) {
    const auto first = std::lower_bound(t.begin(), t.end(), lo);
    const auto last = std::lower_bound(first, t.end(), hi);
    return {static_cast<size_t>(first - t.begin()), static_cast<size_t>(last - t.begin())};
}

}  // namespace

AlignedStream pps_align(const EventStream& events, const PpsTrain& pps, int window_n) {
    if (window_n < 1) throw std::invalid_argument("alignment window must be at least one second");
    events.validate();
    const auto& p = pps.edges_ps;
    if (p.size() < static_cast<size_t>(window_n) + 1) {
        throw std::invalid_argument("reference train shorter than one alignment window");
    }
    for (size_t i = 1; i < p.size(); ++i) {
        if (p[i] <= p[i - 1]) throw std::invalid_argument("reference edges must increase");
    }

    const size_t full_windows = (p.size() - 1) / static_cast<size_t>(window_n);
    const int64_t span_ps = static_cast<int64_t>(window_n) * kPsPerSecond;
    const bool tagged = events.tagged();

    AlignedStream out;
    out.window_n = window_n;
    out.events.t_ps.reserve(events.size());
    if (tagged) out.events.tags.reserve(events.size());

    size_t w = 0;
    for (size_t i = 0; i < events.size(); ++i) {
        const int64_t t = events.t_ps[i];
        if (t < p[0]) {
            ++out.dropped_leading;
            continue;
        }
        while (w < full_windows && t >= p[(w + 1) * static_cast<size_t>(window_n)]) ++w;
        if (w >= full_windows) {
            ++out.dropped_trailing;
            continue;
        }
        const int64_t p0 = p[w * static_cast<size_t>(window_n)];
        const int64_t p1 = p[(w + 1) * static_cast<size_t>(window_n)];
        const double frac = static_cast<double>(t - p0) / static_cast<double>(p1 - p0);
        const int64_t aligned =
            static_cast<int64_t>(w) * span_ps + std::llround(frac * static_cast<double>(span_ps));
        out.events.t_ps.push_back(aligned);
        if (tagged) out.events.tags.push_back(events.tags[i]);
    }
    return out;
}

double ppsta_variance_single(double sigma_det_ps, double sigma_pps_ps, double window_span_s,
                             double t_frac) {
    if (window_span_s <= 0.0) throw std::invalid_argument("window span must be positive");
    if (t_frac < 0.0 || t_frac > 1.0) {
        throw std::invalid_argument("in-window position must lie in [0, 1]");
    }
    const double w = (1.0 - t_frac) * (1.0 - t_frac) + t_frac * t_frac;
    return (sigma_det_ps * sigma_det_ps + w * sigma_pps_ps * sigma_pps_ps) / window_span_s;
}

double ppsta_variance(double sigma_det_ps, double sigma_pps_a_ps, double sigma_pps_b_ps,
                      double window_span_s, double t_frac, double eps_prop_ps) {
    return ppsta_variance_single(sigma_det_ps, sigma_pps_a_ps, window_span_s, t_frac) +
           ppsta_variance_single(sigma_det_ps, sigma_pps_b_ps, window_span_s, t_frac) +
           eps_prop_ps * eps_prop_ps;
}

GaussianFit coarse_offset(const AlignedStream& a, const AlignedStream& b, int64_t n_bins,
                          int64_t bin_width_ps, int64_t offset_bins) {
    const auto hist =
        dual_pointer_correlate(a.events.t_ps, b.events.t_ps, n_bins, bin_width_ps, offset_bins);
    return fit_peak(hist);
}

SubBlockPartition partition_and_estimate(const CoincidenceSet& coincidences, int n_blocks,
                                         int64_t span_ps, int64_t start_ps, NodeAnchor anchor,
                                         double sigma2_event_ps2) {
    if (n_blocks < 1) throw std::invalid_argument("need at least one slice");
    if (span_ps <= 0) throw std::invalid_argument("span must be positive");

    const size_t s_count = static_cast<size_t>(n_blocks);
    SubBlockPartition part;
    part.block_span_ps = static_cast<double>(span_ps) / static_cast<double>(s_count);
    part.boundaries_ps.resize(s_count + 1);
    for (size_t s = 0; s <= s_count; ++s) {
        part.boundaries_ps[s] =
            start_ps + static_cast<int64_t>((static_cast<__int128>(span_ps) * s) / s_count);
    }

    std::vector<double> sum(s_count, 0.0), sumsq(s_count, 0.0), possum(s_count, 0.0);
    part.counts.assign(s_count, 0);

    for (const auto& pr : coincidences.pairs) {
        const int64_t rel = pr.t_b_ps - start_ps;
        if (rel < 0 || rel >= span_ps) continue;
        const size_t s =
            static_cast<size_t>((static_cast<__int128>(rel) * s_count) / span_ps);
        const double d = static_cast<double>(pr.delta_ps);
        sum[s] += d;
        sumsq[s] += d * d;
        possum[s] += static_cast<double>(pr.t_b_ps);
        ++part.counts[s];
    }

    part.means_ps.assign(s_count, std::numeric_limits<double>::quiet_NaN());
    part.variances_ps2.assign(s_count, std::numeric_limits<double>::quiet_NaN());
    for (size_t s = 0; s < s_count; ++s) {
        const size_t n = part.counts[s];
        if (n == 0) continue;
        const double mean = sum[s] / static_cast<double>(n);
        part.means_ps[s] = mean;
        if (std::isfinite(sigma2_event_ps2)) {
            part.variances_ps2[s] = sigma2_event_ps2 / static_cast<double>(n);
        } else if (n >= 2) {
            const double sample_var =
                std::max(0.0, (sumsq[s] - static_cast<double>(n) * mean * mean) /
                                  static_cast<double>(n - 1));
            part.variances_ps2[s] = sample_var / static_cast<double>(n);
        }
        const int64_t pos = anchor == NodeAnchor::Center
                                ? std::llround(possum[s] / static_cast<double>(n))
                                : part.boundaries_ps[s + 1];
        part.node_pos_ps.push_back(pos);
        part.node_value_ps.push_back(mean);
        part.node_weight.push_back(n);
    }
    return part;
}

void merge_starved_blocks(SubBlockPartition& partition, size_t min_pairs) {
    if (min_pairs <= 1) return;
    auto& pos = partition.node_pos_ps;
    auto& val = partition.node_value_ps;
    auto& wgt = partition.node_weight;
    while (pos.size() > 1) {
        size_t starved = pos.size();
        for (size_t i = 0; i < wgt.size(); ++i) {
            if (wgt[i] < min_pairs) {
                starved = i;
                break;
            }
        }
        if (starved == pos.size()) break;

        size_t into;
        if (starved == 0) {
            into = 1;
        } else if (starved == wgt.size() - 1) {
            into = starved - 1;
        } else {
            into = wgt[starved - 1] <= wgt[starved + 1] ? starved - 1 : starved + 1;
        }
        const double w1 = static_cast<double>(wgt[starved]);
        const double w2 = static_cast<double>(wgt[into]);
        const double wt = w1 + w2;
        val[into] = (val[starved] * w1 + val[into] * w2) / wt;
        pos[into] = std::llround((static_cast<double>(pos[starved]) * w1 +
                                  static_cast<double>(pos[into]) * w2) /
                                 wt);
        wgt[into] += wgt[starved];
        pos.erase(pos.begin() + static_cast<ptrdiff_t>(starved));
        val.erase(val.begin() + static_cast<ptrdiff_t>(starved));
        wgt.erase(wgt.begin() + static_cast<ptrdiff_t>(starved));
        ++partition.merges;
    }
}

double tsec_correct(int64_t t_b_ps, const SubBlockPartition& partition, bool* clamped) {
    const auto& pos = partition.node_pos_ps;
    const auto& val = partition.node_value_ps;
    if (pos.empty()) throw std::invalid_argument("partition has no interpolation nodes");
    if (clamped) *clamped = false;

    if (t_b_ps <= pos.front()) {
        if (clamped && t_b_ps < pos.front()) *clamped = true;
        return val.front();
    }
    if (t_b_ps >= pos.back()) {
        if (clamped && t_b_ps > pos.back()) *clamped = true;
        return val.back();
    }
    const auto it = std::upper_bound(pos.begin(), pos.end(), t_b_ps);
    const size_t hi = static_cast<size_t>(it - pos.begin());
    const size_t lo = hi - 1;
    const double alpha = static_cast<double>(t_b_ps - pos[lo]) /
                         static_cast<double>(pos[hi] - pos[lo]);
    return (1.0 - alpha) * val[lo] + alpha * val[hi];
}

TsecVariance tsec_variance(double alpha, double sigma2_mu_prev, double sigma2_mu_next,
                           double sigma_tb_ps, double delta_tau_s_ps) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw std::invalid_argument("interpolation position must lie in [0, 1]");
    }
    if (delta_tau_s_ps <= 0.0) throw std::invalid_argument("slice length must be positive");
    TsecVariance v;
    const double r = sigma_tb_ps / delta_tau_s_ps;
    v.sigma2_ts = r * r;
    v.sigma2_mu = (1.0 - alpha) * (1.0 - alpha) * sigma2_mu_prev + alpha * alpha * sigma2_mu_next;
    v.sigma2_tsec = v.sigma2_ts + v.sigma2_mu;
    return v;
}

double min_subblocks(double t_n_ms, double gamma_ps_per_ms2, double delta_eta_ps) {
    if (t_n_ms <= 0.0) throw std::invalid_argument("block length must be positive");
    if (delta_eta_ps <= 0.0) throw std::invalid_argument("linearisation budget must be positive");
    return t_n_ms * std::sqrt(std::fabs(gamma_ps_per_ms2) / (8.0 * delta_eta_ps));
}

std::optional<double> min_pairs_vs_ppsta(double sigma2_ppsta_ps2, double sigma_tb_ps,
                                         double delta_tau_s_ps) {
    if (sigma2_ppsta_ps2 <= 0.0) throw std::invalid_argument("stage-one variance must be positive");
    if (delta_tau_s_ps <= 0.0) throw std::invalid_argument("slice length must be positive");
    const double r = sigma_tb_ps / delta_tau_s_ps;
    const double denom = sigma2_ppsta_ps2 - r * r;
    if (denom <= 0.0) return std::nullopt;
    return sigma2_ppsta_ps2 / (2.0 * denom);
}

double min_pairs_cramer_rao(double sigma_tsec_ps, double tolerance_ps, double confidence) {
    if (sigma_tsec_ps < 0.0) throw std::invalid_argument("deviation must be non-negative");
    if (tolerance_ps <= 0.0) throw std::invalid_argument("tolerance must be positive");
    if (std::fabs(confidence - 0.95) > 1e-12) {
        throw std::invalid_argument("only the 95% confidence level is supported");
    }
    const double z = 1.96;
    const double q = z * sigma_tsec_ps / tolerance_ps;
    return q * q;
}

SyncResult run_two_stage(const EventStream& stream_a, const EventStream& stream_b,
                         const PpsTrain& pps_a, const PpsTrain& pps_b, const SyncConfig& cfg) {
    if (cfg.data_block_ps <= 0) throw std::invalid_argument("data block length must be positive");
    if (cfg.tau_w_fixed_ps == 0 && cfg.tau_w_scale <= 0.0) {
        throw std::invalid_argument("sift window policy needs a positive scale or fixed width");
    }
    if (cfg.sub_blocks < 0) throw std::invalid_argument("slice count cannot be negative");

    const AlignedStream al_a = pps_align(stream_a, pps_a, cfg.align_window_s);
    const AlignedStream al_b = pps_align(stream_b, pps_b, cfg.align_window_s);

    const size_t wn = static_cast<size_t>(cfg.align_window_s);
    const size_t windows_a = (pps_a.edges_ps.size() - 1) / wn;
    const size_t windows_b = (pps_b.edges_ps.size() - 1) / wn;
    const int64_t capacity_ps = static_cast<int64_t>(std::min(windows_a, windows_b)) *
                                cfg.align_window_s * kPsPerSecond;
    const int64_t n_blocks = capacity_ps / cfg.data_block_ps;
    if (n_blocks < 1) throw std::invalid_argument("run is shorter than one data block");

    SyncResult r;
    r.dropped_leading = al_a.dropped_leading + al_b.dropped_leading;
    r.dropped_trailing = al_a.dropped_trailing + al_b.dropped_trailing;

    const double span_s = static_cast<double>(cfg.align_window_s);
    r.budget.sigma2_sync_a =
        ppsta_variance_single(cfg.sigma_event_ps, cfg.sigma_pps_a_ps, span_s, 0.5);
    r.budget.sigma2_sync_b =
        ppsta_variance_single(cfg.sigma_event_ps, cfg.sigma_pps_b_ps, span_s, 0.5);
    r.budget.eps_prop2 = cfg.eps_prop_ps * cfg.eps_prop_ps;
    r.budget.sigma2_ppsta = r.budget.sigma2_sync_a + r.budget.sigma2_sync_b + r.budget.eps_prop2;

    int slices = cfg.sub_blocks;
    if (slices == 0) {
        const double t_ms = static_cast<double>(cfg.data_block_ps) / kPsPerMs;
        const double budget_eta = cfg.sigma_tsec_target_ps / std::sqrt(3.0);
        slices = std::max(1, static_cast<int>(
                                 std::ceil(min_subblocks(t_ms, cfg.gamma_ps_per_ms2, budget_eta))));
    }

    size_t min_pairs = cfg.min_pairs_per_slice;
    if (min_pairs == 0) {
        const double need = min_pairs_cramer_rao(std::sqrt(r.budget.sigma2_ppsta),
                                                 3.0 * cfg.sigma_tsec_target_ps);
        min_pairs = std::max<size_t>(2, static_cast<size_t>(std::ceil(need)));
    }

    GaussianFit gfit;
    try {
        gfit = fit_peak(dual_pointer_correlate(al_a.events.t_ps, al_b.events.t_ps,
                                               cfg.coarse_hist.n_bins, cfg.coarse_hist.bin_width_ps,
                                               cfg.coarse_hist.offset_bins));
    } catch (const peak_not_found& e) {
        throw peak_not_found(std::string("coarse offset stage: ") + e.what());
    }
    r.global_mu_ps = gfit.mean_ps;
    r.global_fwhm_ps = gfit.fwhm_ps;
    r.tau_w_ps = cfg.tau_w_fixed_ps > 0
                     ? cfg.tau_w_fixed_ps
                     : std::max<int64_t>(2, std::llround(cfg.tau_w_scale * gfit.fwhm_ps));

    r.sub_blocks_used = cfg.tsec_enabled ? slices : 0;
    r.coincidences.window_ps = r.tau_w_ps;
    r.coincidences.reference_offset_ps = std::llround(r.global_mu_ps);

    const int64_t block_ps = cfg.data_block_ps;
    size_t total_pairs = 0;

    // Blocks depend only on the global coarse fit, never on their
    // predecessors, so any processing order gives identical results.
    const int64_t hint_bins =
        std::llround(r.global_mu_ps / static_cast<double>(cfg.coarse_hist.bin_width_ps));

    for (int64_t b = 0; b < n_blocks; ++b) {
        const int64_t t0 = b * block_ps;
        const int64_t t1 = t0 + block_ps;
        BlockRecord rec;
        rec.block_index = b;
        rec.t_start_ps = t0;
        rec.mu_ps = r.global_mu_ps;

        const auto [a0, a1] = slice_range(al_a.events.t_ps, t0, t1);
        const auto [b0, b1] = slice_range(al_b.events.t_ps, t0, t1);
        if (a0 == a1 || b0 == b1) {
            ++r.blocks_failed;
            r.blocks.push_back(rec);
            continue;
        }
        const std::vector<int64_t> sa(al_a.events.t_ps.begin() + static_cast<ptrdiff_t>(a0),
                                      al_a.events.t_ps.begin() + static_cast<ptrdiff_t>(a1));
        const std::vector<int64_t> sb(al_b.events.t_ps.begin() + static_cast<ptrdiff_t>(b0),
                                      al_b.events.t_ps.begin() + static_cast<ptrdiff_t>(b1));

        double mu_b = r.global_mu_ps;
        if (cfg.tsec_enabled) {
            // Re-fit each block around the run-wide estimate so the peak
            // stays centred under slow delay ramps.
            try {
                const auto bh = dual_pointer_correlate(sa, sb, cfg.coarse_hist.n_bins,
                                                       cfg.coarse_hist.bin_width_ps, hint_bins);
                mu_b = fit_peak(bh).mean_ps;
            } catch (const peak_not_found&) {
                mu_b = r.global_mu_ps;
            }
        }
        rec.mu_ps = mu_b;

        CoincidenceSet cs = sift_coincidences(sa, sb, std::llround(mu_b), r.tau_w_ps);
        if (cs.pairs.empty()) {
            ++r.blocks_failed;
            r.blocks.push_back(rec);
            continue;
        }
        rec.n_pairs = cs.pairs.size();
        total_pairs += cs.pairs.size();

        std::vector<int64_t> deltas;
        deltas.reserve(cs.pairs.size());
        for (const auto& pr : cs.pairs) deltas.push_back(pr.delta_ps);
        const Moments dm = moments_of(deltas);
        rec.sigma_mu_ps = dm.n >= 2 ? std::sqrt(dm.var / static_cast<double>(dm.n)) : 0.0;

        std::vector<int64_t> corrected;
        corrected.reserve(cs.pairs.size());
        if (cfg.tsec_enabled) {
            SubBlockPartition part = partition_and_estimate(cs, slices, block_ps, t0, cfg.anchor,
                                                            r.budget.sigma2_ppsta);
            merge_starved_blocks(part, min_pairs);
            r.slice_merges += part.merges;
            for (const auto& pr : cs.pairs) {
                const double corr = tsec_correct(pr.t_b_ps, part);
                corrected.push_back(pr.delta_ps - std::llround(corr));
            }
        } else {
            const int64_t corr = std::llround(r.global_mu_ps);
            for (const auto& pr : cs.pairs) corrected.push_back(pr.delta_ps - corr);
        }

        const auto fh = histogram_of(corrected, cfg.fine_hist.n_bins, cfg.fine_hist.bin_width_ps,
                                     cfg.fine_hist.offset_bins);
        try {
            const GaussianFit ff = fit_peak(fh);
            rec.residual_ps = ff.mean_ps;
            rec.fit_ok = true;
        } catch (const peak_not_found&) {
            rec.residual_ps = moments_of(corrected).mean;
            rec.fit_ok = false;
        }

        for (auto& pr : cs.pairs) {
            pr.index_a += a0;
            pr.index_b += b0;
        }
        r.coincidences.pairs.insert(r.coincidences.pairs.end(), cs.pairs.begin(), cs.pairs.end());

        r.blocks.push_back(rec);
    }

    double ss = 0.0, s1 = 0.0;
    size_t nr = 0;
    for (const auto& blk : r.blocks) {
        if (blk.n_pairs == 0) continue;
        ss += blk.residual_ps * blk.residual_ps;
        s1 += blk.residual_ps;
        ++nr;
    }
    if (nr > 0) {
        r.residual_rms_ps = std::sqrt(ss / static_cast<double>(nr));
        const double mean = s1 / static_cast<double>(nr);
        r.residual_std_ps = std::sqrt(std::max(0.0, ss / static_cast<double>(nr) - mean * mean));
    }

    if (cfg.tsec_enabled && total_pairs > 0) {
        const double mean_per_slice =
            std::max(1.0, static_cast<double>(total_pairs) /
                              (static_cast<double>(n_blocks) * static_cast<double>(slices)));
        const double node_var = r.budget.sigma2_ppsta / mean_per_slice;
        const double sigma_tb = std::sqrt(r.budget.sigma2_sync_b + r.budget.eps_prop2);
        const double dtau_ps = static_cast<double>(block_ps) / static_cast<double>(slices);
        const TsecVariance tv = tsec_variance(0.5, node_var, node_var, sigma_tb, dtau_ps);
        r.budget.sigma2_ts = tv.sigma2_ts;
        r.budget.sigma2_mu = tv.sigma2_mu;
        r.budget.sigma2_tsec = tv.sigma2_tsec;
        r.noise_floor_warning =
            3.0 * std::sqrt(node_var) >= cfg.sigma_tsec_target_ps / std::sqrt(3.0);
    }
    return r;
}

}  // namespace qsync
