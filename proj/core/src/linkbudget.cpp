#include "qsync/linkbudget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qsync {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double diffraction_waist_m(double distance_m, const OpticalLink& link) {
    if (distance_m <= 0.0 || link.wavelength_m <= 0.0 || link.d_t_m <= 0.0) {
        throw std::invalid_argument("geometry must be positive");
    }
    if (link.r0_m <= 0.0) throw std::invalid_argument("Fried parameter must be positive");
    const double w_diff = distance_m * link.wavelength_m / (kPi * 0.316 * link.d_t_m);
    const double sec_z = 1.0 / std::cos(link.zenith_rad);
    const double turb = 1.0 + 0.83 * sec_z * std::pow(link.d_t_m / link.r0_m, 5.0 / 3.0);
    return w_diff * std::pow(turb, 3.0 / 5.0);
}

double effective_waist_m(double distance_m, const OpticalLink& link) {
    const double w_l = diffraction_waist_m(distance_m, link);
    return std::hypot(w_l, link.sigma_point_rad * distance_m);
}

double strehl(const OpticalLink& link) {
    const double x = 2.0 * kPi * link.opd_rms_m / link.wavelength_m;
    return std::exp(-x * x);
}

double link_efficiency(double distance_m, const OpticalLink& link) {
    const double w0 = effective_waist_m(distance_m, link);
    const double sec_z = 1.0 / std::cos(link.zenith_rad);
    const double collected = 1.0 - std::exp(-0.5 * (link.d_r_m / w0) * (link.d_r_m / w0));
    return strehl(link) * std::exp(-link.tau_ext * sec_z) * collected;
}

double link_loss_db(double distance_m, const OpticalLink& link) {
    return -10.0 * std::log10(link_efficiency(distance_m, link));
}

double loss_to_distance_m(double target_db, const OpticalLink& link, double lo_m, double hi_m) {
    if (!(lo_m > 0.0) || !(hi_m > lo_m)) throw std::invalid_argument("bad distance bracket");
    double f_lo = link_loss_db(lo_m, link);
    double f_hi = link_loss_db(hi_m, link);
    if (target_db < f_lo || target_db > f_hi) {
        throw std::invalid_argument("loss target outside the distance bracket");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo_m + hi_m);
        if (link_loss_db(mid, link) < target_db) {
            lo_m = mid;
        } else {
            hi_m = mid;
        }
    }
    return 0.5 * (lo_m + hi_m);
}

double total_timing_uncertainty_ps(const SourceDetectorModel& src, double sigma_sync_ps,
                                   bool both_arms) {
    const double arms = both_arms ? 2.0 : 1.0;
    return std::sqrt(src.coherence_sigma_ps * src.coherence_sigma_ps +
                     arms * src.det_sigma_ps * src.det_sigma_ps +
                     arms * src.ttm_sigma_ps * src.ttm_sigma_ps + sigma_sync_ps * sigma_sync_ps);
}

double window_capture_fraction(double tau_w_ps, double delta_t_ps) {
    if (tau_w_ps <= 0.0) return 0.0;
    if (delta_t_ps <= 0.0) return 1.0;
    return std::erf(tau_w_ps / (2.0 * std::sqrt(2.0) * delta_t_ps));
}

double accidental_rate_cps(double brightness_cps, double eta_a, double eta_b, double dc_a_cps,
                           double dc_b_cps, double tau_w_ps) {
    if (tau_w_ps < 0.0) throw std::invalid_argument("window must be non-negative");
    const double singles_a = brightness_cps * eta_a + 2.0 * dc_a_cps;
    const double singles_b = brightness_cps * eta_b + 2.0 * dc_b_cps;
    return singles_a * singles_b * tau_w_ps * 1e-12;
}

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double effective_intrinsic_error(double e0, double pol_efficiency) {
    if (pol_efficiency < 0.0 || pol_efficiency > 1.0) {
        throw std::invalid_argument("polarisation efficiency must lie in [0, 1]");
    }
    return pol_efficiency * e0 + (1.0 - pol_efficiency) * 0.5;
}

double qber(double brightness_cps, double eta_a, double eta_b, double e0, double gamma_cps,
            double window_capture) {
    const double q_true = window_capture * brightness_cps * eta_a * eta_b;
    const double denom = q_true + gamma_cps;
    if (denom <= 0.0) {
        throw std::invalid_argument("error rate undefined: no coincidences at this point");
    }
    return (q_true * e0 + 0.5 * gamma_cps) / denom;
}

double secret_key_rate_cps(double q_cps, double qber_value, double error_corr_f) {
    if (error_corr_f < 1.0) {
        throw std::invalid_argument("error-correction inefficiency below the Shannon limit");
    }
    const double fraction = 1.0 - (1.0 + error_corr_f) * binary_entropy(qber_value);
    return std::max(0.0, q_cps * fraction);
}

OperatingPoint evaluate_point(const RateModel& rate, const SourceDetectorModel& src,
                              const SyncNoiseModel& sync, double loss_db,
                              const OpticalLink* link) {
    if (sync.sub_blocks < 1) throw std::invalid_argument("need at least one slice");
    if (sync.block_ms <= 0.0) throw std::invalid_argument("block length must be positive");

    OperatingPoint p;
    p.loss_db = loss_db;
    p.distance_m = std::numeric_limits<double>::quiet_NaN();
    if (link) {
        try {
            p.distance_m = loss_to_distance_m(loss_db, *link);
        } catch (const std::invalid_argument&) {
            // outside the achievable range of this geometry; left as NaN
        }
    }

    const double eta_b = rate.eta_b * std::pow(10.0, -loss_db / 10.0);
    const double pair_rate = rate.brightness_cps * rate.eta_a * eta_b;

    // Residual of the corrected offsets at the slice midpoint: ratio floor,
    // node noise out of the per-slice pair budget, linearisation bias.
    const int s = sync.sub_blocks;
    const double dtau_ms = sync.block_ms / s;
    const double dtau_ps = dtau_ms * 1e9;
    const double pairs_per_slice = std::max(1e-9, pair_rate * (sync.block_ms * 1e-3) / s);
    const double node_var = sync.sigma2_ppsta_ps2 / pairs_per_slice;
    const double ratio = sync.sigma_tb_ps / dtau_ps;
    const double delta_lin = std::fabs(sync.gamma_ps_per_ms2) * dtau_ms * dtau_ms / 8.0;
    p.sigma_tsec_ps = std::sqrt(ratio * ratio + 0.5 * node_var + delta_lin * delta_lin);

    p.delta_t_ps = total_timing_uncertainty_ps(src, p.sigma_tsec_ps, true);
    p.eta_tau = window_capture_fraction(rate.tau_w_ps, p.delta_t_ps);
    p.gamma_cps = accidental_rate_cps(rate.brightness_cps, rate.eta_a, eta_b, rate.dc_a_cps,
                                      rate.dc_b_cps, rate.tau_w_ps);
    p.q_cps = p.eta_tau * pair_rate + p.gamma_cps;

    const double e0_eff = effective_intrinsic_error(rate.e0, rate.pol_efficiency);
    p.qber = qber(rate.brightness_cps, rate.eta_a, eta_b, e0_eff, p.gamma_cps, p.eta_tau);
    p.skr_bps = rate.sift_fraction * secret_key_rate_cps(p.q_cps, p.qber, rate.error_corr_f);
    return p;
}

std::vector<OperatingPoint> skr_vs_loss_curve(const RateModel& rate,
                                              const SourceDetectorModel& src,
                                              const SyncNoiseModel& sync,
                                              const std::vector<double>& losses_db,
                                              const OpticalLink* link) {
    std::vector<OperatingPoint> out;
    out.reserve(losses_db.size());
    for (double loss : losses_db) out.push_back(evaluate_point(rate, src, sync, loss, link));
    return out;
}

std::vector<SubblockCurvePoint> skr_vs_subblocks(const RateModel& rate,
                                                 const SourceDetectorModel& src,
                                                 const SyncNoiseModel& sync, double loss_db,
                                                 int s_min, int s_max, const OpticalLink* link) {
    if (s_min < 1 || s_max < s_min) throw std::invalid_argument("bad slice range");
    std::vector<SubblockCurvePoint> out;
    out.reserve(static_cast<size_t>(s_max - s_min + 1));
    SyncNoiseModel local = sync;
    for (int s = s_min; s <= s_max; ++s) {
        local.sub_blocks = s;
        out.push_back({s, evaluate_point(rate, src, local, loss_db, link)});
    }
    return out;
}

}  // namespace qsync
