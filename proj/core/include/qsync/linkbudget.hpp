#pragma once

#include <vector>

#include "qsync/events.hpp"

namespace qsync {

// Free-space optical channel between two telescopes. Angles in radians,
// apertures and wavelengths in metres, extinction as zenith optical depth.
struct OpticalLink {
    double wavelength_m = 1550e-9;
    double d_t_m = 0.0246;        // transmit aperture diameter
    double d_r_m = 0.0246;        // receive aperture diameter
    double r0_m = 0.20;           // Fried parameter
    double opd_rms_m = 0.0;       // residual wavefront error
    double sigma_point_rad = 0.0; // pointing jitter
    double tau_ext = 0.02;        // atmospheric optical depth at zenith
    double zenith_rad = 0.0;
};

// Source and detection rates feeding the key-rate model. Efficiencies are
// end-to-end per arm (optics times detector); channel loss is applied on
// top of eta_b by the curve helpers.
struct RateModel {
    double brightness_cps = 1e6;   // generated pair rate
    double eta_a = 1.0;
    double eta_b = 1.0;
    double dc_a_cps = 0.0;
    double dc_b_cps = 0.0;
    double e0 = 0.0;               // intrinsic polarisation error
    double pol_efficiency = 1.0;   // fraction of pairs with preserved correlation
    double error_corr_f = 1.09;    // error-correction inefficiency, at least 1
    double sift_fraction = 1.0;    // basis-sifting factor applied to the key rate
    double tau_w_ps = 500.0;       // coincidence window width
};

// Beam radius after distance l: diffraction spread of a waist 0.316 d_t
// beam, broadened by turbulence when the aperture exceeds the coherence
// length r0.
double diffraction_waist_m(double distance_m, const OpticalLink& link);

// Turbulent long-term radius further broadened by pointing jitter.
double effective_waist_m(double distance_m, const OpticalLink& link);

// Wavefront-error transmission factor exp(-(2 pi OPD / lambda)^2).
double strehl(const OpticalLink& link);

// End-to-end geometric collection efficiency including extinction and
// wavefront error. Dimensionless in (0, 1].
double link_efficiency(double distance_m, const OpticalLink& link);

double link_loss_db(double distance_m, const OpticalLink& link);

// Distance at which the channel reaches target_db of loss. Bisection over
// [lo_m, hi_m]; throws when the target is outside the bracket.
double loss_to_distance_m(double target_db, const OpticalLink& link, double lo_m = 1.0,
                          double hi_m = 1.0e6);

// Quadrature sum of source coherence, detector and tagger jitter plus the
// synchronisation residual. With both_arms the detector and tagger terms
// enter twice (one pair of devices per arm).
double total_timing_uncertainty_ps(const SourceDetectorModel& src, double sigma_sync_ps,
                                   bool both_arms = true);

// Fraction of a Gaussian coincidence peak of width delta_t captured by a
// centred window of total width tau_w.
double window_capture_fraction(double tau_w_ps, double delta_t_ps);

// Accidental coincidence rate: product of the two singles rates (dark
// counts enter doubled, one per analyser output) times the window length.
double accidental_rate_cps(double brightness_cps, double eta_a, double eta_b, double dc_a_cps,
                           double dc_b_cps, double tau_w_ps);

double binary_entropy(double p);

// Intrinsic error after imperfect polarisation compensation: the preserved
// fraction keeps e0, the rest is fully mixed.
double effective_intrinsic_error(double e0, double pol_efficiency);

// Error rate of the sifted coincidences: true pairs carry e0, accidentals
// are random. Throws when both rates vanish (error rate undefined).
double qber(double brightness_cps, double eta_a, double eta_b, double e0, double gamma_cps,
            double window_capture);

// Asymptotic secret fraction times the sifted rate, clamped at zero.
// error_corr_f below 1 would beat the Shannon limit and is rejected.
double secret_key_rate_cps(double q_cps, double qber_value, double error_corr_f);

// Synchronisation noise model feeding the curve helpers: the corrected
// residual is the slicing ratio floor plus the interpolated node noise plus
// the linearisation bias, with the node noise paid out of the per-slice
// pair budget (which shrinks with channel loss).
struct SyncNoiseModel {
    double sigma2_ppsta_ps2 = 0.0;  // stage-one variance of one aligned pair
    double sigma_tb_ps = 0.0;       // remote timestamp deviation for the ratio term
    double block_ms = 1000.0;       // data block length
    double gamma_ps_per_ms2 = 0.0;  // delay curvature within a block
    int sub_blocks = 20;
};

struct OperatingPoint {
    double loss_db = 0.0;
    double distance_m = 0.0;  // NaN when no optical geometry is supplied
    double sigma_tsec_ps = 0.0;
    double delta_t_ps = 0.0;
    double eta_tau = 0.0;
    double q_cps = 0.0;       // sifted coincidence rate including accidentals
    double gamma_cps = 0.0;
    double qber = 0.0;
    double skr_bps = 0.0;
};

// Full composition at one channel loss: residual noise from the slice
// budget, timing spread, window capture, accidentals, error rate, key rate.
OperatingPoint evaluate_point(const RateModel& rate, const SourceDetectorModel& src,
                              const SyncNoiseModel& sync, double loss_db,
                              const OpticalLink* link = nullptr);

// Key rate as extra channel loss is applied to the remote arm.
std::vector<OperatingPoint> skr_vs_loss_curve(const RateModel& rate,
                                              const SourceDetectorModel& src,
                                              const SyncNoiseModel& sync,
                                              const std::vector<double>& losses_db,
                                              const OpticalLink* link = nullptr);

struct SubblockCurvePoint {
    int sub_blocks = 0;
    OperatingPoint point;
};

// Key rate as a function of the slice count at fixed loss: finer slicing
// shrinks the linearisation bias but starves each slice of pairs, so the
// residual grows again and an interior optimum can appear.
std::vector<SubblockCurvePoint> skr_vs_subblocks(const RateModel& rate,
                                                 const SourceDetectorModel& src,
                                                 const SyncNoiseModel& sync, double loss_db,
                                                 int s_min, int s_max,
                                                 const OpticalLink* link = nullptr);

}  // namespace qsync
