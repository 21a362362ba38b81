#include "qsync/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

namespace qsync {

namespace {

inline int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
    return q;
}

void check_correlate_args(const std::vector<int64_t>& t_a, const std::vector<int64_t>& t_b,
                          int64_t n_bins, int64_t bin_width_ps) {
    if (n_bins <= 0) throw std::invalid_argument("correlate: n_bins <= 0");
    if (bin_width_ps <= 0) throw std::invalid_argument("correlate: bin_width_ps <= 0");
    if (!std::is_sorted(t_a.begin(), t_a.end()) || !std::is_sorted(t_b.begin(), t_b.end()))
        throw std::invalid_argument("correlate: inputs must be sorted");
}

}  // namespace

CorrelationHistogram dual_pointer_correlate(const std::vector<int64_t>& t_a,
                                            const std::vector<int64_t>& t_b, int64_t n_bins,
                                            int64_t bin_width_ps, int64_t offset_bins) {
    check_correlate_args(t_a, t_b, n_bins, bin_width_ps);

    CorrelationHistogram h;
    h.counts.assign(static_cast<size_t>(n_bins), 0);
    h.bin_width_ps = bin_width_ps;
    h.offset_bins = offset_bins;

    const int64_t lo = h.lower();
    const int64_t hi = h.upper();
    size_t i = 0, j = 0;
    uint64_t steps = 0;
    while (i < t_a.size() && j < t_b.size()) {
        ++steps;
        int64_t k = floor_div(t_a[i], bin_width_ps) - floor_div(t_b[j], bin_width_ps) -
                    offset_bins;
        if (k < lo) {
            ++i;  // A lags the window, advance it
        } else if (k >= hi) {
            ++j;  // B lags
        } else {
            ++h.counts[static_cast<size_t>(k - lo)];
            ++i;
            ++j;
        }
    }
    h.iterations = steps;
    return h;
}

CorrelationHistogram all_pairs_correlate(const std::vector<int64_t>& t_a,
                                         const std::vector<int64_t>& t_b, int64_t n_bins,
                                         int64_t bin_width_ps, int64_t offset_bins) {
    check_correlate_args(t_a, t_b, n_bins, bin_width_ps);

    CorrelationHistogram h;
    h.counts.assign(static_cast<size_t>(n_bins), 0);
    h.bin_width_ps = bin_width_ps;
    h.offset_bins = offset_bins;

    const int64_t lo = h.lower();
    const int64_t hi = h.upper();
    // For fixed i, k(i, j) is non-increasing in j. Track the first j that has
    // not yet fallen below the window; both bounds only move forward.
    size_t j_start = 0;
    uint64_t steps = 0;
    for (size_t i = 0; i < t_a.size(); ++i) {
        int64_t ka = floor_div(t_a[i], bin_width_ps);
        while (j_start < t_b.size() &&
               ka - floor_div(t_b[j_start], bin_width_ps) - offset_bins >= hi) {
            ++j_start;
            ++steps;
        }
        for (size_t j = j_start; j < t_b.size(); ++j) {
            int64_t k = ka - floor_div(t_b[j], bin_width_ps) - offset_bins;
            if (k < lo) break;
            ++h.counts[static_cast<size_t>(k - lo)];
            ++steps;
        }
    }
    h.iterations = steps;
    return h;
}

CorrelationHistogram all_pairs_correlate_partitioned(const std::vector<int64_t>& t_a,
                                                     const std::vector<int64_t>& t_b,
                                                     int64_t n_bins, int64_t bin_width_ps,
                                                     int64_t offset_bins, int n_parts) {
    check_correlate_args(t_a, t_b, n_bins, bin_width_ps);
    if (n_parts < 1) throw std::invalid_argument("correlate: n_parts < 1");

    CorrelationHistogram acc;
    acc.counts.assign(static_cast<size_t>(n_bins), 0);
    acc.bin_width_ps = bin_width_ps;
    acc.offset_bins = offset_bins;
    if (t_a.empty() || t_b.empty()) return acc;

    // Partition arm A by index; for each A chunk take the B range that can
    // reach it through the bin window (one-window overlap on both sides).
    // Every (i, j) pair is owned by exactly one chunk, so summing chunk
    // histograms reproduces the serial count exactly.
    const int64_t span = (n_bins + std::abs(offset_bins) + 2) * bin_width_ps;
    const size_t chunk = (t_a.size() + static_cast<size_t>(n_parts) - 1) /
                         static_cast<size_t>(n_parts);

    std::vector<std::future<CorrelationHistogram>> futs;
    for (size_t begin = 0; begin < t_a.size(); begin += chunk) {
        size_t end = std::min(begin + chunk, t_a.size());
        futs.push_back(std::async(std::launch::async, [&, begin, end] {
            std::vector<int64_t> part(t_a.begin() + static_cast<ptrdiff_t>(begin),
                                      t_a.begin() + static_cast<ptrdiff_t>(end));
            auto b_lo = std::lower_bound(t_b.begin(), t_b.end(), part.front() - span);
            auto b_hi = std::upper_bound(t_b.begin(), t_b.end(), part.back() + span);
            std::vector<int64_t> bpart(b_lo, b_hi);
            return all_pairs_correlate(part, bpart, n_bins, bin_width_ps, offset_bins);
        }));
    }
    for (auto& f : futs) acc = merge(acc, f.get());
    return acc;
}

CorrelationHistogram merge(const CorrelationHistogram& lhs, const CorrelationHistogram& rhs) {
    if (lhs.counts.size() != rhs.counts.size() || lhs.bin_width_ps != rhs.bin_width_ps ||
        lhs.offset_bins != rhs.offset_bins)
        throw std::invalid_argument("merge: histogram geometry mismatch");
    CorrelationHistogram out = lhs;
    for (size_t b = 0; b < out.counts.size(); ++b) out.counts[b] += rhs.counts[b];
    out.iterations = lhs.iterations + rhs.iterations;
    return out;
}

GaussianFit fit_peak(const CorrelationHistogram& hist, int max_iterations,
                     double rel_tolerance) {
    const int64_t n = hist.n_bins();
    if (n < 5) throw peak_not_found("fit_peak: too few bins");

    std::vector<uint64_t> sorted_counts(hist.counts);
    std::nth_element(sorted_counts.begin(), sorted_counts.begin() + sorted_counts.size() / 2,
                     sorted_counts.end());
    const double median = static_cast<double>(sorted_counts[sorted_counts.size() / 2]);

    size_t argmax = 0;
    for (size_t b = 1; b < hist.counts.size(); ++b)
        if (hist.counts[b] > hist.counts[argmax]) argmax = b;
    const double peak = static_cast<double>(hist.counts[argmax]);

    // Significance gate against the counting floor: a real peak must clear
    // the median by several Poisson standard deviations. A ratio test would
    // wrongly reject broad but strong peaks sitting on heavy accidentals.
    if (peak <= 0 || peak < median + 6.0 * std::sqrt(median + 1.0))
        throw peak_not_found("fit_peak: no peak above baseline");

    // Second-moment width seed over the region above half height.
    const double half = median + 0.5 * (peak - median);
    size_t lo = argmax, hi = argmax;
    while (lo > 0 && static_cast<double>(hist.counts[lo - 1]) >= half) --lo;
    while (hi + 1 < hist.counts.size() && static_cast<double>(hist.counts[hi + 1]) >= half) ++hi;
    double w_sum = 0, x_sum = 0, xx_sum = 0;
    for (size_t b = lo; b <= hi; ++b) {
        double w = static_cast<double>(hist.counts[b]) - median;
        if (w <= 0) continue;
        double x = static_cast<double>(b);
        w_sum += w;
        x_sum += w * x;
        xx_sum += w * x * x;
    }
    double mu = w_sum > 0 ? x_sum / w_sum : static_cast<double>(argmax);
    double var = w_sum > 0 ? xx_sum / w_sum - mu * mu : 1.0;
    double sigma = std::max(std::sqrt(std::max(var, 0.0)), 0.5);
    double amp = peak - median;
    double base = median;

    // Fit only a window around the peak; the far baseline carries no shape
    // information and 20k-bin scans would dominate the cost.
    const int64_t half_win =
        std::max<int64_t>(25, static_cast<int64_t>(std::ceil(12.0 * sigma)));
    const int64_t w_lo = std::max<int64_t>(0, static_cast<int64_t>(argmax) - half_win);
    const int64_t w_hi = std::min<int64_t>(n - 1, static_cast<int64_t>(argmax) + half_win);

    const size_t m = static_cast<size_t>(w_hi - w_lo + 1);
    std::vector<double> xs(m), ys(m);
    for (size_t r = 0; r < m; ++r) {
        xs[r] = static_cast<double>(w_lo + static_cast<int64_t>(r));
        ys[r] = static_cast<double>(hist.counts[static_cast<size_t>(w_lo) + r]);
    }

    auto chi2 = [&](double a, double m0, double s, double c) {
        double acc = 0;
        for (size_t r = 0; r < m; ++r) {
            double z = (xs[r] - m0) / s;
            double d = ys[r] - (a * std::exp(-0.5 * z * z) + c);
            acc += d * d;
        }
        return acc;
    };

    double lambda = 1e-3;
    double cost = chi2(amp, mu, sigma, base);
    int it = 0;
    bool converged = false;
    for (; it < max_iterations; ++it) {
        // Normal equations for parameters (amp, mu, sigma, base).
        double jtj[4][4] = {};
        double jtr[4] = {};
        for (size_t r = 0; r < m; ++r) {
            double z = (xs[r] - mu) / sigma;
            double e = std::exp(-0.5 * z * z);
            double f = amp * e + base;
            double res = ys[r] - f;
            double g[4] = {e, amp * e * z / sigma, amp * e * z * z / sigma, 1.0};
            for (int p = 0; p < 4; ++p) {
                jtr[p] += g[p] * res;
                for (int q = p; q < 4; ++q) jtj[p][q] += g[p] * g[q];
            }
        }
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < p; ++q) jtj[p][q] = jtj[q][p];

        // Solve (JtJ + lambda diag) step = Jtr by Gaussian elimination.
        double a[4][5];
        for (int p = 0; p < 4; ++p) {
            for (int q = 0; q < 4; ++q) a[p][q] = jtj[p][q];
            a[p][p] *= 1.0 + lambda;
            a[p][4] = jtr[p];
        }
        bool singular = false;
        for (int col = 0; col < 4; ++col) {
            int piv = col;
            for (int r = col + 1; r < 4; ++r)
                if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
            if (std::fabs(a[piv][col]) < 1e-30) {
                singular = true;
                break;
            }
            std::swap(a[piv], a[col]);
            for (int r = col + 1; r < 4; ++r) {
                double f = a[r][col] / a[col][col];
                for (int q = col; q < 5; ++q) a[r][q] -= f * a[col][q];
            }
        }
        double step[4] = {};
        if (!singular) {
            for (int r = 3; r >= 0; --r) {
                double s = a[r][4];
                for (int q = r + 1; q < 4; ++q) s -= a[r][q] * step[q];
                step[r] = s / a[r][r];
            }
        }

        double amp2 = amp + step[0];
        double mu2 = mu + step[1];
        double sig2 = sigma + step[2];
        double base2 = base + step[3];
        if (singular || sig2 <= 1e-6 || !std::isfinite(amp2) || !std::isfinite(mu2) ||
            !std::isfinite(sig2) || !std::isfinite(base2)) {
            lambda *= 10;
            if (lambda > 1e12) break;
            continue;
        }
        double cost2 = chi2(amp2, mu2, sig2, base2);
        if (cost2 <= cost) {
            double rel = (cost - cost2) / std::max(cost, 1e-30);
            amp = amp2;
            mu = mu2;
            sigma = sig2;
            base = base2;
            cost = cost2;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (rel < rel_tolerance) {
                converged = true;
                ++it;
                break;
            }
        } else {
            lambda *= 10;
            if (lambda > 1e12) break;
        }
    }

    if (amp <= 0) throw peak_not_found("fit_peak: fit collapsed into baseline");

    constexpr double kFwhm = 2.3548200450309493;  // 2 sqrt(2 ln 2)
    GaussianFit fit;
    fit.mean_ps = (mu + static_cast<double>(hist.lower() + hist.offset_bins)) *
                  static_cast<double>(hist.bin_width_ps);
    fit.sigma_ps = std::fabs(sigma) * static_cast<double>(hist.bin_width_ps);
    fit.fwhm_ps = kFwhm * fit.sigma_ps;
    fit.amplitude = amp;
    fit.baseline = base;
    fit.iterations = it;
    fit.converged = converged;
    return fit;
}

CoincidenceSet sift_coincidences(const std::vector<int64_t>& t_a,
                                 const std::vector<int64_t>& t_b, int64_t reference_offset_ps,
                                 int64_t window_ps) {
    if (window_ps <= 0) throw std::invalid_argument("sift_coincidences: window_ps <= 0");
    if (!std::is_sorted(t_a.begin(), t_a.end()) || !std::is_sorted(t_b.begin(), t_b.end()))
        throw std::invalid_argument("sift_coincidences: inputs must be sorted");

    CoincidenceSet set;
    set.window_ps = window_ps;
    set.reference_offset_ps = reference_offset_ps;

    size_t i = 0, j = 0;
    while (i < t_a.size() && j < t_b.size()) {
        int64_t dev = t_a[i] - t_b[j] - reference_offset_ps;
        // |dev| <= window/2, kept exact for odd windows by doubling
        if (2 * dev < -window_ps) {
            ++i;
        } else if (2 * dev > window_ps) {
            ++j;
        } else {
            set.pairs.push_back({i, j, t_b[j], t_a[i] - t_b[j]});
            ++i;
            ++j;
        }
    }
    return set;
}

}  // namespace qsync
