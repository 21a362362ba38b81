#include "qsync/stats.hpp"

#include <algorithm>
#include <cmath>

namespace qsync {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double rms(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += x * x;
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    const size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<ptrdiff_t>(mid), xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    std::nth_element(xs.begin(), xs.begin() + static_cast<ptrdiff_t>(mid) - 1,
                     xs.begin() + static_cast<ptrdiff_t>(mid));
    return 0.5 * (xs[mid - 1] + hi);
}

double mad_sigma(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double med = median(xs);
    std::vector<double> dev;
    dev.reserve(xs.size());
    for (double x : xs) dev.push_back(std::fabs(x - med));
    return 1.4826 * median(std::move(dev));
}

MadFilterReport mad_filter(const std::vector<double>& xs, double k) {
    MadFilterReport rep;
    rep.median = median(xs);
    rep.mad_sigma = mad_sigma(xs);
    if (xs.size() < 2 || rep.mad_sigma <= 0.0) {
        rep.kept = xs;
        rep.degenerate = xs.size() >= 2;
        return rep;
    }
    rep.kept.reserve(xs.size());
    for (double x : xs) {
        if (std::fabs(x - rep.median) <= k * rep.mad_sigma) rep.kept.push_back(x);
    }
    rep.removed = xs.size() - rep.kept.size();
    return rep;
}

}  // namespace qsync
