#pragma once

#include <cstdint>
#include <vector>

namespace qsync {

double mean(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);
double rms(const std::vector<double>& xs);
double median(std::vector<double> xs);

// Median absolute deviation scaled to the normal-consistent estimate
// (1.4826 MAD). Zero when fewer than two samples.
double mad_sigma(const std::vector<double>& xs);

struct MadFilterReport {
    std::vector<double> kept;
    double median = 0.0;
    double mad_sigma = 0.0;
    size_t removed = 0;
    bool degenerate = false;  // spread was zero, nothing was removed
};

// Keeps samples within k robust deviations of the median. A degenerate
// spread (MAD zero, e.g. a constant series) removes nothing and is flagged
// instead, since every deviation threshold would collapse to exact equality.
MadFilterReport mad_filter(const std::vector<double>& xs, double k = 10.0);

}  // namespace qsync
