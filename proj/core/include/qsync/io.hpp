#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qsync/correlation.hpp"
#include "qsync/events.hpp"

namespace qsync {

// Binary time-tag container: magic "QTT1", a flags byte (bit 0 set when
// per-event tags follow), a little-endian count, the timestamps and then
// the packed tag bytes.
void write_timetags(const std::string& path, const EventStream& events);
EventStream read_timetags(const std::string& path);

// Binary histogram container: magic "QCH1", bin width, bin offset,
// iteration count and the little-endian bin contents.
void write_histogram(const std::string& path, const CorrelationHistogram& hist);
CorrelationHistogram read_histogram(const std::string& path);

// Shortest round-trippable decimal form, identical across runs and
// platforms; used for every floating-point value that reaches a file.
std::string format_double(double value);

struct CsvTable {
    std::vector<std::pair<std::string, std::string>> metadata;  // "# key=value" lines
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);

uint64_t fnv1a64(const std::string& text);
std::string hex64(uint64_t value);

}  // namespace qsync
