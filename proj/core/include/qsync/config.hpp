#pragma once

#include <cstdint>
#include <string>

#include "qsync/events.hpp"
#include "qsync/linkbudget.hpp"
#include "qsync/syncproto.hpp"

namespace qsync {

// Complete description of one simulated run. Loaded from JSON; every field
// has a working default so partial configs stay valid, but keys that the
// schema does not know are rejected with their location.
struct RunConfig {
    double duration_s = 10.0;
    uint64_t seed = 1;
    double error_corr_f = 1.09;
    double sift_fraction = 1.0;
    SourceDetectorModel source;
    double pol_efficiency = 1.0;
    ClockModel clock_a;
    ClockModel clock_b;
    ChannelState channel;
    SyncConfig sync;
    OpticalLink link;
};

// Canonical form: sorted keys, every field present, shortest round-trip
// number formatting. Hashing this text identifies the run setup.
std::string to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

std::string config_hash(const RunConfig& cfg);

void validate(const RunConfig& cfg);

}  // namespace qsync
