#pragma once

#include <cstdint>
#include <utility>

#include "qsync/events.hpp"

namespace qsync {

// Homogeneous Poisson pair emissions over [0, duration). Arm A carries the
// emission time, arm B the partner time offset by the intra-pair coherence
// jitter. Streams stay index aligned.
PairSet generate_truth_pairs(const SourceDetectorModel& src, double duration_s, uint64_t seed);

// Assigns measurement bases and outcomes to both photons of every pair:
// uniform basis choice per party, correlated bits with flip probability e0
// on basis match, independent uniform bits on mismatch.
std::pair<EventStream, EventStream> tag_qkd_outcomes(const PairSet& pairs, double e0,
                                                     uint64_t seed);

// Bernoulli survival, propagation delay (arm B only), detector and tagger
// jitter, tagger quantisation, dark counts, final time sort. Tags travel
// with surviving events; dark counts get uniform random basis/bit.
EventStream propagate_and_detect(const EventStream& arm_truth, Arm arm,
                                 const ChannelState& channel, const SourceDetectorModel& src,
                                 double duration_s, uint64_t seed);

// Deterministic local-clock map
//   t_local = t (1 + osc_frac_error) + offset + drift t_s + accel t_ms^2 / 2.
// Throws if the map would reorder the stream.
int64_t apply_clock(int64_t t_true_ps, const ClockModel& clock);
EventStream apply_clock(const EventStream& events, const ClockModel& clock);

// Disciplining edges at nominal one-second spacing, passed through the
// local clock map and smeared by pps_sigma.
PpsTrain generate_pps(const ClockModel& clock, double duration_s, uint64_t seed);

}  // namespace qsync
