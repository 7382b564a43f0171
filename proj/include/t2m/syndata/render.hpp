#pragma once

#include <cstdint>

#include "t2m/syndata/types.hpp"

namespace t2m::syndata {

// Channel map (d >= 16). Each described attribute owns a channel group and
// nothing outside it reads that attribute, so attribute edits are localized:
//   0..3   gait: oscillation pair at the speed-scaled base frequency plus a
//          second harmonic and a per-gait constant marker on channel 3
//   4..6   direction: half/three-quarter frequency pair and a constant marker
//          on channel 6; left and right are exact sign flips, forward is zero
//   7..9   speed: oscillation at the speed-scaled frequency and a constant
//          marker on channel 9
//   10..12 posture: constant pose offset, one basis channel per posture
//   13..15 free: free_amplitude * sin/cos at a fixed frequency with
//          free_phase, plus a seeded sinusoid mixture on channel 15
//   16..   extra free channels, each its own seeded sinusoid mixture
// Constant markers are spaced >= 0.5 apart, so any single described-attribute
// edit moves its group by at least 0.5 per frame in L2.
MotionSequence render_motion(const MotionAttributes& attrs, int length, const CorpusSpec& spec,
                             std::uint64_t seed);

// Uniform time rescaling by a factor drawn from scale_range; output length
// round(T*s) clamped to the corpus range, frames linearly interpolated.
MotionSequence length_augment(const MotionSequence& motion, double s_lo, double s_hi,
                              const CorpusSpec& spec, std::uint64_t seed);

// Deterministic resample to an explicit output length (the augment core).
MotionSequence resample_motion(const MotionSequence& motion, int out_length);

// Channel-group helpers used by tests and corpus statistics.
struct ChannelGroups {
    int gait_begin, gait_end;
    int direction_begin, direction_end;
    int speed_begin, speed_end;
    int posture_begin, posture_end;
    int free_begin, free_end;
};
ChannelGroups channel_groups(int feature_dim);

}  // namespace t2m::syndata
