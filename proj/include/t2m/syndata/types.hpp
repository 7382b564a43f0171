#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace t2m::syndata {

enum class Gait { walk, jump, wave, wipe };
enum class Direction { left, right, forward };
enum class Speed { slow, normal, fast };
enum class Posture { standing, leaning, bending };

inline constexpr int kGaitCount = 4;
inline constexpr int kDirectionCount = 3;
inline constexpr int kSpeedCount = 3;
inline constexpr int kPostureCount = 3;

const char* to_string(Gait g);
const char* to_string(Direction d);
const char* to_string(Speed s);
const char* to_string(Posture p);

struct MotionAttributes {
    Gait gait = Gait::walk;
    Direction direction = Direction::forward;
    Speed speed = Speed::normal;
    Posture posture = Posture::standing;
    double free_phase = 0.0;      // [0, 2*pi)
    double free_amplitude = 1.0;  // [0.5, 1.5]
};

struct DescribedMask {
    bool gait = false;
    bool direction = false;
    bool speed = false;
    bool posture = false;

    int count() const { return int(gait) + int(direction) + int(speed) + int(posture); }
    int bits() const {
        return (gait ? 1 : 0) | (direction ? 2 : 0) | (speed ? 4 : 0) | (posture ? 8 : 0);
    }
    static DescribedMask from_bits(int b) {
        return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0, (b & 8) != 0};
    }
    static DescribedMask all() { return {true, true, true, true}; }
    static DescribedMask none() { return {}; }
};

struct CaptionTokens {
    std::vector<int> tokens;
    DescribedMask described;

    bool operator==(const CaptionTokens& o) const {
        return tokens == o.tokens && described.bits() == o.described.bits();
    }
};

// Frames are stored as doubles in memory but every value produced by the
// renderer is exactly float32-representable, so the on-disk float32 format
// round-trips bit-exactly.
struct MotionSequence {
    Eigen::MatrixXd frames;  // T x d
    double frame_rate = 20.0;

    int length() const { return static_cast<int>(frames.rows()); }
    int dim() const { return static_cast<int>(frames.cols()); }
};

struct CorpusSpec {
    int n_samples = 2000;
    int feature_dim = 16;  // >= 16; channels beyond 16 join the free group
    int t_min = 32;
    int t_max = 64;
    double described_prob = 0.5;
    double holdout_fraction = 0.1;
    double frame_rate = 20.0;
    std::uint64_t seed = 0;
};

struct Sample {
    MotionAttributes attrs;
    CaptionTokens caption;
    MotionSequence motion;
};

struct Dataset {
    CorpusSpec spec;
    std::vector<Sample> samples;
    std::vector<int> train_indices;
    std::vector<int> heldout_indices;
};

}  // namespace t2m::syndata
