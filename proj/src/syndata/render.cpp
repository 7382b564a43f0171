#include "t2m/syndata/render.hpp"

#include <cmath>
#include <numbers>

#include "t2m/core/errors.hpp"
#include "t2m/core/rng.hpp"

namespace t2m::syndata {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double speed_factor(Speed s) {
    switch (s) {
        case Speed::slow: return 0.6;
        case Speed::normal: return 1.0;
        case Speed::fast: return 1.6;
    }
    return 1.0;
}

double speed_marker(Speed s) {
    switch (s) {
        case Speed::slow: return -0.5;
        case Speed::normal: return 0.0;
        case Speed::fast: return 0.5;
    }
    return 0.0;
}

double direction_sign(Direction d) {
    switch (d) {
        case Direction::left: return -1.0;
        case Direction::right: return 1.0;
        case Direction::forward: return 0.0;
    }
    return 0.0;
}

// float32 snap so the on-disk format loses nothing.
double snap(double v) { return static_cast<double>(static_cast<float>(v)); }

struct SineMix {
    double amp[3], freq[3], phase[3];

    static SineMix draw(Rng& rng) {
        SineMix m;
        for (int j = 0; j < 3; ++j) {
            m.amp[j] = rng.uniform(0.1, 0.35);
            m.freq[j] = rng.uniform(0.3, 1.5);
            m.phase[j] = rng.uniform(0.0, kTwoPi);
        }
        return m;
    }

    double at(double t_sec) const {
        double v = 0.0;
        for (int j = 0; j < 3; ++j) v += amp[j] * std::sin(kTwoPi * freq[j] * t_sec + phase[j]);
        return v;
    }
};

}  // namespace

const char* to_string(Gait g) {
    switch (g) {
        case Gait::walk: return "walk";
        case Gait::jump: return "jump";
        case Gait::wave: return "wave";
        case Gait::wipe: return "wipe";
    }
    return "?";
}

const char* to_string(Direction d) {
    switch (d) {
        case Direction::left: return "left";
        case Direction::right: return "right";
        case Direction::forward: return "forward";
    }
    return "?";
}

const char* to_string(Speed s) {
    switch (s) {
        case Speed::slow: return "slow";
        case Speed::normal: return "normal";
        case Speed::fast: return "fast";
    }
    return "?";
}

const char* to_string(Posture p) {
    switch (p) {
        case Posture::standing: return "standing";
        case Posture::leaning: return "leaning";
        case Posture::bending: return "bending";
    }
    return "?";
}

ChannelGroups channel_groups(int feature_dim) {
    if (feature_dim < 16) throw ArgumentError("feature_dim must be at least 16");
    return {0, 4, 4, 7, 7, 10, 10, 13, 13, feature_dim};
}

MotionSequence render_motion(const MotionAttributes& attrs, int length, const CorpusSpec& spec,
                             std::uint64_t seed) {
    if (spec.feature_dim < 16) throw ArgumentError("feature_dim must be at least 16");
    if (length < spec.t_min || length > spec.t_max)
        throw RangeError("motion length " + std::to_string(length) + " outside [" +
                         std::to_string(spec.t_min) + ", " + std::to_string(spec.t_max) + "]");

    const int d = spec.feature_dim;
    const int g = static_cast<int>(attrs.gait);
    const double omega = kTwoPi * speed_factor(attrs.speed);
    const double dsign = direction_sign(attrs.direction);

    static constexpr double kGaitAmp[kGaitCount] = {0.8, 1.0, 0.6, 0.5};
    static constexpr double kGaitPhase[kGaitCount] = {0.0, 1.5707963267948966, 0.7853981633974483,
                                                      2.356194490192345};
    static constexpr double kGaitHarm[kGaitCount] = {0.2, 0.5, 0.4, 0.3};
    static constexpr double kGaitMarker[kGaitCount] = {-0.75, -0.25, 0.25, 0.75};

    double posture_pose[3] = {0.0, 0.0, 0.0};
    posture_pose[static_cast<int>(attrs.posture)] = 0.7;

    Rng rng(seed);
    std::vector<SineMix> mixes;
    for (int c = 15; c < d; ++c) mixes.push_back(SineMix::draw(rng));

    MotionSequence out;
    out.frame_rate = spec.frame_rate;
    out.frames.resize(length, d);
    for (int t = 0; t < length; ++t) {
        const double ts = static_cast<double>(t) / spec.frame_rate;
        const double th = omega * ts;
        auto row = out.frames.row(t);
        row(0) = kGaitAmp[g] * std::sin(th + kGaitPhase[g]);
        row(1) = kGaitAmp[g] * std::cos(th);
        row(2) = kGaitHarm[g] * std::sin(2.0 * th);
        row(3) = kGaitMarker[g];
        row(4) = dsign * 0.8 * std::sin(0.5 * th + 0.3);
        row(5) = dsign * 0.8 * std::cos(0.75 * th);
        row(6) = dsign * 0.6;
        row(7) = 0.5 * std::sin(1.5 * th);
        row(8) = 0.5 * std::cos(1.5 * th + 0.5);
        row(9) = speed_marker(attrs.speed);
        row(10) = posture_pose[0];
        row(11) = posture_pose[1];
        row(12) = posture_pose[2];
        row(13) = attrs.free_amplitude * std::sin(kTwoPi * 0.8 * ts + attrs.free_phase);
        row(14) = attrs.free_amplitude * std::cos(kTwoPi * 0.8 * ts + attrs.free_phase);
        for (int c = 15; c < d; ++c) row(c) = mixes[static_cast<std::size_t>(c - 15)].at(ts);
        for (int c = 0; c < d; ++c) row(c) = snap(row(c));
    }
    return out;
}

MotionSequence resample_motion(const MotionSequence& motion, int out_length) {
    if (motion.length() <= 0) throw ArgumentError("resample of empty motion");
    if (out_length <= 0) throw ArgumentError("resample to nonpositive length");
    const int t_in = motion.length();
    const double ratio = static_cast<double>(t_in) / static_cast<double>(out_length);
    MotionSequence out;
    out.frame_rate = motion.frame_rate;
    out.frames.resize(out_length, motion.dim());
    for (int j = 0; j < out_length; ++j) {
        double pos = std::min(static_cast<double>(j) * ratio, static_cast<double>(t_in - 1));
        int i0 = static_cast<int>(pos);
        int i1 = std::min(i0 + 1, t_in - 1);
        double w = pos - i0;
        out.frames.row(j) = (1.0 - w) * motion.frames.row(i0) + w * motion.frames.row(i1);
        for (int c = 0; c < out.dim(); ++c) out.frames(j, c) = static_cast<double>(
            static_cast<float>(out.frames(j, c)));
    }
    return out;
}

MotionSequence length_augment(const MotionSequence& motion, double s_lo, double s_hi,
                              const CorpusSpec& spec, std::uint64_t seed) {
    if (motion.length() <= 0) throw ArgumentError("length_augment of empty motion");
    if (!(s_lo > 0.0) || !(s_hi > 0.0) || s_lo > s_hi)
        throw ArgumentError("length_augment scale range must satisfy 0 < s_lo <= s_hi");
    Rng rng(seed);
    double s = rng.uniform(s_lo, s_hi);
    int out_length = static_cast<int>(std::lround(motion.length() * s));
    out_length = std::max(spec.t_min, std::min(spec.t_max, out_length));
    if (out_length == motion.length()) return motion;
    return resample_motion(motion, out_length);
}

}  // namespace t2m::syndata
