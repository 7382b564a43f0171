#pragma once

#include <memory>
#include <string>
#include <vector>

#include "t2m/rvq/codec.hpp"
#include "t2m/rvq/quantizer.hpp"
#include "t2m/syndata/types.hpp"

namespace t2m::rvq {

// Frozen stage-1 artifact: codec weights, layered codebooks, and the
// per-channel normalization computed on the training split.
struct RvqModel {
    RvqConfig cfg;
    int feature_dim = 16;
    double frame_rate = 20.0;
    Eigen::VectorXd channel_mean, channel_std;
    std::shared_ptr<MotionCodec> codec;
    LayeredCodebook codebooks;

    int latent_length(int frames) const { return frames / cfg.downsample; }
    int crop_length(int frames) const { return latent_length(frames) * cfg.downsample; }

    // Normalized, cropped latent sequence (T/l x d_c).
    Mat encode_latents(const syndata::MotionSequence& motion) const;
    CodeMatrix tokenize(const syndata::MotionSequence& motion) const;
    syndata::MotionSequence decode_latents(const Mat& latents) const;
    syndata::MotionSequence detokenize(const CodeMatrix& codes) const;
};

struct CurvePoint {
    int epoch = 0;
    double loss = 0.0;
};

RvqModel train_rvq(const syndata::Dataset& ds, const RvqConfig& cfg,
                   std::vector<CurvePoint>* curve = nullptr);

void save_rvq(const RvqModel& model, const std::string& dir, const std::vector<CurvePoint>& curve);
RvqModel load_rvq(const std::string& dir);

}  // namespace t2m::rvq
