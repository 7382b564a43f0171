#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2m/nn/autodiff.hpp"
#include "t2m/nn/layers.hpp"
#include "t2m/syndata/types.hpp"

namespace t2m::evalsuite {

using nn::Mat;
using nn::Var;

struct ExtractorConfig {
    int hidden = 64;
    int feature_dim = 32;
    double temperature = 0.07;
    double lr = 1e-3;
    int batch_size = 64;
    int epochs = 30;
    std::uint64_t seed = 0;
};

// Contrastive text/motion feature extractor standing in for a pretrained
// evaluator network. Both towers emit unit-norm features; every metric in this
// module measures Euclidean distances on that sphere.
class EvalExtractor {
  public:
    EvalExtractor(const ExtractorConfig& cfg, int n_vocab, int motion_dim);

    ExtractorConfig cfg;
    int n_vocab;
    int motion_dim;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    Eigen::VectorXd motion_feature(const syndata::MotionSequence& motion) const;
    Eigen::VectorXd caption_feature(const syndata::CaptionTokens& caption) const;

    Var motion_features(const std::vector<const syndata::MotionSequence*>& motions) const;
    Var caption_features(const std::vector<const syndata::CaptionTokens*>& captions) const;

  private:
    nn::ParamStore params_;
    nn::Linear m1_, m2_, m_out_, t_proj_;
    nn::Embedding t_embed_;
};

struct ExtractorCurvePoint {
    int epoch = 0;
    double loss = 0.0;
};

// Symmetric InfoNCE over matched pairs from the training split.
EvalExtractor train_eval_extractor(const syndata::Dataset& ds, const ExtractorConfig& cfg,
                                   std::vector<ExtractorCurvePoint>* curve = nullptr);

void save_extractor(const EvalExtractor& extractor, const std::string& dir,
                    const std::vector<ExtractorCurvePoint>& curve);
EvalExtractor load_extractor(const std::string& dir);

}  // namespace t2m::evalsuite
