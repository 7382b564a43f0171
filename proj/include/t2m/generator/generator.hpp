#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2m/predictor/model.hpp"
#include "t2m/rvq/train.hpp"
#include "t2m/syndata/types.hpp"

namespace t2m::generator {

using nn::Mat;
using rvq::CodeMatrix;

// Sentinel for "sample the length from the caption-conditioned length head".
constexpr int kAutoLength = -1;

struct GenerationRequest {
    syndata::CaptionTokens caption;
    double w = 3.0;
    int length = kAutoLength;  // frames; explicit values must lie in the corpus range
    int decode_steps = 10;
    std::uint64_t seed = 0;
};

struct StepDiagnostic {
    int step = 0;
    int masked_before = 0;  // unresolved positions entering the step
    int masked_kept = 0;    // positions re-masked per the schedule
    double mean_fixed_confidence = 0.0;
};

struct GenerationResult {
    syndata::MotionSequence motion;
    CodeMatrix codes;  // tokens x quantizer layers
    int resolved_length = 0;
    std::vector<StepDiagnostic> steps;
};

// Log-space guidance: log-normalize[(1+w)*log p_text - w*log p_noise] per row.
// w = 0 returns text rows unchanged; equal inputs are a fixed point.
Mat guided_fuse(const Mat& text_log_probs, const Mat& noise_log_probs, double w);

// Explicit lengths are validated against the corpus range; kAutoLength draws
// from the predictor's length head.
int resolve_length(const predictor::PredictorModel& model,
                   const syndata::CaptionTokens& caption, int requested, std::uint64_t seed);

// Confidence-scheduled masked decoding of layer 0. One noise signal is drawn
// per generation and reused across steps.
std::vector<int> iterative_decode(const predictor::PredictorModel& model,
                                  const GenerationRequest& request, int tokens,
                                  std::vector<StepDiagnostic>* steps = nullptr);

// Greedy argmax completion of layers >= 1, conditioned on the text signal.
CodeMatrix complete_residual_layers(const predictor::PredictorModel& model,
                                    const syndata::CaptionTokens& caption,
                                    const std::vector<int>& layer0);

GenerationResult generate(const predictor::PredictorModel& model, const rvq::RvqModel& rvq,
                          const GenerationRequest& request);

// One row per frame with named channel columns; JSON sidecar carries caption,
// seed, w, lengths and the code sequence.
void export_result(const GenerationResult& result, const GenerationRequest& request,
                   const std::string& csv_path, const std::string& json_path);

}  // namespace t2m::generator
