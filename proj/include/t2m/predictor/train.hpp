#pragma once

#include <string>
#include <vector>

#include "t2m/predictor/model.hpp"
#include "t2m/rvq/train.hpp"
#include "t2m/syndata/types.hpp"

namespace t2m::predictor {

struct TrainStats {
    long noise_steps = 0;  // samples presented under a noise signal
    long text_steps = 0;
};

PredictorModel train_predictor(const syndata::Dataset& ds, const rvq::RvqModel& rvq,
                               const std::string& rvq_fingerprint, const PredictorConfig& cfg,
                               std::vector<rvq::CurvePoint>* curve = nullptr,
                               TrainStats* stats = nullptr);

void save_predictor(const PredictorModel& model, const std::string& dir,
                    const std::vector<rvq::CurvePoint>& curve);
// The checkpoint pins the codec it was trained against; a fingerprint mismatch
// with the supplied rvq checkpoint is a prerequisite error.
PredictorModel load_predictor(const std::string& dir, const rvq::RvqModel& rvq,
                              const std::string& rvq_fingerprint);

}  // namespace t2m::predictor
