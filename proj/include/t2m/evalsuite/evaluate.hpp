#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "t2m/evalsuite/extractor.hpp"
#include "t2m/evalsuite/metrics.hpp"
#include "t2m/predictor/model.hpp"
#include "t2m/rvq/train.hpp"
#include "t2m/syndata/types.hpp"

namespace t2m::evalsuite {

struct MetricStat {
    double mean = 0.0;
    double ci = 0.0;  // 95% half-width, 1.96 * std / sqrt(repeats)
};

struct EvalReport {
    MetricStat top1, top2, top3;
    MetricStat fid_score;
    MetricStat matching_dist;
    MetricStat multimodality_score;
    int repeats = 0;
    bool single_repeat = false;
    std::string fingerprint;
};

struct EvalProtocol {
    int pool_size = 32;
    int repeats = 20;
    // Held-out pairs scored per repeat and captions given 30 generations each;
    // caps keep a full evaluation inside the desk CPU budget.
    int caption_cap = 64;
    int mm_captions = 8;
    double w = 3.0;
    int decode_steps = 10;
    std::uint64_t seed = 0;
    // Checkpoint provenance mixed into the report fingerprint by the caller.
    std::string model_fingerprint;
};

// Paper protocol: every repeat regenerates motions for the held-out captions
// (at their reference lengths) with fresh seeds and recomputes all metrics;
// the report carries mean and 95% half-width per metric.
EvalReport evaluate(const predictor::PredictorModel& model, const rvq::RvqModel& rvq,
                    const EvalExtractor& extractor, const syndata::Dataset& ds,
                    const EvalProtocol& protocol);

std::vector<EvalReport> sweep_w(const predictor::PredictorModel& model,
                                const rvq::RvqModel& rvq, const EvalExtractor& extractor,
                                const syndata::Dataset& ds, const std::vector<double>& w_values,
                                const EvalProtocol& protocol);

nlohmann::json report_to_json(const EvalReport& report);
// One CSV row per (w, metric): w, metric, mean, ci.
void write_sweep_csv(const std::string& path, const std::vector<double>& w_values,
                     const std::vector<EvalReport>& reports);

}  // namespace t2m::evalsuite
