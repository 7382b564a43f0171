#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2m/evalsuite/evaluate.hpp"
#include "t2m/evalsuite/extractor.hpp"
#include "t2m/predictor/model.hpp"
#include "t2m/rvq/quantizer.hpp"
#include "t2m/syndata/types.hpp"

namespace t2m::cli {

struct GenerateDefaults {
    double w = 3.0;
    int decode_steps = 10;
};

struct EvalSettings {
    int repeats = 20;
    int pool_size = 32;
    int caption_cap = 64;
    int mm_captions = 8;
};

// One resolved experiment: every stage derives its own seed from the run seed,
// so a config file plus one integer reproduces the whole pipeline.
struct ExperimentConfig {
    syndata::CorpusSpec corpus;
    rvq::RvqConfig rvq;
    predictor::PredictorConfig predictor;
    evalsuite::ExtractorConfig extractor;
    GenerateDefaults generate;
    EvalSettings eval;
    std::uint64_t seed = 1;
    std::string preset;  // empty, baseline_vq, baseline_rvq, plus_vp, plus_ns
};

// Table III's ablation ladder: the preset pins quantizer layers, the
// variational path, and the noise-signal ratio.
//   baseline_vq   (1 layer,  variational off, p_noise 0)
//   baseline_rvq  (3 layers, variational off, p_noise 0)
//   plus_vp       (3 layers, variational on,  p_noise 0)
//   plus_ns       (3 layers, variational on,  p_noise 0.1)
void apply_preset(ExperimentConfig& cfg);
// Inference-time guidance per preset: only noise-signal-trained models are
// guided; the others generate at w = 0.
double preset_w(const std::string& preset, double configured_w);

std::string dump_ini(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Stage seeds, derived so stages are independent streams of the run seed.
ExperimentConfig with_stage_seeds(ExperimentConfig cfg);

syndata::Dataset cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_dir,
                              bool force);
void cmd_train_rvq(const ExperimentConfig& cfg, const std::string& data_dir,
                   const std::string& out_dir, bool force);
void cmd_train_predictor(const ExperimentConfig& cfg, const std::string& data_dir,
                         const std::string& rvq_dir, const std::string& out_dir, bool force);
void cmd_train_eval(const ExperimentConfig& cfg, const std::string& data_dir,
                    const std::string& out_dir, bool force);

struct GenerateArgs {
    std::string caption;
    double w = 3.0;
    int length = -1;  // frames; -1 samples from the length head
    int decode_steps = 10;
    std::uint64_t seed = 0;
    int count = 1;
};
void cmd_generate(const ExperimentConfig& cfg, const std::string& rvq_dir,
                  const std::string& predictor_dir, const GenerateArgs& args,
                  const std::string& out_dir, bool force);

evalsuite::EvalReport cmd_evaluate(const ExperimentConfig& cfg, const std::string& data_dir,
                                   const std::string& rvq_dir, const std::string& predictor_dir,
                                   const std::string& eval_dir, double w,
                                   const std::string& out_dir, bool force);

std::vector<evalsuite::EvalReport> cmd_sweep(const ExperimentConfig& cfg,
                                             const std::string& data_dir,
                                             const std::string& rvq_dir,
                                             const std::string& predictor_dir,
                                             const std::string& eval_dir,
                                             const std::vector<double>& w_values,
                                             const std::string& out_dir, bool force);

struct AblateRow {
    std::string preset;
    double w = 0.0;
    evalsuite::EvalReport report;
};
// Trains and evaluates each preset from the shared run seed. Codecs are shared
// between presets with identical quantizer configs.
std::vector<AblateRow> cmd_ablate(const ExperimentConfig& cfg, const std::string& data_dir,
                                  const std::vector<std::string>& presets,
                                  const std::string& out_dir, bool force);
std::string format_ablate_table(const std::vector<AblateRow>& rows);

}  // namespace t2m::cli
