#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "t2m/core/rng.hpp"
#include "t2m/nn/autodiff.hpp"
#include "t2m/nn/layers.hpp"
#include "t2m/rvq/train.hpp"
#include "t2m/syndata/types.hpp"

namespace t2m::predictor {

using nn::Mat;
using nn::Spans;
using nn::Var;
using rvq::CodeMatrix;

// Token-state alphabet on top of code indices [0, K). EMPTY marks positions the
// inference loop has not fixed yet; it shares the MASK embedding.
constexpr int kMaskToken = -1;
constexpr int kEmptyToken = -2;

struct SignalFeature {
    enum class Kind { text, noise };
    Eigen::VectorXd vec;
    Kind kind = Kind::text;
};

SignalFeature sample_noise_signal(int dim, std::uint64_t seed);

struct PredictorConfig {
    int width = 64;
    int heads = 4;
    int ffn_dim = 192;
    int blocks = 4;
    int signal_dim = 64;
    int latent_dim = 32;
    int code_mlp_blocks = 2;
    int residual_blocks = 2;
    double p_noise = 0.1;
    double lambda_kl = 1e-5;
    bool variational = true;
    double lr = 2e-4;
    int batch_size = 32;
    int epochs = 40;
    std::uint64_t seed = 0;
};

struct ForwardOut {
    Mat log_probs;  // S x K, rows log-normalized
    bool has_latent = false;
    Mat mu, log_var;  // S x latent_dim when has_latent
};

// Stage-2 masked code predictor. Layer-0 codes are predicted from a masked
// token state fused with one conditioning signal (text or noise); residual
// layers are predicted unmasked from the completed layers below. The RVQ
// codebooks are frozen inputs: code scores are inner products against them.
class PredictorModel {
  public:
    PredictorModel(const PredictorConfig& cfg, int n_vocab, int t_min, int t_max,
                   const rvq::RvqModel& rvq, std::string rvq_fingerprint);

    PredictorConfig cfg;
    int n_vocab;
    int t_min, t_max;
    int stride;         // codec downsample; token count = frames / stride
    int codebook_size;  // K
    int code_dim;
    int num_layers;  // quantizer layers incl. layer 0
    std::string rvq_fingerprint;
    std::vector<Mat> codebooks;  // frozen copies, one K x code_dim per layer

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    int max_tokens() const { return t_max / stride; }
    int length_classes() const { return t_max - t_min + 1; }

    // Batched graph-building paths (training and inference share these).
    Var text_signals(const std::vector<const syndata::CaptionTokens*>& captions) const;
    Var fuse(const Var& signal_rows, const std::vector<std::vector<int>>& states,
             Spans* full_spans, bool zero_positional = false) const;
    // Drops each sample's signal row; out_spans indexes the remaining token rows.
    Var token_rows(const Var& e, const Spans& full_spans, Spans* out_spans) const;
    // mu / log_var over token rows; log_var pre-clamped to [-10, 10].
    void latent_heads(const Var& e, const Spans& full_spans, Var* mu, Var* log_var,
                      Spans* token_spans) const;
    // from_latent selects the latent_dim input projection; otherwise the
    // width-sized fused features feed the head directly (baseline path).
    Var code_log_probs(const Var& h, bool from_latent) const;
    // Full-sequence distribution for residual layer v >= 1 from ground-truth or
    // completed codes of layers < v. codes: one S_i x num_layers block per sample.
    Var residual_log_probs_batch(const Var& signal_rows,
                                 const std::vector<const CodeMatrix*>& codes, int layer,
                                 Spans* token_spans) const;
    Var length_logits(const Var& text_signal_rows) const;

    // Single-sequence wrappers over the batched paths.
    SignalFeature embed_text(const syndata::CaptionTokens& caption) const;
    ForwardOut forward(const SignalFeature& signal, const std::vector<int>& state,
                       Rng& rng) const;
    Mat residual_log_probs(const SignalFeature& signal, const CodeMatrix& completed,
                           int layer) const;
    int sample_length(const syndata::CaptionTokens& caption, Rng& rng) const;

  private:
    nn::ParamStore params_;
    std::vector<nn::TransformerBlock> fuse_blocks_;
    std::vector<nn::TransformerBlock> res_blocks_;
    nn::TransformerBlock mu_block_, lv_block_;
    nn::Linear text_proj_, signal_proj_, res_signal_proj_;
    nn::Linear code_in_z_, code_in_e_, code_out_;
    std::vector<nn::Linear> code_mlp1_, code_mlp2_;
    nn::Linear mu_proj_, lv_proj_, res_out_, len_hidden_, len_out_;
    nn::LayerNorm fuse_ln_out_, res_ln_out_;
    nn::Embedding text_embed_, token_embed_, fuse_pos_, res_pos_, res_layer_embed_;
    std::vector<nn::Embedding> res_code_embed_;

    int token_index(int token) const;
    Var generic_caption_signal() const;
};

}  // namespace t2m::predictor
