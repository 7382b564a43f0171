#pragma once

#include <cstdint>

#include "t2m/nn/layers.hpp"
#include "t2m/rvq/quantizer.hpp"

namespace t2m::rvq {

// Temporal codec: strided 1-D convolutions with residual blocks downsample by
// cfg.downsample (power of two); the decoder mirrors with nearest-neighbor
// upsampling. All sequences are ragged (stacked rows + spans).
class MotionCodec {
public:
    MotionCodec(int feature_dim, const RvqConfig& cfg, std::uint64_t init_seed);

    std::pair<nn::Var, nn::Spans> encode(const nn::Var& frames, const nn::Spans& spans) const;
    std::pair<nn::Var, nn::Spans> decode(const nn::Var& latents,
                                         const nn::Spans& latent_spans) const;

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    int feature_dim() const { return feature_dim_; }
    int downsample() const { return downsample_; }

private:
    struct ResBlock {
        nn::Conv1d c1, c2;
    };

    nn::Var res_forward(const ResBlock& rb, const nn::Var& x, const nn::Spans& spans) const;

    int feature_dim_;
    int downsample_;
    int stages_;
    nn::ParamStore params_;
    nn::Conv1d enc_in_, enc_out_, dec_in_, dec_out_;
    std::vector<nn::Conv1d> enc_down_, dec_up_;
    std::vector<ResBlock> enc_res_, dec_res_;
};

}  // namespace t2m::rvq
