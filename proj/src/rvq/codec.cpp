#include "t2m/rvq/codec.hpp"

#include "t2m/core/errors.hpp"

namespace t2m::rvq {

using nn::Spans;
using nn::Var;

namespace {

int stage_count(int downsample) {
    int s = 0, l = downsample;
    while (l > 1) {
        if (l % 2 != 0) throw ArgumentError("downsample rate must be a power of two");
        l /= 2;
        ++s;
    }
    return s;
}

}  // namespace

MotionCodec::MotionCodec(int feature_dim, const RvqConfig& cfg, std::uint64_t init_seed)
    : feature_dim_(feature_dim), downsample_(cfg.downsample), stages_(stage_count(cfg.downsample)) {
    Rng rng(init_seed);
    const int c = cfg.channels;
    enc_in_ = nn::Conv1d(params_, "enc.in", feature_dim, c, 3, 1, 1, rng);
    for (int s = 0; s < stages_; ++s) {
        std::string p = "enc.stage" + std::to_string(s);
        enc_down_.emplace_back(params_, p + ".down", c, c, 4, 2, 1, rng);
        enc_res_.push_back({nn::Conv1d(params_, p + ".res.c1", c, c, 3, 1, 1, rng),
                            nn::Conv1d(params_, p + ".res.c2", c, c, 1, 1, 0, rng)});
    }
    enc_out_ = nn::Conv1d(params_, "enc.out", c, cfg.code_dim, 3, 1, 1, rng);
    dec_in_ = nn::Conv1d(params_, "dec.in", cfg.code_dim, c, 3, 1, 1, rng);
    for (int s = 0; s < stages_; ++s) {
        std::string p = "dec.stage" + std::to_string(s);
        dec_up_.emplace_back(params_, p + ".up", c, c, 3, 1, 1, rng);
        dec_res_.push_back({nn::Conv1d(params_, p + ".res.c1", c, c, 3, 1, 1, rng),
                            nn::Conv1d(params_, p + ".res.c2", c, c, 1, 1, 0, rng)});
    }
    dec_out_ = nn::Conv1d(params_, "dec.out", c, feature_dim, 3, 1, 1, rng);
}

Var MotionCodec::res_forward(const ResBlock& rb, const Var& x, const Spans& spans) const {
    Var h = nn::relu(rb.c1(x, spans).first);
    Var out = rb.c2(h, spans).first;
    return nn::add(x, out);
}

std::pair<Var, Spans> MotionCodec::encode(const Var& frames, const Spans& spans) const {
    for (const auto& s : spans)
        if (s.len < downsample_) throw ArgumentError("sequence shorter than downsample rate");
    auto [h, sp] = enc_in_(frames, spans);
    h = nn::relu(h);
    for (int s = 0; s < stages_; ++s) {
        auto [down, dsp] = enc_down_[static_cast<std::size_t>(s)](h, sp);
        h = nn::relu(down);
        sp = dsp;
        h = res_forward(enc_res_[static_cast<std::size_t>(s)], h, sp);
    }
    return {enc_out_(h, sp).first, sp};
}

std::pair<Var, Spans> MotionCodec::decode(const Var& latents, const Spans& latent_spans) const {
    if (latents.value().rows() < 1) throw ArgumentError("decode of empty latent sequence");
    auto [h, sp] = dec_in_(latents, latent_spans);
    h = nn::relu(h);
    for (int s = 0; s < stages_; ++s) {
        Var up = nn::upsample_rows(h, 2, sp);
        Spans usp;
        int at = 0;
        for (const auto& span : sp) {
            usp.push_back({at, span.len * 2});
            at += span.len * 2;
        }
        h = nn::relu(dec_up_[static_cast<std::size_t>(s)](up, usp).first);
        sp = usp;
        h = res_forward(dec_res_[static_cast<std::size_t>(s)], h, sp);
    }
    return {dec_out_(h, sp).first, sp};
}

}  // namespace t2m::rvq
