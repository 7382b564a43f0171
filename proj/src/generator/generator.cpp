#include "t2m/generator/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/predictor/losses.hpp"
#include "t2m/rvq/quantizer.hpp"
#include "t2m/syndata/caption.hpp"
#include "t2m/syndata/render.hpp"

using nlohmann::json;

namespace t2m::generator {

Mat guided_fuse(const Mat& text_log_probs, const Mat& noise_log_probs, double w) {
    if (text_log_probs.rows() != noise_log_probs.rows() ||
        text_log_probs.cols() != noise_log_probs.cols())
        throw ArgumentError("guided_fuse: distribution shapes differ");
    if (w < 0.0) throw ArgumentError("guided_fuse: w must be >= 0");
    if (w == 0.0) return text_log_probs;
    Mat out(text_log_probs.rows(), text_log_probs.cols());
    for (int r = 0; r < out.rows(); ++r) {
        Eigen::RowVectorXd u =
            (1.0 + w) * text_log_probs.row(r) - w * noise_log_probs.row(r);
        double m = u.maxCoeff();
        double lse = m + std::log((u.array() - m).exp().sum());
        out.row(r) = u.array() - lse;
    }
    return out;
}

int resolve_length(const predictor::PredictorModel& model,
                   const syndata::CaptionTokens& caption, int requested, std::uint64_t seed) {
    if (requested == kAutoLength) {
        Rng rng(seed);
        return model.sample_length(caption, rng);
    }
    if (requested < model.t_min || requested > model.t_max)
        throw ArgumentError("explicit length " + std::to_string(requested) +
                            " outside corpus range [" + std::to_string(model.t_min) + ", " +
                            std::to_string(model.t_max) + "]");
    return requested;
}

std::vector<int> iterative_decode(const predictor::PredictorModel& model,
                                  const GenerationRequest& request, int tokens,
                                  std::vector<StepDiagnostic>* steps) {
    if (tokens < 1 || tokens > model.max_tokens())
        throw ArgumentError("iterative_decode: unresolved or out-of-range token count");
    if (request.decode_steps < 1) throw ArgumentError("decode_steps must be >= 1");
    if (request.w < 0.0) throw ArgumentError("guidance weight must be >= 0");

    auto text_sig = model.embed_text(request.caption);
    auto noise_sig = predictor::sample_noise_signal(model.cfg.signal_dim,
                                                    derive_seed(request.seed, "gen.noise"));
    Rng rng(derive_seed(request.seed, "gen.sample"));

    std::vector<int> state(static_cast<std::size_t>(tokens), predictor::kEmptyToken);
    for (int s = 0; s < request.decode_steps; ++s) {
        std::vector<int> open;
        for (int t = 0; t < tokens; ++t)
            if (state[static_cast<std::size_t>(t)] == predictor::kEmptyToken) open.push_back(t);
        if (open.empty()) break;

        auto fwd_text = model.forward(text_sig, state, rng);
        auto fwd_noise = model.forward(noise_sig, state, rng);
        Mat fused = guided_fuse(fwd_text.log_probs, fwd_noise.log_probs, request.w);

        // Temperature-1 draw at every open position, then keep the most
        // confident draws and re-mask the rest per the cosine schedule.
        std::vector<int> drawn(open.size());
        std::vector<double> conf(open.size());
        for (std::size_t i = 0; i < open.size(); ++i) {
            Eigen::RowVectorXd row = fused.row(open[i]).array().exp();
            std::vector<double> probs(row.data(), row.data() + row.size());
            int code = rng.categorical(probs);
            drawn[i] = code;
            conf[i] = fused(open[i], code);
        }
        int keep_masked = predictor::masked_after(s, tokens, request.decode_steps);
        int fix = std::max(0, static_cast<int>(open.size()) - keep_masked);
        std::vector<std::size_t> order(open.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (conf[a] != conf[b]) return conf[a] > conf[b];
            return open[a] < open[b];
        });
        double fixed_conf = 0.0;
        for (int i = 0; i < fix; ++i) {
            std::size_t pick = order[static_cast<std::size_t>(i)];
            state[static_cast<std::size_t>(open[pick])] = drawn[pick];
            fixed_conf += conf[pick];
        }
        if (steps)
            steps->push_back({s, static_cast<int>(open.size()),
                              static_cast<int>(open.size()) - fix,
                              fix > 0 ? fixed_conf / fix : 0.0});
    }
    return state;
}

CodeMatrix complete_residual_layers(const predictor::PredictorModel& model,
                                    const syndata::CaptionTokens& caption,
                                    const std::vector<int>& layer0) {
    const int s = static_cast<int>(layer0.size());
    CodeMatrix codes(s, model.num_layers);
    for (int t = 0; t < s; ++t) {
        if (layer0[static_cast<std::size_t>(t)] < 0 ||
            layer0[static_cast<std::size_t>(t)] >= model.codebook_size)
            throw ArgumentError("complete_residual_layers: layer 0 is not complete");
        codes(t, 0) = layer0[static_cast<std::size_t>(t)];
    }
    if (model.num_layers == 1) return codes;
    auto text_sig = model.embed_text(caption);
    for (int v = 1; v < model.num_layers; ++v) {
        Mat logp = model.residual_log_probs(text_sig, codes, v);
        for (int t = 0; t < s; ++t) {
            int best = 0;
            for (int k = 1; k < logp.cols(); ++k)
                if (logp(t, k) > logp(t, best)) best = k;
            codes(t, v) = best;
        }
    }
    return codes;
}

GenerationResult generate(const predictor::PredictorModel& model, const rvq::RvqModel& rvq,
                          const GenerationRequest& request) {
    GenerationResult result;
    result.resolved_length = resolve_length(model, request.caption, request.length,
                                            derive_seed(request.seed, "gen.length"));
    const int tokens = result.resolved_length / model.stride;
    std::vector<int> layer0 = iterative_decode(model, request, tokens, &result.steps);
    result.codes = complete_residual_layers(model, request.caption, layer0);
    result.motion = rvq.detokenize(result.codes);
    if (!result.motion.frames.allFinite())
        throw TrainingError("generated motion contains non-finite values");
    return result;
}

namespace {

std::vector<std::string> channel_names(int feature_dim) {
    auto g = syndata::channel_groups(feature_dim);
    std::vector<std::string> names(static_cast<std::size_t>(feature_dim));
    for (int c = 0; c < feature_dim; ++c) {
        std::string base;
        int local = 0;
        if (c < g.gait_end) {
            base = "gait";
            local = c - g.gait_begin;
        } else if (c < g.direction_end) {
            base = "direction";
            local = c - g.direction_begin;
        } else if (c < g.speed_end) {
            base = "speed";
            local = c - g.speed_begin;
        } else if (c < g.posture_end) {
            base = "posture";
            local = c - g.posture_begin;
        } else {
            base = "free";
            local = c - g.free_begin;
        }
        names[static_cast<std::size_t>(c)] = base + std::to_string(local);
    }
    return names;
}

}  // namespace

void export_result(const GenerationResult& result, const GenerationRequest& request,
                   const std::string& csv_path, const std::string& json_path) {
    const Mat& frames = result.motion.frames;
    auto names = channel_names(static_cast<int>(frames.cols()));
    std::ostringstream csv;
    for (std::size_t c = 0; c < names.size(); ++c) csv << (c ? "," : "") << names[c];
    csv << "\n";
    csv.setf(std::ios::fmtflags(0), std::ios::floatfield);
    csv.precision(9);
    for (int r = 0; r < frames.rows(); ++r) {
        for (int c = 0; c < frames.cols(); ++c) csv << (c ? "," : "") << frames(r, c);
        csv << "\n";
    }
    write_file_text(csv_path, csv.str());

    json sidecar;
    sidecar["caption"] = syndata::caption_text(request.caption.tokens);
    sidecar["caption_tokens"] = request.caption.tokens;
    sidecar["seed"] = request.seed;
    sidecar["w"] = request.w;
    sidecar["decode_steps"] = request.decode_steps;
    sidecar["requested_length"] =
        request.length == kAutoLength ? json("auto") : json(request.length);
    sidecar["resolved_length"] = result.resolved_length;
    sidecar["motion_length"] = result.motion.length();
    json codes = json::array();
    for (int t = 0; t < result.codes.rows(); ++t) {
        json row = json::array();
        for (int v = 0; v < result.codes.cols(); ++v) row.push_back(result.codes(t, v));
        codes.push_back(row);
    }
    sidecar["codes"] = codes;
    write_file_text(json_path, sidecar.dump(2) + "\n");
}

}  // namespace t2m::generator
