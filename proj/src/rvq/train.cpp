#include "t2m/rvq/train.hpp"

#include <cmath>
#include <numbers>
#include <filesystem>

#include <json.hpp>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/nn/checkpoint.hpp"
#include "t2m/syndata/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace t2m::rvq {

using nn::Spans;
using nn::Var;

namespace {

Mat normalize_cropped(const RvqModel& m, const syndata::MotionSequence& motion) {
    if (motion.length() < m.cfg.downsample)
        throw ArgumentError("motion shorter than the downsample rate");
    const int t = m.crop_length(motion.length());
    Mat out = motion.frames.topRows(t);
    for (int c = 0; c < out.cols(); ++c)
        out.col(c) = (out.col(c).array() - m.channel_mean(c)) / m.channel_std(c);
    return out;
}

struct Batch {
    Mat frames;  // stacked normalized cropped frames
    Spans spans;
};

Batch stack_samples(const RvqModel& m, const syndata::Dataset& ds, const std::vector<int>& idx) {
    Batch b;
    int total = 0;
    for (int i : idx) total += m.crop_length(ds.samples[static_cast<std::size_t>(i)].motion.length());
    b.frames.resize(total, m.feature_dim);
    int at = 0;
    for (int i : idx) {
        Mat f = normalize_cropped(m, ds.samples[static_cast<std::size_t>(i)].motion);
        b.frames.middleRows(at, f.rows()) = f;
        b.spans.push_back({at, static_cast<int>(f.rows())});
        at += static_cast<int>(f.rows());
    }
    return b;
}

}  // namespace

Mat RvqModel::encode_latents(const syndata::MotionSequence& motion) const {
    Mat frames = normalize_cropped(*this, motion);
    Spans spans{{0, static_cast<int>(frames.rows())}};
    auto [latents, lsp] = codec->encode(Var::constant(frames), spans);
    return latents.value();
}

CodeMatrix RvqModel::tokenize(const syndata::MotionSequence& motion) const {
    return residual_quantize_rows(encode_latents(motion), codebooks);
}

syndata::MotionSequence RvqModel::decode_latents(const Mat& latents) const {
    Spans spans{{0, static_cast<int>(latents.rows())}};
    auto [recon, rsp] = codec->decode(Var::constant(latents), spans);
    syndata::MotionSequence out;
    out.frame_rate = frame_rate;
    out.frames = recon.value();
    for (int c = 0; c < out.frames.cols(); ++c)
        out.frames.col(c) = out.frames.col(c).array() * channel_std(c) + channel_mean(c);
    return out;
}

syndata::MotionSequence RvqModel::detokenize(const CodeMatrix& codes) const {
    return decode_latents(dequantize(codes, codebooks));
}

RvqModel train_rvq(const syndata::Dataset& ds, const RvqConfig& cfg,
                   std::vector<CurvePoint>* curve) {
    if (cfg.codebook_size < 2 || cfg.code_dim < 1 || cfg.num_layers < 1 || cfg.downsample < 1 ||
        cfg.batch_size < 1 || cfg.epochs < 1)
        throw ArgumentError("invalid rvq config");

    RvqModel model;
    model.cfg = cfg;
    model.feature_dim = ds.spec.feature_dim;
    model.frame_rate = ds.spec.frame_rate;
    Eigen::VectorXd std = syndata::channel_stddev(ds, ds.train_indices);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(model.feature_dim);
    {
        long n = 0;
        for (int i : ds.train_indices) {
            const auto& f = ds.samples[static_cast<std::size_t>(i)].motion.frames;
            mean += f.colwise().sum().transpose();
            n += f.rows();
        }
        mean /= static_cast<double>(n);
    }
    model.channel_mean = mean;
    model.channel_std = std.cwiseMax(1e-6);
    model.codec = std::make_shared<MotionCodec>(model.feature_dim, cfg,
                                                derive_seed(cfg.seed, "rvq.init"));

    nn::Adam opt(model.codec->params(), cfg.lr);

    const std::vector<int>& order = ds.train_indices;
    const int warmup = std::min(cfg.warmup_epochs, cfg.epochs - 1);
    Rng reset_rng(derive_seed(cfg.seed, "rvq.reset"));
    const long steps_per_epoch =
        (static_cast<long>(order.size()) + cfg.batch_size - 1) / cfg.batch_size;
    const long total_steps = steps_per_epoch * cfg.epochs;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, "rvq.shuffle", static_cast<std::uint64_t>(epoch)));
        std::vector<int> perm = order;
        shuffle_rng.shuffle(perm);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t at = 0; at < perm.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            std::vector<int> idx(perm.begin() + static_cast<long>(at),
                                 perm.begin() +
                                     static_cast<long>(std::min(perm.size(),
                                                                at + static_cast<std::size_t>(
                                                                         cfg.batch_size))));
            Batch b = stack_samples(model, ds, idx);
            auto [lat, lsp] = model.codec->encode(Var::constant(b.frames), b.spans);

            Var loss;
            CodeMatrix codes;
            std::vector<Mat> res_in, res_q;
            const bool quantized_phase = epoch >= warmup;
            if (quantized_phase && model.codebooks.layers.empty()) {
                // Codebooks seeded by k-means++ over the first post-warmup
                // batch's per-layer residuals.
                Mat residual = lat.value();
                Rng init_rng(derive_seed(cfg.seed, "rvq.kmeans"));
                for (int v = 0; v < cfg.num_layers; ++v) {
                    Mat centers = kmeanspp_init(residual, cfg.codebook_size, init_rng);
                    model.codebooks.layers.push_back(make_codebook(centers, v > 0));
                    for (int i = 0; i < residual.rows(); ++i) {
                        auto [k, code] =
                            quantize_nearest(residual.row(i),
                                             model.codebooks.layers.back().codes);
                        residual.row(i) -= code;
                    }
                }
            }
            if (quantized_phase) {
                codes = residual_quantize_rows(lat.value(), model.codebooks, &res_in, &res_q);
                Mat quantized = Mat::Zero(lat.value().rows(), lat.value().cols());
                for (const auto& q : res_q) quantized += q;

                // Straight-through: decode sees quantized values, encoder
                // sees identity gradient.
                Var dec_in = nn::add_const(lat, quantized - lat.value());
                auto [recon, rsp] = model.codec->decode(dec_in, lsp);
                loss = nn::l1_const(recon, b.frames);
                for (int v = 0; v < cfg.num_layers; ++v) {
                    Var rv = nn::add_const(lat, res_in[static_cast<std::size_t>(v)] - lat.value());
                    loss = nn::add(loss,
                                   nn::scale(nn::mse_const(rv, res_q[static_cast<std::size_t>(v)]),
                                             cfg.beta));
                }
            } else {
                auto [recon, rsp] = model.codec->decode(lat, lsp);
                loss = nn::l1_const(recon, b.frames);
            }
            ++step;
            if (!std::isfinite(loss.scalar()))
                throw TrainingError("rvq training diverged at step " + std::to_string(step));

            model.codec->params().zero_grad();
            loss.backward();
            double progress = static_cast<double>(step - 1) / static_cast<double>(total_steps);
            opt.set_lr(cfg.lr_min +
                       0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * progress)));
            opt.step();

            if (quantized_phase) {
                for (int v = 0; v < cfg.num_layers; ++v) {
                    auto& layer = model.codebooks.layers[static_cast<std::size_t>(v)];
                    std::vector<int> assign(static_cast<std::size_t>(codes.rows()));
                    for (int i = 0; i < codes.rows(); ++i)
                        assign[static_cast<std::size_t>(i)] = codes(i, v);
                    ema_update(layer, res_in[static_cast<std::size_t>(v)], assign, cfg.ema_decay);
                    codebook_reset(layer, res_in[static_cast<std::size_t>(v)], cfg.reset_threshold,
                                   cfg.reset_window, reset_rng);
                }
            }

            epoch_loss += loss.scalar();
            ++batches;
        }
        if (curve) curve->push_back({epoch, epoch_loss / std::max(1, batches)});
    }
    return model;
}

void save_rvq(const RvqModel& model, const std::string& dir,
              const std::vector<CurvePoint>& curve) {
    json config;
    config["rvq"] = {{"codebook_size", model.cfg.codebook_size},
                     {"code_dim", model.cfg.code_dim},
                     {"downsample", model.cfg.downsample},
                     {"num_layers", model.cfg.num_layers},
                     {"beta", model.cfg.beta},
                     {"ema_decay", model.cfg.ema_decay},
                     {"reset_threshold", model.cfg.reset_threshold},
                     {"reset_window", model.cfg.reset_window},
                     {"channels", model.cfg.channels},
                     {"lr", model.cfg.lr},
                     {"lr_min", model.cfg.lr_min},
                     {"batch_size", model.cfg.batch_size},
                     {"epochs", model.cfg.epochs},
                     {"warmup_epochs", model.cfg.warmup_epochs},
                     {"seed", model.cfg.seed}};
    config["feature_dim"] = model.feature_dim;
    config["frame_rate"] = model.frame_rate;
    config["channel_mean"] = std::vector<double>(model.channel_mean.data(),
                                                model.channel_mean.data() + model.channel_mean.size());
    config["channel_std"] = std::vector<double>(model.channel_std.data(),
                                               model.channel_std.data() + model.channel_std.size());

    nn::ParamStore snap;
    for (const auto& name : model.codec->params().names())
        snap.add_value(name, model.codec->params().get(name).value());
    for (int v = 0; v < model.codebooks.num_layers(); ++v)
        snap.add_value("codebook." + std::to_string(v),
                       model.codebooks.layers[static_cast<std::size_t>(v)].codes);
    nn::save_checkpoint(dir, "rvq", config, snap);

    json jc = json::array();
    for (const auto& p : curve) jc.push_back({{"epoch", p.epoch}, {"loss", p.loss}});
    write_file_text(fs::path(dir) / "curve.json", jc.dump(2) + "\n");
}

RvqModel load_rvq(const std::string& dir) {
    json config = nn::load_checkpoint_config(dir, "rvq");
    RvqModel model;
    const auto& rc = config.at("rvq");
    model.cfg.codebook_size = rc.at("codebook_size");
    model.cfg.code_dim = rc.at("code_dim");
    model.cfg.downsample = rc.at("downsample");
    model.cfg.num_layers = rc.at("num_layers");
    model.cfg.beta = rc.at("beta");
    model.cfg.ema_decay = rc.at("ema_decay");
    model.cfg.reset_threshold = rc.at("reset_threshold");
    model.cfg.reset_window = rc.at("reset_window");
    model.cfg.channels = rc.at("channels");
    model.cfg.lr = rc.at("lr");
    model.cfg.lr_min = rc.at("lr_min");
    model.cfg.batch_size = rc.at("batch_size");
    model.cfg.epochs = rc.at("epochs");
    model.cfg.warmup_epochs = rc.at("warmup_epochs");
    model.cfg.seed = rc.at("seed");
    model.feature_dim = config.at("feature_dim");
    model.frame_rate = config.at("frame_rate");
    auto mean = config.at("channel_mean").get<std::vector<double>>();
    auto std = config.at("channel_std").get<std::vector<double>>();
    model.channel_mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<long>(mean.size()));
    model.channel_std = Eigen::Map<Eigen::VectorXd>(std.data(), static_cast<long>(std.size()));

    model.codec = std::make_shared<MotionCodec>(model.feature_dim, model.cfg, 0);
    auto tensors = nn::load_checkpoint_params(dir);
    std::map<std::string, Mat> codec_params;
    for (auto& [name, value] : tensors) {
        if (name.rfind("codebook.", 0) == 0) continue;
        codec_params.emplace(name, std::move(value));
    }
    model.codec->params().load(codec_params);
    for (int v = 0; v < model.cfg.num_layers; ++v) {
        auto it = tensors.find("codebook." + std::to_string(v));
        if (it == tensors.end())
            throw FormatError("checkpoint missing codebook layer " + std::to_string(v));
        model.codebooks.layers.push_back(make_codebook(it->second, v > 0));
    }
    return model;
}

}  // namespace t2m::rvq
