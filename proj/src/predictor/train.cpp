#include "t2m/predictor/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/nn/checkpoint.hpp"
#include "t2m/predictor/losses.hpp"
#include "t2m/syndata/caption.hpp"
#include "t2m/syndata/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace t2m::predictor {

using nn::Spans;
using nn::Var;

PredictorModel train_predictor(const syndata::Dataset& ds, const rvq::RvqModel& rvq,
                               const std::string& rvq_fingerprint, const PredictorConfig& cfg,
                               std::vector<rvq::CurvePoint>* curve, TrainStats* stats) {
    if (cfg.p_noise < 0.0 || cfg.p_noise > 1.0)
        throw ArgumentError("p_noise must lie in [0, 1]");
    if (cfg.lambda_kl < 0.0) throw ArgumentError("lambda_kl must be >= 0");
    if (ds.train_indices.empty()) throw ArgumentError("empty training split");

    PredictorModel model(cfg, syndata::vocabulary_size(), ds.spec.t_min, ds.spec.t_max, rvq,
                         rvq_fingerprint);
    nn::Adam adam(model.params(), cfg.lr);

    // Codes for the unaugmented motions never change; tokenize once.
    std::map<int, CodeMatrix> token_cache;
    for (int idx : ds.train_indices) token_cache[idx] = rvq.tokenize(ds.samples[idx].motion);

    const int n_train = static_cast<int>(ds.train_indices.size());
    const int v_res = model.num_layers - 1;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "pred.epoch", static_cast<std::uint64_t>(epoch)));
        std::vector<int> order = ds.train_indices;
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n_train; start += cfg.batch_size, ++step) {
            const int bsz = std::min(cfg.batch_size, n_train - start);

            // Per-sample stochastic choices, drawn in batch order so the run is
            // a pure function of the seed.
            std::vector<const syndata::CaptionTokens*> captions;
            std::vector<CodeMatrix> tokens(static_cast<std::size_t>(bsz));
            std::vector<bool> is_noise(static_cast<std::size_t>(bsz), false);
            std::vector<Mat> noise_rows(static_cast<std::size_t>(bsz));
            std::vector<Mat> eps(static_cast<std::size_t>(bsz));
            std::vector<std::vector<int>> states(static_cast<std::size_t>(bsz));
            std::vector<int> nll_targets, len_targets;
            long total_masked = 0, total_tokens = 0;
            for (int b = 0; b < bsz; ++b) {
                const int idx = order[static_cast<std::size_t>(start + b)];
                const auto& sample = ds.samples[static_cast<std::size_t>(idx)];
                captions.push_back(&sample.caption);
                len_targets.push_back(sample.motion.length() - model.t_min);

                bool noise = rng.uniform() < cfg.p_noise;
                is_noise[static_cast<std::size_t>(b)] = noise;
                if (noise) {
                    auto aug = syndata::length_augment(sample.motion, 0.8, 1.25, ds.spec,
                                                       rng.next_u64());
                    tokens[static_cast<std::size_t>(b)] = rvq.tokenize(aug);
                    Mat row(1, cfg.signal_dim);
                    for (int j = 0; j < cfg.signal_dim; ++j) row(0, j) = rng.normal();
                    noise_rows[static_cast<std::size_t>(b)] = std::move(row);
                    if (stats) ++stats->noise_steps;
                } else {
                    tokens[static_cast<std::size_t>(b)] = token_cache.at(idx);
                    if (stats) ++stats->text_steps;
                }

                const int s = static_cast<int>(tokens[static_cast<std::size_t>(b)].rows());
                double ratio = mask_ratio(rng.uniform());
                int m = std::clamp(static_cast<int>(std::lround(ratio * s)), 1, s);
                std::vector<int> perm(static_cast<std::size_t>(s));
                for (int t = 0; t < s; ++t) perm[static_cast<std::size_t>(t)] = t;
                rng.shuffle(perm);
                std::vector<bool> masked(static_cast<std::size_t>(s), false);
                for (int t = 0; t < m; ++t) masked[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])] = true;

                auto& state = states[static_cast<std::size_t>(b)];
                state.resize(static_cast<std::size_t>(s));
                for (int t = 0; t < s; ++t) {
                    int code = tokens[static_cast<std::size_t>(b)](t, 0);
                    state[static_cast<std::size_t>(t)] = masked[static_cast<std::size_t>(t)] ? kMaskToken : code;
                    nll_targets.push_back(masked[static_cast<std::size_t>(t)] ? code : -1);
                }
                total_masked += m;
                total_tokens += s;

                if (cfg.variational) {
                    Mat e(s, cfg.latent_dim);
                    for (int i = 0; i < s; ++i)
                        for (int j = 0; j < cfg.latent_dim; ++j) e(i, j) = rng.normal();
                    eps[static_cast<std::size_t>(b)] = std::move(e);
                }
            }

            Var text_sig = model.text_signals(captions);
            std::vector<Var> sig_parts;
            for (int b = 0; b < bsz; ++b)
                sig_parts.push_back(is_noise[static_cast<std::size_t>(b)]
                                        ? Var::constant(noise_rows[static_cast<std::size_t>(b)])
                                        : nn::slice_rows(text_sig, b, 1));
            Var sig_rows = nn::concat_rows(sig_parts);

            Spans full;
            Var e = model.fuse(sig_rows, states, &full);
            Var logp, kl;
            if (cfg.variational) {
                Var mu, lv;
                Spans tok;
                model.latent_heads(e, full, &mu, &lv, &tok);
                if (lv.value().minCoeff() < -10.0 - 1e-9 || lv.value().maxCoeff() > 10.0 + 1e-9)
                    throw TrainingError("log-variance left its clamp range at step " +
                                        std::to_string(step));
                std::vector<Var> eps_parts;
                for (int b = 0; b < bsz; ++b)
                    eps_parts.push_back(Var::constant(eps[static_cast<std::size_t>(b)]));
                Var z = nn::add(mu, nn::hadamard(nn::expv(nn::scale(lv, 0.5)),
                                                 nn::concat_rows(eps_parts)));
                logp = model.code_log_probs(z, true);
                kl = kl_loss(mu, lv);
            } else {
                Var tok = model.token_rows(e, full, nullptr);
                logp = model.code_log_probs(tok, false);
            }
            Var loss = nn::nll_rows(logp, nll_targets, static_cast<double>(total_masked));
            if (cfg.variational) loss = nn::add(loss, nn::scale(kl, cfg.lambda_kl));

            if (v_res > 0) {
                std::vector<const CodeMatrix*> code_ptrs;
                for (const auto& cm : tokens) code_ptrs.push_back(&cm);
                Var res_sum;
                for (int v = 1; v <= v_res; ++v) {
                    std::vector<int> res_targets;
                    for (const auto& cm : tokens)
                        for (int t = 0; t < cm.rows(); ++t) res_targets.push_back(cm(t, v));
                    Var lp = model.residual_log_probs_batch(sig_rows, code_ptrs, v, nullptr);
                    Var ce = nn::nll_rows(lp, res_targets, static_cast<double>(total_tokens));
                    res_sum = v == 1 ? ce : nn::add(res_sum, ce);
                }
                loss = nn::add(loss, nn::scale(res_sum, 1.0 / v_res));
            }

            Var len_lp = nn::log_softmax_rows(model.length_logits(text_sig));
            loss = nn::add(loss, nn::nll_rows(len_lp, len_targets, static_cast<double>(bsz)));

            if (!std::isfinite(loss.scalar()))
                throw TrainingError("predictor training diverged at step " +
                                    std::to_string(step));
            model.params().zero_grad();
            loss.backward();
            adam.step();
            epoch_loss += loss.scalar();
            ++batches;
        }
        if (curve) curve->push_back({epoch, epoch_loss / std::max(1, batches)});
    }
    return model;
}

void save_predictor(const PredictorModel& model, const std::string& dir,
                    const std::vector<rvq::CurvePoint>& curve) {
    json config;
    config["predictor"] = {{"width", model.cfg.width},
                           {"heads", model.cfg.heads},
                           {"ffn_dim", model.cfg.ffn_dim},
                           {"blocks", model.cfg.blocks},
                           {"signal_dim", model.cfg.signal_dim},
                           {"latent_dim", model.cfg.latent_dim},
                           {"code_mlp_blocks", model.cfg.code_mlp_blocks},
                           {"residual_blocks", model.cfg.residual_blocks},
                           {"p_noise", model.cfg.p_noise},
                           {"lambda_kl", model.cfg.lambda_kl},
                           {"variational", model.cfg.variational},
                           {"lr", model.cfg.lr},
                           {"batch_size", model.cfg.batch_size},
                           {"epochs", model.cfg.epochs},
                           {"seed", model.cfg.seed}};
    config["n_vocab"] = model.n_vocab;
    config["t_min"] = model.t_min;
    config["t_max"] = model.t_max;
    config["stride"] = model.stride;
    config["codebook_size"] = model.codebook_size;
    config["code_dim"] = model.code_dim;
    config["num_layers"] = model.num_layers;
    config["rvq_fingerprint"] = model.rvq_fingerprint;

    nn::ParamStore snap;
    for (const auto& name : model.params().names())
        snap.add_value(name, model.params().get(name).value());
    nn::save_checkpoint(dir, "predictor", config, snap);

    json jc = json::array();
    for (const auto& p : curve) jc.push_back({{"epoch", p.epoch}, {"loss", p.loss}});
    write_file_text(fs::path(dir) / "curve.json", jc.dump(2) + "\n");
}

PredictorModel load_predictor(const std::string& dir, const rvq::RvqModel& rvq,
                              const std::string& rvq_fingerprint) {
    json config = nn::load_checkpoint_config(dir, "predictor");
    std::string stored = config.at("rvq_fingerprint");
    if (stored != rvq_fingerprint)
        throw PrerequisiteError("predictor checkpoint at " + dir +
                                " was trained against a different codec (fingerprint " + stored +
                                ", loaded codec " + rvq_fingerprint + "); retrain it");
    PredictorConfig cfg;
    const auto& pc = config.at("predictor");
    cfg.width = pc.at("width");
    cfg.heads = pc.at("heads");
    cfg.ffn_dim = pc.at("ffn_dim");
    cfg.blocks = pc.at("blocks");
    cfg.signal_dim = pc.at("signal_dim");
    cfg.latent_dim = pc.at("latent_dim");
    cfg.code_mlp_blocks = pc.at("code_mlp_blocks");
    cfg.residual_blocks = pc.at("residual_blocks");
    cfg.p_noise = pc.at("p_noise");
    cfg.lambda_kl = pc.at("lambda_kl");
    cfg.variational = pc.at("variational");
    cfg.lr = pc.at("lr");
    cfg.batch_size = pc.at("batch_size");
    cfg.epochs = pc.at("epochs");
    cfg.seed = pc.at("seed");

    int n_vocab = config.at("n_vocab");
    int t_min = config.at("t_min");
    int t_max = config.at("t_max");
    if (int(config.at("stride")) != rvq.cfg.downsample ||
        int(config.at("codebook_size")) != rvq.cfg.codebook_size ||
        int(config.at("code_dim")) != rvq.cfg.code_dim ||
        int(config.at("num_layers")) != rvq.cfg.num_layers)
        throw FormatError("predictor checkpoint at " + dir + " disagrees with the codec shape");

    PredictorModel model(cfg, n_vocab, t_min, t_max, rvq, rvq_fingerprint);
    model.params().load(nn::load_checkpoint_params(dir));
    return model;
}

}  // namespace t2m::predictor
