#include "t2m/evalsuite/extractor.hpp"

#include <algorithm>
#include <filesystem>

#include <json.hpp>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/nn/checkpoint.hpp"
#include "t2m/syndata/caption.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace t2m::evalsuite {

using nn::Spans;

EvalExtractor::EvalExtractor(const ExtractorConfig& cfg_, int n_vocab_, int motion_dim_)
    : cfg(cfg_), n_vocab(n_vocab_), motion_dim(motion_dim_) {
    if (cfg.feature_dim < 2 || cfg.hidden < 1) throw ArgumentError("invalid extractor widths");
    if (cfg.temperature <= 0.0) throw ArgumentError("extractor temperature must be > 0");
    Rng rng(derive_seed(cfg.seed, "eval.init"));
    m1_ = nn::Linear(params_, "motion.l1", motion_dim, cfg.hidden, rng);
    m2_ = nn::Linear(params_, "motion.l2", cfg.hidden, cfg.hidden, rng);
    m_out_ = nn::Linear(params_, "motion.out", cfg.hidden, cfg.feature_dim, rng);
    t_embed_ = nn::Embedding(params_, "text.embed", n_vocab, cfg.hidden, rng);
    t_proj_ = nn::Linear(params_, "text.out", cfg.hidden, cfg.feature_dim, rng);
}

Var EvalExtractor::motion_features(
    const std::vector<const syndata::MotionSequence*>& motions) const {
    std::vector<Var> frames;
    Spans spans;
    int off = 0;
    for (const auto* m : motions) {
        if (m->dim() != motion_dim) throw ArgumentError("extractor: motion dimension mismatch");
        if (m->length() < 1) throw ArgumentError("extractor: empty motion");
        frames.push_back(Var::constant(m->frames));
        spans.push_back({off, m->length()});
        off += m->length();
    }
    Var x = nn::concat_rows(frames);
    x = nn::relu(m1_(x));
    x = nn::relu(m2_(x));
    return nn::l2_normalize_rows(m_out_(nn::mean_pool_rows(x, spans)));
}

Var EvalExtractor::caption_features(
    const std::vector<const syndata::CaptionTokens*>& captions) const {
    std::vector<int> ids;
    Spans spans;
    for (const auto* cap : captions) {
        if (cap->tokens.empty()) throw ArgumentError("extractor: empty caption");
        spans.push_back({static_cast<int>(ids.size()), static_cast<int>(cap->tokens.size())});
        for (int t : cap->tokens) {
            if (t < 0 || t >= n_vocab) throw ArgumentError("extractor: token id out of range");
            ids.push_back(t);
        }
    }
    Var pooled = nn::mean_pool_rows(t_embed_(ids), spans);
    return nn::l2_normalize_rows(t_proj_(nn::relu(pooled)));
}

Eigen::VectorXd EvalExtractor::motion_feature(const syndata::MotionSequence& motion) const {
    return motion_features({&motion}).value().row(0).transpose();
}

Eigen::VectorXd EvalExtractor::caption_feature(const syndata::CaptionTokens& caption) const {
    return caption_features({&caption}).value().row(0).transpose();
}

EvalExtractor train_eval_extractor(const syndata::Dataset& ds, const ExtractorConfig& cfg,
                                   std::vector<ExtractorCurvePoint>* curve) {
    if (ds.train_indices.empty()) throw ArgumentError("empty training split");
    EvalExtractor ex(cfg, syndata::vocabulary_size(), ds.spec.feature_dim);
    nn::Adam adam(ex.params(), cfg.lr);
    const int n_train = static_cast<int>(ds.train_indices.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "eval.epoch", static_cast<std::uint64_t>(epoch)));
        std::vector<int> order = ds.train_indices;
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start + 1 < n_train; start += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n_train - start);
            if (bsz < 2) break;
            std::vector<const syndata::MotionSequence*> motions;
            std::vector<const syndata::CaptionTokens*> captions;
            std::vector<int> diag;
            for (int b = 0; b < bsz; ++b) {
                const auto& s = ds.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
                motions.push_back(&s.motion);
                captions.push_back(&s.caption);
                diag.push_back(b);
            }
            Var mf = ex.motion_features(motions);
            Var cf = ex.caption_features(captions);
            Var sim = nn::scale(nn::matmul_nt(mf, cf), 1.0 / cfg.temperature);
            Var m2t = nn::nll_rows(nn::log_softmax_rows(sim), diag, static_cast<double>(bsz));
            Var t2m = nn::nll_rows(nn::log_softmax_rows(nn::transpose(sim)), diag,
                                   static_cast<double>(bsz));
            Var loss = nn::scale(nn::add(m2t, t2m), 0.5);
            if (!std::isfinite(loss.scalar()))
                throw TrainingError("extractor training diverged at epoch " +
                                    std::to_string(epoch));
            ex.params().zero_grad();
            loss.backward();
            adam.step();
            epoch_loss += loss.scalar();
            ++batches;
        }
        if (curve) curve->push_back({epoch, epoch_loss / std::max(1, batches)});
    }
    return ex;
}

void save_extractor(const EvalExtractor& extractor, const std::string& dir,
                    const std::vector<ExtractorCurvePoint>& curve) {
    json config;
    config["extractor"] = {{"hidden", extractor.cfg.hidden},
                           {"feature_dim", extractor.cfg.feature_dim},
                           {"temperature", extractor.cfg.temperature},
                           {"lr", extractor.cfg.lr},
                           {"batch_size", extractor.cfg.batch_size},
                           {"epochs", extractor.cfg.epochs},
                           {"seed", extractor.cfg.seed}};
    config["n_vocab"] = extractor.n_vocab;
    config["motion_dim"] = extractor.motion_dim;
    nn::ParamStore snap;
    for (const auto& name : extractor.params().names())
        snap.add_value(name, extractor.params().get(name).value());
    nn::save_checkpoint(dir, "eval", config, snap);
    json jc = json::array();
    for (const auto& p : curve) jc.push_back({{"epoch", p.epoch}, {"loss", p.loss}});
    write_file_text(fs::path(dir) / "curve.json", jc.dump(2) + "\n");
}

EvalExtractor load_extractor(const std::string& dir) {
    json config = nn::load_checkpoint_config(dir, "eval");
    ExtractorConfig cfg;
    const auto& ec = config.at("extractor");
    cfg.hidden = ec.at("hidden");
    cfg.feature_dim = ec.at("feature_dim");
    cfg.temperature = ec.at("temperature");
    cfg.lr = ec.at("lr");
    cfg.batch_size = ec.at("batch_size");
    cfg.epochs = ec.at("epochs");
    cfg.seed = ec.at("seed");
    EvalExtractor ex(cfg, config.at("n_vocab"), config.at("motion_dim"));
    ex.params().load(nn::load_checkpoint_params(dir));
    return ex;
}

}  // namespace t2m::evalsuite
