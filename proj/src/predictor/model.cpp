#include "t2m/predictor/model.hpp"

#include <cmath>
#include <utility>

#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"

namespace t2m::predictor {

SignalFeature sample_noise_signal(int dim, std::uint64_t seed) {
    if (dim < 1) throw ArgumentError("sample_noise_signal: dim must be >= 1");
    Rng rng(seed);
    SignalFeature f;
    f.kind = SignalFeature::Kind::noise;
    f.vec.resize(dim);
    for (int i = 0; i < dim; ++i) f.vec[i] = rng.normal();
    return f;
}

PredictorModel::PredictorModel(const PredictorConfig& cfg_, int n_vocab_, int t_min_,
                               int t_max_, const rvq::RvqModel& rvq, std::string fp)
    : cfg(cfg_),
      n_vocab(n_vocab_),
      t_min(t_min_),
      t_max(t_max_),
      stride(rvq.cfg.downsample),
      codebook_size(rvq.cfg.codebook_size),
      code_dim(rvq.cfg.code_dim),
      num_layers(rvq.cfg.num_layers),
      rvq_fingerprint(std::move(fp)) {
    if (cfg.width % cfg.heads != 0)
        throw ArgumentError("predictor width must be divisible by heads");
    if (n_vocab < 1 || t_min < 1 || t_max < t_min)
        throw ArgumentError("invalid predictor vocabulary or length range");
    for (int v = 0; v < num_layers; ++v) codebooks.push_back(rvq.codebooks.layers[v].codes);

    Rng rng(derive_seed(cfg.seed, "pred.init"));
    text_embed_ = nn::Embedding(params_, "text.embed", n_vocab, cfg.signal_dim, rng);
    text_proj_ = nn::Linear(params_, "text.proj", cfg.signal_dim, cfg.signal_dim, rng);

    token_embed_ = nn::Embedding(params_, "fuse.token", codebook_size + 1, cfg.width, rng);
    fuse_pos_ = nn::Embedding(params_, "fuse.pos", max_tokens() + 1, cfg.width, rng);
    signal_proj_ = nn::Linear(params_, "fuse.signal", cfg.signal_dim, cfg.width, rng);
    for (int b = 0; b < cfg.blocks; ++b)
        fuse_blocks_.emplace_back(params_, "fuse.block" + std::to_string(b), cfg.width,
                                  cfg.heads, cfg.ffn_dim, rng);
    fuse_ln_out_ = nn::LayerNorm(params_, "fuse.out", cfg.width);

    mu_block_ = nn::TransformerBlock(params_, "var.mu.block", cfg.width, cfg.heads,
                                     cfg.ffn_dim, rng);
    mu_proj_ = nn::Linear(params_, "var.mu.proj", cfg.width, cfg.latent_dim, rng);
    lv_block_ = nn::TransformerBlock(params_, "var.lv.block", cfg.width, cfg.heads,
                                     cfg.ffn_dim, rng);
    lv_proj_ = nn::Linear(params_, "var.lv.proj", cfg.width, cfg.latent_dim, rng);

    code_in_z_ = nn::Linear(params_, "code.in_z", cfg.latent_dim, cfg.width, rng);
    code_in_e_ = nn::Linear(params_, "code.in_e", cfg.width, cfg.width, rng);
    for (int b = 0; b < cfg.code_mlp_blocks; ++b) {
        code_mlp1_.emplace_back(params_, "code.mlp" + std::to_string(b) + ".a", cfg.width,
                                cfg.width, rng);
        code_mlp2_.emplace_back(params_, "code.mlp" + std::to_string(b) + ".b", cfg.width,
                                cfg.width, rng);
    }
    code_out_ = nn::Linear(params_, "code.out", cfg.width, code_dim, rng);

    if (num_layers > 1) {
        for (int u = 0; u < num_layers - 1; ++u)
            res_code_embed_.emplace_back(params_, "res.code" + std::to_string(u),
                                         codebook_size, cfg.width, rng);
        res_layer_embed_ = nn::Embedding(params_, "res.layer", num_layers - 1, cfg.width, rng);
        res_signal_proj_ = nn::Linear(params_, "res.signal", cfg.signal_dim, cfg.width, rng);
        res_pos_ = nn::Embedding(params_, "res.pos", max_tokens() + 1, cfg.width, rng);
        for (int b = 0; b < cfg.residual_blocks; ++b)
            res_blocks_.emplace_back(params_, "res.block" + std::to_string(b), cfg.width,
                                     cfg.heads, cfg.ffn_dim, rng);
        res_ln_out_ = nn::LayerNorm(params_, "res.out_ln", cfg.width);
        res_out_ = nn::Linear(params_, "res.out", cfg.width, code_dim, rng);
    }

    len_hidden_ = nn::Linear(params_, "len.hidden", cfg.signal_dim, cfg.width, rng);
    len_out_ = nn::Linear(params_, "len.out", cfg.width, length_classes(), rng);
}

int PredictorModel::token_index(int token) const {
    if (token >= 0) {
        if (token >= codebook_size) throw ArgumentError("token state: code index out of range");
        return token;
    }
    if (token == kMaskToken || token == kEmptyToken) return codebook_size;
    throw ArgumentError("token state: unknown symbol");
}

Var PredictorModel::text_signals(
    const std::vector<const syndata::CaptionTokens*>& captions) const {
    // Empty captions fall back to the generic "a person moves" token ids so the
    // signal is always defined.
    static const std::vector<int> kGeneric = {0, 2, 7};
    std::vector<int> ids;
    nn::Spans spans;
    for (const auto* cap : captions) {
        const std::vector<int>& toks = cap->tokens.empty() ? kGeneric : cap->tokens;
        spans.push_back({static_cast<int>(ids.size()), static_cast<int>(toks.size())});
        for (int t : toks) {
            if (t < 0 || t >= n_vocab) throw ArgumentError("caption token id out of range");
            ids.push_back(t);
        }
    }
    return text_proj_(nn::mean_pool_rows(text_embed_(ids), spans));
}

Var PredictorModel::fuse(const Var& signal_rows, const std::vector<std::vector<int>>& states,
                         Spans* full_spans, bool zero_positional) const {
    const int n = static_cast<int>(states.size());
    if (signal_rows.value().rows() != n)
        throw ArgumentError("fuse: one signal row per state required");
    Var sig = signal_proj_(signal_rows);
    std::vector<Var> frags;
    Spans spans;
    std::vector<int> pos_ids;
    int off = 0;
    for (int i = 0; i < n; ++i) {
        const auto& state = states[i];
        const int s = static_cast<int>(state.size());
        if (s < 1 || s > max_tokens()) throw ArgumentError("fuse: state length out of range");
        frags.push_back(nn::slice_rows(sig, i, 1));
        std::vector<int> tok_ids(state.size());
        for (int t = 0; t < s; ++t) tok_ids[static_cast<std::size_t>(t)] = token_index(state[t]);
        frags.push_back(token_embed_(tok_ids));
        spans.push_back({off, s + 1});
        off += s + 1;
        for (int p = 0; p <= s; ++p) pos_ids.push_back(p);
    }
    Var x = nn::concat_rows(frags);
    if (!zero_positional) x = nn::add(x, fuse_pos_(pos_ids));
    for (const auto& block : fuse_blocks_) x = block(x, spans);
    x = fuse_ln_out_(x);
    if (full_spans) *full_spans = spans;
    return x;
}

Var PredictorModel::token_rows(const Var& e, const Spans& full_spans, Spans* out_spans) const {
    std::vector<Var> parts;
    Spans tok;
    int off = 0;
    for (const auto& s : full_spans) {
        parts.push_back(nn::slice_rows(e, s.offset + 1, s.len - 1));
        tok.push_back({off, s.len - 1});
        off += s.len - 1;
    }
    if (out_spans) *out_spans = tok;
    return nn::concat_rows(parts);
}

void PredictorModel::latent_heads(const Var& e, const Spans& full_spans, Var* mu, Var* log_var,
                                  Spans* token_spans) const {
    Var m_full = mu_proj_(mu_block_(e, full_spans));
    Var v_full = nn::clamp(lv_proj_(lv_block_(e, full_spans)), -10.0, 10.0);
    *mu = token_rows(m_full, full_spans, token_spans);
    *log_var = token_rows(v_full, full_spans, nullptr);
}

Var PredictorModel::code_log_probs(const Var& h, bool from_latent) const {
    Var x = from_latent ? code_in_z_(h) : code_in_e_(h);
    for (std::size_t b = 0; b < code_mlp1_.size(); ++b)
        x = nn::add(x, code_mlp2_[b](nn::relu(code_mlp1_[b](x))));
    Var scores = nn::matmul_nt(code_out_(x), Var::constant(codebooks[0]));
    return nn::log_softmax_rows(scores);
}

Var PredictorModel::residual_log_probs_batch(const Var& signal_rows,
                                             const std::vector<const CodeMatrix*>& codes,
                                             int layer, Spans* token_spans) const {
    if (layer < 1 || layer >= num_layers)
        throw ArgumentError("residual layer must be in [1, num_layers)");
    const int n = static_cast<int>(codes.size());
    if (signal_rows.value().rows() != n)
        throw ArgumentError("residual head: one signal row per sample required");
    Var sig = res_signal_proj_(signal_rows);
    std::vector<Var> frags;
    Spans spans;
    std::vector<int> pos_ids;
    int off = 0;
    for (int i = 0; i < n; ++i) {
        const CodeMatrix& cm = *codes[i];
        if (cm.cols() != num_layers) throw ArgumentError("residual head: layer count mismatch");
        const int s = static_cast<int>(cm.rows());
        if (s < 1 || s > max_tokens())
            throw ArgumentError("residual head: token length out of range");
        frags.push_back(nn::slice_rows(sig, i, 1));
        Var acc;
        for (int u = 0; u < layer; ++u) {
            std::vector<int> ids(static_cast<std::size_t>(s));
            for (int t = 0; t < s; ++t) {
                int c = cm(t, u);
                if (c < 0 || c >= codebook_size)
                    throw ArgumentError("residual head: code index out of range");
                ids[static_cast<std::size_t>(t)] = c;
            }
            Var emb = res_code_embed_[static_cast<std::size_t>(u)](ids);
            acc = u == 0 ? emb : nn::add(acc, emb);
        }
        frags.push_back(acc);
        spans.push_back({off, s + 1});
        off += s + 1;
        for (int p = 0; p <= s; ++p) pos_ids.push_back(p);
    }
    Var x = nn::concat_rows(frags);
    x = nn::add(x, res_pos_(pos_ids));
    x = nn::add_row_broadcast(x, nn::slice_rows(res_layer_embed_.table, layer - 1, 1));
    for (const auto& block : res_blocks_) x = block(x, spans);
    x = res_ln_out_(x);
    Var tok = token_rows(x, spans, token_spans);
    Var scores = nn::matmul_nt(res_out_(tok), Var::constant(codebooks[static_cast<std::size_t>(layer)]));
    return nn::log_softmax_rows(scores);
}

Var PredictorModel::length_logits(const Var& text_signal_rows) const {
    return len_out_(nn::relu(len_hidden_(text_signal_rows)));
}

SignalFeature PredictorModel::embed_text(const syndata::CaptionTokens& caption) const {
    Var s = text_signals({&caption});
    SignalFeature f;
    f.kind = SignalFeature::Kind::text;
    f.vec = s.value().row(0).transpose();
    return f;
}

ForwardOut PredictorModel::forward(const SignalFeature& signal, const std::vector<int>& state,
                                   Rng& rng) const {
    if (signal.vec.size() != cfg.signal_dim)
        throw ArgumentError("forward: signal dimension mismatch");
    Var sig_rows = Var::constant(signal.vec.transpose());
    Spans full;
    Var e = fuse(sig_rows, {state}, &full);
    ForwardOut out;
    if (cfg.variational) {
        Var mu, lv;
        Spans tok;
        latent_heads(e, full, &mu, &lv, &tok);
        Mat eps(mu.value().rows(), mu.value().cols());
        for (int i = 0; i < eps.rows(); ++i)
            for (int j = 0; j < eps.cols(); ++j) eps(i, j) = rng.normal();
        Var z = nn::add(mu, nn::hadamard(nn::expv(nn::scale(lv, 0.5)), Var::constant(eps)));
        out.log_probs = code_log_probs(z, true).value();
        out.has_latent = true;
        out.mu = mu.value();
        out.log_var = lv.value();
    } else {
        Var tok = token_rows(e, full, nullptr);
        out.log_probs = code_log_probs(tok, false).value();
    }
    return out;
}

Mat PredictorModel::residual_log_probs(const SignalFeature& signal, const CodeMatrix& completed,
                                       int layer) const {
    if (signal.vec.size() != cfg.signal_dim)
        throw ArgumentError("residual head: signal dimension mismatch");
    Var sig_rows = Var::constant(signal.vec.transpose());
    std::vector<const CodeMatrix*> codes{&completed};
    return residual_log_probs_batch(sig_rows, codes, layer, nullptr).value();
}

int PredictorModel::sample_length(const syndata::CaptionTokens& caption, Rng& rng) const {
    Var logits = length_logits(text_signals({&caption}));
    Eigen::RowVectorXd row = logits.value().row(0);
    double mx = row.maxCoeff();
    std::vector<double> probs(static_cast<std::size_t>(row.size()));
    double total = 0.0;
    for (int i = 0; i < row.size(); ++i) {
        probs[static_cast<std::size_t>(i)] = std::exp(row[i] - mx);
        total += probs[static_cast<std::size_t>(i)];
    }
    for (double& p : probs) p /= total;
    return t_min + rng.categorical(probs);
}

}  // namespace t2m::predictor
