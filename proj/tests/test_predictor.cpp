#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/core/rng.hpp"
#include "t2m/nn/checkpoint.hpp"
#include "t2m/predictor/losses.hpp"
#include "t2m/predictor/train.hpp"
#include "t2m/rvq/train.hpp"
#include "t2m/syndata/caption.hpp"
#include "t2m/syndata/corpus.hpp"

using namespace t2m;
using namespace t2m::predictor;

namespace {

syndata::CorpusSpec tiny_corpus_spec() {
    syndata::CorpusSpec s;
    s.n_samples = 40;
    s.t_min = 16;
    s.t_max = 24;
    s.seed = 19;
    return s;
}

rvq::RvqConfig tiny_rvq_config() {
    rvq::RvqConfig c;
    c.codebook_size = 8;
    c.code_dim = 8;
    c.num_layers = 3;
    c.channels = 16;
    c.batch_size = 8;
    c.epochs = 12;
    c.warmup_epochs = 2;
    c.seed = 23;
    return c;
}

PredictorConfig tiny_pred_config() {
    PredictorConfig c;
    c.width = 32;
    c.heads = 2;
    c.ffn_dim = 64;
    c.blocks = 2;
    c.latent_dim = 8;
    c.batch_size = 8;
    c.epochs = 6;
    c.p_noise = 0.5;
    c.seed = 29;
    return c;
}

const syndata::Dataset& tiny_corpus() {
    static syndata::Dataset ds = syndata::generate_corpus(tiny_corpus_spec());
    return ds;
}

const rvq::RvqModel& tiny_rvq() {
    static rvq::RvqModel model = rvq::train_rvq(tiny_corpus(), tiny_rvq_config());
    return model;
}

const std::string kRvqFp = "feedfacecafebeef";

struct TrainedPredictor {
    PredictorModel model;
    TrainStats stats;
};

const TrainedPredictor& tiny_pred() {
    static TrainedPredictor tp = [] {
        TrainStats stats;
        PredictorModel m =
            train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, tiny_pred_config(), nullptr, &stats);
        return TrainedPredictor{std::move(m), stats};
    }();
    return tp;
}

// Untrained model for purely architectural properties.
PredictorModel fresh_model(const PredictorConfig& cfg) {
    return PredictorModel(cfg, syndata::vocabulary_size(), tiny_corpus_spec().t_min,
                          tiny_corpus_spec().t_max, tiny_rvq(), kRvqFp);
}

// Simpson integration of the KL integrand over a wide window of q's mass.
double kl_quadrature(double mu, double sigma) {
    auto integrand = [&](double x) {
        double q = std::exp(-0.5 * (x - mu) * (x - mu) / (sigma * sigma)) /
                   (sigma * std::sqrt(2.0 * std::numbers::pi));
        double log_q = -0.5 * (x - mu) * (x - mu) / (sigma * sigma) -
                       std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
        double log_p = -0.5 * x * x - std::log(std::sqrt(2.0 * std::numbers::pi));
        return q * (log_q - log_p);
    };
    const int n = 20000;
    double lo = mu - 15.0 * sigma, hi = mu + 15.0 * sigma;
    double h = (hi - lo) / n;
    double acc = integrand(lo) + integrand(hi);
    for (int i = 1; i < n; ++i) acc += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

std::string temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("t2m_pred_test_" + tag);
    std::filesystem::remove_all(p);
    return p.string();
}

}  // namespace

TEST_CASE("mask ratio follows the half-cosine curve") {
    CHECK(mask_ratio(0.0) == doctest::Approx(1.0));
    CHECK(mask_ratio(0.5) == doctest::Approx(std::cos(std::numbers::pi / 4.0)));
    CHECK(mask_ratio(0.999999) == doctest::Approx(0.0).epsilon(1e-4));
    double prev = 2.0;
    for (int i = 0; i <= 100; ++i) {
        double r = mask_ratio(i / 100.0);
        CHECK(r <= prev);
        prev = r;
    }
}

TEST_CASE("masked-count schedule matches an independent computation") {
    for (int tokens : {1, 5, 12, 16}) {
        for (int steps : {1, 4, 10}) {
            int prev = tokens;
            for (int s = 0; s < steps; ++s) {
                int got = masked_after(s, tokens, steps);
                double phase = std::numbers::pi * (s + 1) / (2.0 * steps);
                int want = static_cast<int>(std::floor(tokens * std::cos(phase)));
                CHECK(got == want);
                CHECK(got <= prev);
                prev = got;
            }
            CHECK(masked_after(steps - 1, tokens, steps) == 0);
        }
    }
    CHECK_THROWS_AS(masked_after(0, 8, 0), ArgumentError);
}

TEST_CASE("kl closed form on pinned cases") {
    CHECK(kl_loss(Mat::Zero(2, 3), Mat::Zero(2, 3)) == doctest::Approx(0.0));
    CHECK(kl_loss(Mat::Ones(1, 1), Mat::Zero(1, 1)) == doctest::Approx(0.5));
    CHECK(kl_loss(Mat::Zero(1, 1), Mat::Ones(1, 1)) ==
          doctest::Approx((std::numbers::e - 2.0) / 2.0).epsilon(1e-6));

    // Mean-over-dimensions semantics: one active dim out of four.
    Mat mu = Mat::Zero(2, 2), lv = Mat::Zero(2, 2);
    mu(0, 0) = 1.0;
    CHECK(kl_loss(mu, lv) == doctest::Approx(0.5 / 4.0));

    CHECK_THROWS_AS(kl_loss(Mat::Zero(2, 2), Mat::Zero(2, 3)), ArgumentError);
}

TEST_CASE("kl matches a quadrature oracle") {
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        double mu = rng.uniform(-2.0, 2.0);
        double sigma = rng.uniform(0.2, 2.0);
        Mat m = Mat::Constant(1, 1, mu);
        Mat lv = Mat::Constant(1, 1, 2.0 * std::log(sigma));
        CHECK(std::abs(kl_loss(m, lv) - kl_quadrature(mu, sigma)) < 1e-5);
    }
}

TEST_CASE("kl graph node agrees with the scalar form and differentiates") {
    Rng rng(37);
    Mat mu(2, 3), lv(2, 3);
    for (int i = 0; i < mu.size(); ++i) {
        mu(i) = rng.uniform(-1.5, 1.5);
        lv(i) = rng.uniform(-2.0, 2.0);
    }
    auto vm = nn::Var::leaf(mu, true);
    auto vl = nn::Var::leaf(lv, true);
    auto loss = kl_loss(vm, vl);
    CHECK(loss.value()(0, 0) == doctest::Approx(kl_loss(mu, lv)).epsilon(1e-12));

    loss.backward();
    const double h = 1e-6;
    for (int i = 0; i < mu.size(); ++i) {
        Mat mp = mu, mm = mu;
        mp(i) += h;
        mm(i) -= h;
        double fd = (kl_loss(mp, lv) - kl_loss(mm, lv)) / (2.0 * h);
        CHECK(vm.node()->grad(i) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("reparameterized samples carry analytic gradients") {
    // z = mu + exp(log_var / 2) * eps with shared eps between evaluations, so
    // finite differences see the same random draw as the graph.
    const int n = 2000;
    Rng erng(41);
    Mat eps(n, 1);
    for (int i = 0; i < n; ++i) eps(i) = erng.normal();

    auto expectation = [&](double mu, double lv) {
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            double z = mu + std::exp(0.5 * lv) * eps(i);
            acc += z * z;
        }
        return acc / n;
    };

    Rng rng(43);
    for (int c = 0; c < 20; ++c) {
        double mu = rng.uniform(-2.0, 2.0);
        double sigma = rng.uniform(0.3, 2.0);
        double lv = 2.0 * std::log(sigma);

        auto vmu = nn::Var::leaf(Mat::Constant(n, 1, mu), true);
        auto vlv = nn::Var::leaf(Mat::Constant(n, 1, lv), true);
        auto z = nn::add(vmu, nn::hadamard(nn::expv(nn::scale(vlv, 0.5)), nn::Var::constant(eps)));
        auto f = nn::mean_all(nn::hadamard(z, z));
        CHECK(f.value()(0, 0) == doctest::Approx(expectation(mu, lv)).epsilon(1e-10));
        f.backward();

        const double h = 1e-5;
        double fd_mu = (expectation(mu + h, lv) - expectation(mu - h, lv)) / (2.0 * h);
        double fd_lv = (expectation(mu, lv + h) - expectation(mu, lv - h)) / (2.0 * h);
        double g_mu = vmu.node()->grad.sum();
        double g_lv = vlv.node()->grad.sum();
        CHECK(g_mu == doctest::Approx(fd_mu).epsilon(1e-3));
        CHECK(g_lv == doctest::Approx(fd_lv).epsilon(1e-3));
    }

    // d/dmu E[z^2] = 2 mu; the empirical gradient approaches it.
    auto vmu = nn::Var::leaf(Mat::Constant(n, 1, 1.0), true);
    auto vlv = nn::Var::leaf(Mat::Zero(n, 1), true);
    auto z = nn::add(vmu, nn::hadamard(nn::expv(nn::scale(vlv, 0.5)), nn::Var::constant(eps)));
    nn::mean_all(nn::hadamard(z, z)).backward();
    CHECK(vmu.node()->grad.sum() == doctest::Approx(2.0).epsilon(0.08));
}

TEST_CASE("reparameterization arithmetic and the clamp floor") {
    // mu = 2, sigma = 3, eps = 1 -> z = 5.
    auto vmu = nn::Var::leaf(Mat::Constant(1, 1, 2.0), true);
    auto vlv = nn::Var::leaf(Mat::Constant(1, 1, 2.0 * std::log(3.0)), true);
    auto z = nn::add(vmu, nn::hadamard(nn::expv(nn::scale(vlv, 0.5)),
                                       nn::Var::constant(Mat::Ones(1, 1))));
    CHECK(z.value()(0, 0) == doctest::Approx(5.0).epsilon(1e-12));

    // At the clamp floor sigma = e^-5, so z barely leaves mu.
    Rng rng(47);
    for (int i = 0; i < 5; ++i) {
        double eps = rng.normal();
        auto floor_lv = nn::clamp(nn::Var::leaf(Mat::Constant(1, 1, -30.0), true), -10.0, 10.0);
        CHECK(floor_lv.value()(0, 0) == doctest::Approx(-10.0));
        auto zf = nn::add(nn::Var::constant(Mat::Constant(1, 1, 2.0)),
                          nn::hadamard(nn::expv(nn::scale(floor_lv, 0.5)),
                                       nn::Var::constant(Mat::Constant(1, 1, eps))));
        CHECK(std::abs(zf.value()(0, 0) - 2.0) < 1e-2 * 2.0 + 1e-3);
    }
}

TEST_CASE("masked nll hand values") {
    Mat lp(1, 2);
    lp.setConstant(std::log(0.5));
    bool warn = true;
    CHECK(masked_nll(lp, {0}, {true}, &warn) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(!warn);

    Mat uniform = Mat::Constant(3, 64, -std::log(64.0));
    CHECK(masked_nll(uniform, {5, 12, 63}, {true, false, true}) ==
          doctest::Approx(std::log(64.0)).epsilon(1e-9));

    CHECK(masked_nll(uniform, {5, 12, 63}, {false, false, false}, &warn) == 0.0);
    CHECK(warn);
}

TEST_CASE("masked nll ignores unmasked rows exactly") {
    Rng rng(53);
    Mat lp(4, 8);
    for (int i = 0; i < lp.size(); ++i) lp(i) = rng.uniform(-3.0, 0.0);
    std::vector<int> targets{1, 2, 3, 4};
    std::vector<bool> mask{true, false, true, false};
    double base = masked_nll(lp, targets, mask);
    lp.row(1).setConstant(-50.0);
    lp.row(3).setConstant(0.0);
    CHECK(masked_nll(lp, targets, mask) == base);

    CHECK_THROWS_AS(masked_nll(lp, {1, 2, 3}, mask), ArgumentError);
    CHECK_THROWS_AS(masked_nll(lp, {99, 2, 3, 4}, mask), ArgumentError);
}

TEST_CASE("noise signals are seeded standard normals") {
    auto a = sample_noise_signal(64, 12345);
    auto b = sample_noise_signal(64, 12345);
    auto c = sample_noise_signal(64, 54321);
    CHECK(a.kind == SignalFeature::Kind::noise);
    CHECK(a.vec.size() == 64);
    CHECK((a.vec - b.vec).norm() == 0.0);
    CHECK((a.vec - c.vec).norm() > 0.0);
    for (int i = 0; i < a.vec.size(); ++i) CHECK(std::isfinite(a.vec(i)));

    const int draws = 100000, dim = 64;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sumsq = Eigen::VectorXd::Zero(dim);
    for (int d = 0; d < draws; ++d) {
        auto s = sample_noise_signal(dim, derive_seed(59, "mom", d));
        sum += s.vec;
        sumsq += s.vec.cwiseProduct(s.vec);
    }
    for (int i = 0; i < dim; ++i) {
        double mean = sum(i) / draws;
        double var = sumsq(i) / draws - mean * mean;
        CHECK(std::abs(mean) < 0.02);
        CHECK(std::abs(var - 1.0) < 0.05);
    }
}

TEST_CASE("text signals are deterministic and caption-sensitive") {
    const auto& tp = tiny_pred();
    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person walks quickly forwards");
    auto s1 = tp.model.embed_text(cap);
    auto s2 = tp.model.embed_text(cap);
    CHECK(s1.kind == SignalFeature::Kind::text);
    CHECK((s1.vec - s2.vec).norm() == 0.0);
    CHECK(s1.vec.size() == tp.model.cfg.signal_dim);

    syndata::CaptionTokens generic;
    generic.tokens = syndata::tokenize_text("a person moves");
    auto sg = tp.model.embed_text(generic);
    double cosine = s1.vec.dot(sg.vec) / (s1.vec.norm() * sg.vec.norm());
    CHECK(cosine < 0.99);

    // Empty captions fall back to the generic-caption embedding.
    syndata::CaptionTokens empty;
    auto se = tp.model.embed_text(empty);
    CHECK((se.vec - sg.vec).norm() == 0.0);
}

TEST_CASE("token fusion is permutation equivariant without positions") {
    PredictorConfig cfg = tiny_pred_config();
    auto model = fresh_model(cfg);

    std::vector<int> state_a{3, kMaskToken, 5, 1};
    std::vector<int> state_b{5, kMaskToken, 3, 1};
    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person moves");
    auto sig = model.text_signals({&cap});

    nn::Spans spans_a, spans_b;
    auto ea = model.fuse(sig, {state_a}, &spans_a, true);
    auto eb = model.fuse(sig, {state_b}, &spans_b, true);
    CHECK(spans_a[0].len == static_cast<int>(state_a.size()) + 1);

    // Swapping tokens 0 and 2 swaps their output rows (rows offset by the
    // leading signal position).
    CHECK((ea.value().row(1) - eb.value().row(3)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((ea.value().row(3) - eb.value().row(1)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((ea.value().row(2) - eb.value().row(2)).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((ea.value().row(4) - eb.value().row(4)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("forward emits normalized rows under both signal kinds") {
    const auto& tp = tiny_pred();
    const int K = tp.model.codebook_size;
    std::vector<int> state{2, kMaskToken, kEmptyToken, 0, kMaskToken};

    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person jumps slowly leftwards");
    auto text = tp.model.embed_text(cap);
    auto noise = sample_noise_signal(tp.model.cfg.signal_dim, 61);

    for (const auto& sig : {text, noise}) {
        Rng rng(67);
        auto out = tp.model.forward(sig, state, rng);
        CHECK(out.log_probs.rows() == static_cast<int>(state.size()));
        CHECK(out.log_probs.cols() == K);
        for (int r = 0; r < out.log_probs.rows(); ++r) {
            double m = out.log_probs.row(r).maxCoeff();
            double lse = m + std::log((out.log_probs.row(r).array() - m).exp().sum());
            CHECK(std::abs(lse) < 1e-5);
        }
        CHECK(out.has_latent);
        CHECK(out.log_var.minCoeff() >= -10.0);
        CHECK(out.log_var.maxCoeff() <= 10.0);
    }
}

TEST_CASE("empty tokens alias the mask embedding") {
    const auto& tp = tiny_pred();
    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person moves");
    auto sig = tp.model.embed_text(cap);

    std::vector<int> masked{kMaskToken, 4, kMaskToken};
    std::vector<int> empty{kEmptyToken, 4, kEmptyToken};
    Rng r1(71), r2(71);
    auto a = tp.model.forward(sig, masked, r1);
    auto b = tp.model.forward(sig, empty, r2);
    CHECK((a.log_probs - b.log_probs).norm() == 0.0);
}

TEST_CASE("duplicate codebook rows score identically") {
    rvq::RvqModel rvq_dup = tiny_rvq();
    rvq_dup.codebooks.layers[0].codes.row(6) = rvq_dup.codebooks.layers[0].codes.row(2);
    PredictorModel model(tiny_pred_config(), syndata::vocabulary_size(), 16, 24, rvq_dup, kRvqFp);

    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person moves");
    auto sig = model.embed_text(cap);
    std::vector<int> state{kMaskToken, 1, kMaskToken, kMaskToken};
    Rng rng(73);
    auto out = model.forward(sig, state, rng);
    for (int r = 0; r < out.log_probs.rows(); ++r)
        CHECK(out.log_probs(r, 2) == doctest::Approx(out.log_probs(r, 6)).epsilon(1e-12));
}

TEST_CASE("baseline path is deterministic; variational path varies") {
    PredictorConfig base_cfg = tiny_pred_config();
    base_cfg.variational = false;
    base_cfg.p_noise = 0.0;
    base_cfg.epochs = 2;
    TrainStats stats;
    auto base = train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, base_cfg, nullptr, &stats);
    CHECK(stats.noise_steps == 0);
    CHECK(stats.text_steps > 0);

    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person waves rightwards");
    auto sig = base.embed_text(cap);
    std::vector<int> state{kMaskToken, kMaskToken, 2, kMaskToken};
    Rng r1(79), r2(80);
    auto a = base.forward(sig, state, r1);
    auto b = base.forward(sig, state, r2);
    CHECK(!a.has_latent);
    CHECK((a.log_probs - b.log_probs).norm() == 0.0);

    const auto& tp = tiny_pred();
    auto vsig = tp.model.embed_text(cap);
    Rng r3(79), r4(80);
    auto va = tp.model.forward(vsig, state, r3);
    auto vb = tp.model.forward(vsig, state, r4);
    CHECK((va.log_probs - vb.log_probs).norm() > 0.0);
}

TEST_CASE("noise replacement counters follow p_noise") {
    const auto& tp = tiny_pred();
    CHECK(tp.stats.noise_steps > 0);
    CHECK(tp.stats.text_steps > 0);
    long total = tp.stats.noise_steps + tp.stats.text_steps;
    CHECK(total == static_cast<long>(tiny_corpus().train_indices.size()) * tiny_pred_config().epochs);
    // p_noise = 0.5 rarely strays far from an even split.
    CHECK(tp.stats.noise_steps > total / 4);
    CHECK(tp.stats.noise_steps < 3 * total / 4);
}

TEST_CASE("trained predictions beat uniform on held-out data") {
    const auto& tp = tiny_pred();
    const auto& ds = tiny_corpus();
    const auto& rvq = tiny_rvq();
    double nll = 0.0;
    int n = 0;
    for (int idx : ds.heldout_indices) {
        const auto& s = ds.samples[static_cast<std::size_t>(idx)];
        auto codes = rvq.tokenize(s.motion);
        std::vector<int> targets(codes.rows());
        for (int t = 0; t < codes.rows(); ++t) targets[static_cast<std::size_t>(t)] = codes(t, 0);
        std::vector<int> state(targets.size(), kMaskToken);
        std::vector<bool> mask(targets.size(), true);
        Rng rng(derive_seed(83, "ho", idx));
        auto out = tp.model.forward(tp.model.embed_text(s.caption), state, rng);
        nll += masked_nll(out.log_probs, targets, mask);
        ++n;
    }
    CHECK(n > 0);
    CHECK(nll / n < std::log(tp.model.codebook_size));
}

TEST_CASE("kl weight participates in training") {
    PredictorConfig a = tiny_pred_config();
    a.epochs = 2;
    a.lambda_kl = 0.0;
    PredictorConfig b = a;
    b.lambda_kl = 5.0;
    auto ma = train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, a);
    auto mb = train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, b);

    auto da = temp_dir("kl_a"), db = temp_dir("kl_b");
    std::vector<rvq::CurvePoint> curve;
    save_predictor(ma, da, curve);
    save_predictor(mb, db, curve);
    CHECK(nn::checkpoint_fingerprint(da) != nn::checkpoint_fingerprint(db));
    std::filesystem::remove_all(da);
    std::filesystem::remove_all(db);
}

TEST_CASE("training is reproducible") {
    PredictorConfig cfg = tiny_pred_config();
    cfg.epochs = 2;
    auto m1 = train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, cfg);
    auto m2 = train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, cfg);
    auto d1 = temp_dir("rep_1"), d2 = temp_dir("rep_2");
    std::vector<rvq::CurvePoint> curve;
    save_predictor(m1, d1, curve);
    save_predictor(m2, d2, curve);
    CHECK(nn::checkpoint_fingerprint(d1) == nn::checkpoint_fingerprint(d2));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST_CASE("config validation") {
    PredictorConfig bad = tiny_pred_config();
    bad.p_noise = 1.5;
    CHECK_THROWS_AS(train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, bad), ArgumentError);
    bad = tiny_pred_config();
    bad.lambda_kl = -1.0;
    CHECK_THROWS_AS(train_predictor(tiny_corpus(), tiny_rvq(), kRvqFp, bad), ArgumentError);

    syndata::Dataset empty;
    empty.spec = tiny_corpus_spec();
    CHECK_THROWS_AS(train_predictor(empty, tiny_rvq(), kRvqFp, tiny_pred_config()), ArgumentError);
}

TEST_CASE("residual head validates layers and normalizes rows") {
    const auto& tp = tiny_pred();
    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person walks forwards while bending");
    auto sig = tp.model.embed_text(cap);

    CodeMatrix codes = CodeMatrix::Zero(5, tp.model.num_layers);
    for (int t = 0; t < 5; ++t) codes(t, 0) = (t * 3) % tp.model.codebook_size;

    CHECK_THROWS_AS(tp.model.residual_log_probs(sig, codes, 0), ArgumentError);
    CHECK_THROWS_AS(tp.model.residual_log_probs(sig, codes, tp.model.num_layers), ArgumentError);

    auto lp1 = tp.model.residual_log_probs(sig, codes, 1);
    auto lp2 = tp.model.residual_log_probs(sig, codes, 1);
    CHECK((lp1 - lp2).norm() == 0.0);
    CHECK(lp1.rows() == 5);
    for (int r = 0; r < lp1.rows(); ++r) {
        double m = lp1.row(r).maxCoeff();
        double lse = m + std::log((lp1.row(r).array() - m).exp().sum());
        CHECK(std::abs(lse) < 1e-5);
    }
}

TEST_CASE("length head separates and stays in range") {
    const auto& tp = tiny_pred();
    syndata::CaptionTokens cap;
    cap.tokens = syndata::tokenize_text("a person moves");
    Rng r1(89), r2(89);
    int a = tp.model.sample_length(cap, r1);
    int b = tp.model.sample_length(cap, r2);
    CHECK(a == b);
    for (int i = 0; i < 50; ++i) {
        Rng r(derive_seed(97, "len", i));
        int len = tp.model.sample_length(cap, r);
        CHECK(len >= tp.model.t_min);
        CHECK(len <= tp.model.t_max);
    }
}

TEST_CASE("checkpoints round trip behind the codec fingerprint") {
    const auto& tp = tiny_pred();
    auto d1 = temp_dir("ck_1");
    std::vector<rvq::CurvePoint> curve{{0, 2.5}, {1, 2.1}};
    save_predictor(tp.model, d1, curve);

    auto loaded = load_predictor(d1, tiny_rvq(), kRvqFp);
    auto d2 = temp_dir("ck_2");
    save_predictor(loaded, d2, curve);
    CHECK(nn::checkpoint_fingerprint(d1) == nn::checkpoint_fingerprint(d2));
    CHECK(loaded.cfg.epochs == tp.model.cfg.epochs);
    CHECK(loaded.num_layers == tp.model.num_layers);

    CHECK_THROWS_AS(load_predictor(d1, tiny_rvq(), "0000000000000000"), PrerequisiteError);
    CHECK_THROWS_AS(load_predictor(temp_dir("ck_missing"), tiny_rvq(), kRvqFp),
                    PrerequisiteError);
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}
