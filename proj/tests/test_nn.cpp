#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/core/rng.hpp"
#include "t2m/nn/autodiff.hpp"
#include "t2m/nn/checkpoint.hpp"
#include "t2m/nn/layers.hpp"

using namespace t2m;
using nn::Mat;
using nn::Spans;
using nn::Var;

namespace {

Mat random_mat(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

// Entries bounded away from zero, for ops with a kink at the origin.
Mat random_mat_away(int r, int c, Rng& rng, double min_abs) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            double v = rng.uniform(min_abs, 1.0);
            m(i, j) = rng.uniform() < 0.5 ? -v : v;
        }
    return m;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

using Builder = std::function<Var(const std::vector<Var>&)>;

double eval_at(const std::vector<Mat>& inputs, const Builder& build) {
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const auto& m : inputs) leaves.push_back(Var::leaf(m, false));
    return build(leaves).scalar();
}

// Central finite differences on every entry of every input against the
// reverse-mode gradient of the same graph.
void check_grads(const std::vector<Mat>& inputs, const Builder& build, double tol = 1e-3,
                 double h = 1e-5) {
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const auto& m : inputs) leaves.push_back(Var::leaf(m, true));
    Var loss = build(leaves);
    loss.backward();

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Mat analytic = leaves[i].grad();
        REQUIRE(analytic.rows() == inputs[i].rows());
        REQUIRE(analytic.cols() == inputs[i].cols());
        for (int r = 0; r < inputs[i].rows(); ++r)
            for (int c = 0; c < inputs[i].cols(); ++c) {
                std::vector<Mat> bumped = inputs;
                bumped[i](r, c) += h;
                double up = eval_at(bumped, build);
                bumped[i](r, c) -= 2.0 * h;
                double down = eval_at(bumped, build);
                double fd = (up - down) / (2.0 * h);
                INFO("input ", i, " entry (", r, ",", c, ") analytic ", analytic(r, c), " fd ",
                     fd);
                CHECK(rel_err(analytic(r, c), fd) < tol);
            }
    }
}

}  // namespace

TEST_CASE("gradcheck: elementwise and linear algebra") {
    Rng rng(101);
    Mat a = random_mat(3, 4, rng), b = random_mat(3, 4, rng), t = random_mat(3, 4, rng);

    check_grads({a, b}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::add(v[0], v[1]), t);
    });
    check_grads({a, b}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::sub(v[0], v[1]), t);
    });
    check_grads({a, b}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::hadamard(v[0], v[1]), t);
    });
    check_grads({a}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::scale(v[0], -1.7), t);
    });
    check_grads({a}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::add_const(v[0], b), t);
    });

    Mat m1 = random_mat(3, 4, rng), m2 = random_mat(4, 2, rng), t2 = random_mat(3, 2, rng);
    check_grads({m1, m2}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::matmul(v[0], v[1]), t2);
    });
    Mat m3 = random_mat(2, 4, rng);
    check_grads({m1, m3}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::matmul_nt(v[0], v[1]), t2);
    });
    Mat t3 = random_mat(4, 3, rng);
    check_grads({m1, m1}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::transpose(v[0]), t3);
    });

    Mat x = random_mat(4, 3, rng), row = random_mat(1, 3, rng), t4 = random_mat(4, 3, rng);
    check_grads({x, row}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::add_row_broadcast(v[0], v[1]), t4);
    });
}

TEST_CASE("gradcheck: nonlinearities") {
    Rng rng(102);
    Mat a = random_mat_away(3, 4, rng, 0.05);
    Mat t = random_mat(3, 4, rng);
    check_grads({a}, [&](const std::vector<Var>& v) { return nn::mse_const(nn::relu(v[0]), t); });
    Mat e = random_mat(3, 4, rng);
    check_grads({e}, [&](const std::vector<Var>& v) { return nn::mse_const(nn::expv(v[0]), t); });

    // Keep entries off the clamp boundaries so the derivative is defined.
    Mat c(2, 3);
    c << -0.9, -0.2, 0.1, 0.3, 0.45, 0.8;
    Mat tc = random_mat(2, 3, rng);
    check_grads({c}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::clamp(v[0], -0.5, 0.5), tc);
    });

    Mat l = random_mat(3, 4, rng);
    Mat lt = l;
    for (int i = 0; i < lt.size(); ++i)
        lt(i) += (lt(i) >= 0 ? 0.3 : -0.3);  // keep |a - target| away from the L1 kink
    check_grads({l}, [&](const std::vector<Var>& v) { return nn::l1_const(v[0], lt); });
}

TEST_CASE("gradcheck: row structure ops") {
    Rng rng(103);
    Mat a = random_mat(4, 3, rng);
    Mat t = random_mat(2, 3, rng);
    check_grads({a}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::slice_rows(v[0], 1, 2), t);
    });

    Mat p1 = random_mat(2, 3, rng), p2 = random_mat(1, 3, rng), p3 = random_mat(3, 3, rng);
    Mat tc = random_mat(6, 3, rng);
    check_grads({p1, p2, p3}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::concat_rows({v[0], v[1], v[2]}), tc);
    });

    Mat table = random_mat(5, 3, rng);
    std::vector<int> ids{0, 2, 2, 4, 1};
    Mat te = random_mat(5, 3, rng);
    check_grads({table}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::embedding_lookup(v[0], ids), te);
    });

    Spans spans{{0, 3}, {3, 4}};
    Mat xp = random_mat(7, 3, rng);
    Mat tp = random_mat(2, 3, rng);
    check_grads({xp}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::mean_pool_rows(v[0], spans), tp);
    });

    Spans us{{0, 2}, {2, 3}};
    Mat xu = random_mat(5, 2, rng);
    Mat tu = random_mat(10, 2, rng);
    check_grads({xu}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::upsample_rows(v[0], 2, us), tu);
    });
}

TEST_CASE("gradcheck: unfold1d") {
    Rng rng(104);
    Spans spans{{0, 4}, {4, 5}};
    Mat x = random_mat(9, 2, rng);
    {
        Spans out = nn::conv_out_spans(spans, 3, 1, 1);
        Mat t = random_mat(nn::total_rows(out), 6, rng);
        check_grads({x}, [&](const std::vector<Var>& v) {
            return nn::mse_const(nn::unfold1d(v[0], spans, 3, 1, 1), t);
        });
    }
    {
        Spans out = nn::conv_out_spans(spans, 4, 2, 1);
        Mat t = random_mat(nn::total_rows(out), 8, rng);
        check_grads({x}, [&](const std::vector<Var>& v) {
            return nn::mse_const(nn::unfold1d(v[0], spans, 4, 2, 1), t);
        });
    }
}

TEST_CASE("unfold1d matches a naive zero-padded window oracle") {
    Rng rng(105);
    Spans spans{{0, 5}, {5, 3}};
    Mat x = random_mat(8, 2, rng);
    int kernel = 3, stride = 2, pad = 1;
    Mat got = nn::unfold1d(Var::constant(x), spans, kernel, stride, pad).value();
    Spans out = nn::conv_out_spans(spans, kernel, stride, pad);

    int out_row = 0;
    for (const auto& s : spans) {
        int out_len = (s.len + 2 * pad - kernel) / stride + 1;
        for (int o = 0; o < out_len; ++o, ++out_row) {
            for (int k = 0; k < kernel; ++k) {
                int t_in = o * stride - pad + k;
                for (int ch = 0; ch < x.cols(); ++ch) {
                    double expect = (t_in < 0 || t_in >= s.len) ? 0.0 : x(s.offset + t_in, ch);
                    CHECK(got(out_row, k * x.cols() + ch) == doctest::Approx(expect));
                }
            }
        }
    }
    CHECK(out_row == nn::total_rows(out));
}

TEST_CASE("gradcheck: normalization and softmax") {
    Rng rng(106);
    Mat x = random_mat(4, 6, rng), g = random_mat(1, 6, rng, 0.5, 1.5), b = random_mat(1, 6, rng);
    Mat t = random_mat(4, 6, rng);
    check_grads({x, g, b}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::layer_norm_rows(v[0], v[1], v[2]), t);
    });

    Mat xs = random_mat(4, 5, rng);
    std::vector<int> targets{1, -1, 0, 4};
    check_grads({xs}, [&](const std::vector<Var>& v) {
        return nn::nll_rows(nn::log_softmax_rows(v[0]), targets, 3.0);
    });

    Mat xn = random_mat_away(3, 4, rng, 0.2);
    Mat tn = random_mat(3, 4, rng);
    check_grads({xn}, [&](const std::vector<Var>& v) {
        return nn::mse_const(nn::l2_normalize_rows(v[0]), tn);
    });
}

TEST_CASE("log_softmax and layer_norm value oracles") {
    Rng rng(107);
    Mat x = random_mat(3, 5, rng, -2.0, 2.0);
    Mat lp = nn::log_softmax_rows(Var::constant(x)).value();
    for (int r = 0; r < 3; ++r) {
        double m = x.row(r).maxCoeff();
        double lse = m + std::log((x.row(r).array() - m).exp().sum());
        for (int c = 0; c < 5; ++c) CHECK(lp(r, c) == doctest::Approx(x(r, c) - lse));
        CHECK(lp.row(r).array().exp().sum() == doctest::Approx(1.0));
    }

    Mat g = random_mat(1, 5, rng), b = random_mat(1, 5, rng);
    Mat ln = nn::layer_norm_rows(Var::constant(x), Var::constant(g), Var::constant(b)).value();
    for (int r = 0; r < 3; ++r) {
        double mean = x.row(r).mean();
        double var = (x.row(r).array() - mean).square().mean();
        for (int c = 0; c < 5; ++c) {
            double norm = (x(r, c) - mean) / std::sqrt(var + 1e-5);
            CHECK(ln(r, c) == doctest::Approx(norm * g(0, c) + b(0, c)));
        }
    }
}

TEST_CASE("gradcheck: self-attention, plus a naive oracle") {
    Rng rng(108);
    Spans spans{{0, 4}, {4, 2}};
    Mat q = random_mat(6, 4, rng), k = random_mat(6, 4, rng), v = random_mat(6, 4, rng);
    Mat t = random_mat(6, 4, rng);
    check_grads({q, k, v}, [&](const std::vector<Var>& vars) {
        return nn::mse_const(nn::self_attention(vars[0], vars[1], vars[2], spans, 2), t);
    });

    // Independent reimplementation: per sample, per head, softmax(QK^T/sqrt(dh))V.
    Mat got = nn::self_attention(Var::constant(q), Var::constant(k), Var::constant(v), spans, 2)
                  .value();
    int dh = 2;
    for (const auto& s : spans) {
        for (int h = 0; h < 2; ++h) {
            Mat qh = q.block(s.offset, h * dh, s.len, dh);
            Mat kh = k.block(s.offset, h * dh, s.len, dh);
            Mat vh = v.block(s.offset, h * dh, s.len, dh);
            Mat scores = qh * kh.transpose() / std::sqrt(static_cast<double>(dh));
            for (int r = 0; r < s.len; ++r) {
                Eigen::RowVectorXd e = (scores.row(r).array() - scores.row(r).maxCoeff()).exp();
                e /= e.sum();
                Eigen::RowVectorXd out = e * vh;
                for (int c = 0; c < dh; ++c)
                    CHECK(got(s.offset + r, h * dh + c) == doctest::Approx(out(c)));
            }
        }
    }
}

TEST_CASE("self-attention never mixes information across samples") {
    Rng rng(109);
    Spans spans{{0, 4}, {4, 3}};
    Mat x = random_mat(7, 4, rng);
    Mat base = nn::self_attention(Var::constant(x), Var::constant(x), Var::constant(x), spans, 2)
                   .value();
    Mat x2 = x;
    x2.block(4, 0, 3, 4).setRandom();
    Mat mod =
        nn::self_attention(Var::constant(x2), Var::constant(x2), Var::constant(x2), spans, 2)
            .value();
    CHECK((base.topRows(4) - mod.topRows(4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reductions, nll row skipping, and backward preconditions") {
    Rng rng(110);
    Mat a = random_mat(3, 4, rng);
    CHECK(nn::sum_all(Var::constant(a)).scalar() == doctest::Approx(a.sum()));
    CHECK(nn::mean_all(Var::constant(a)).scalar() == doctest::Approx(a.mean()));

    Mat lp(2, 3);
    lp << std::log(0.5), std::log(0.3), std::log(0.2), std::log(0.25), std::log(0.25),
        std::log(0.5);
    CHECK(nn::nll_rows(Var::constant(lp), {0, -1}, 1.0).scalar() ==
          doctest::Approx(-std::log(0.5)));
    CHECK(nn::nll_rows(Var::constant(lp), {0, 2}, 2.0).scalar() ==
          doctest::Approx((-std::log(0.5) - std::log(0.5)) / 2.0));

    CHECK_THROWS_AS(nn::add(Var::constant(a), Var::constant(Mat::Zero(2, 2))), ArgumentError);
    CHECK_THROWS_AS(Var::constant(a).backward(), ArgumentError);
}

TEST_CASE("linear, conv, and transformer block wrappers") {
    Rng rng(111);
    nn::ParamStore ps;
    Rng init(7);
    nn::Linear lin(ps, "lin", 4, 3, init);
    Mat x = random_mat(5, 4, rng);
    Mat y = lin(Var::constant(x)).value();
    Mat expect = x * ps.get("lin.w").value() +
                 Mat::Ones(5, 1) * ps.get("lin.b").value();
    CHECK((y - expect).cwiseAbs().maxCoeff() < 1e-12);

    nn::Conv1d conv(ps, "conv", 2, 3, 3, 2, 1, init);
    Spans spans{{0, 6}, {6, 4}};
    Mat cx = random_mat(10, 2, rng);
    auto [cy, cspans] = conv(Var::constant(cx), spans);
    CHECK(cspans.size() == 2);
    CHECK(cspans[0].len == 3);
    CHECK(cspans[1].len == 2);
    CHECK(cy.value().rows() == 5);
    CHECK(cy.value().cols() == 3);

    nn::TransformerBlock block(ps, "blk", 4, 2, 8, init);
    Spans bs{{0, 3}, {3, 2}};
    Mat bx = random_mat(5, 4, rng);
    Mat by = block(Var::constant(bx), bs).value();
    CHECK(by.rows() == 5);
    CHECK(by.cols() == 4);
    CHECK(by.allFinite());

    // Gradients flow into the wrapper parameters.
    ps.zero_grad();
    Var loss = nn::mse_const(block(Var::constant(bx), bs), Mat::Zero(5, 4));
    loss.backward();
    CHECK(ps.get("blk.wq.w").grad().cwiseAbs().sum() > 0.0);
    CHECK(ps.get("blk.ff2.w").grad().cwiseAbs().sum() > 0.0);
}

TEST_CASE("Adam matches the closed-form update on a fixed-gradient stream") {
    nn::ParamStore ps;
    Var w = ps.add_value("w", Mat::Constant(1, 1, 1.0));
    nn::Adam opt(ps, 0.1);

    double m = 0.0, v = 0.0, x = 1.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.5;
    for (int t = 1; t <= 5; ++t) {
        ps.zero_grad();
        w.node()->grad = Mat::Constant(1, 1, g);
        opt.step();

        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        double mh = m / (1 - std::pow(b1, t));
        double vh = v / (1 - std::pow(b2, t));
        x -= 0.1 * mh / (std::sqrt(vh) + eps);
        CHECK(w.value()(0, 0) == doctest::Approx(x).epsilon(1e-12));
    }
}

TEST_CASE("ParamStore keeps registration order and round-trips values") {
    nn::ParamStore ps;
    Rng init(5);
    ps.add_normal("a", 2, 3, 0.1, init);
    ps.add_zeros("b", 1, 4);
    ps.add_ones("c", 1, 2);
    CHECK(ps.names() == std::vector<std::string>{"a", "b", "c"});
    CHECK(ps.get("c").value()(0, 1) == 1.0);

    auto vals = ps.values();
    nn::ParamStore ps2;
    Rng init2(99);
    ps2.add_normal("a", 2, 3, 0.1, init2);
    ps2.add_zeros("b", 1, 4);
    ps2.add_ones("c", 1, 2);
    ps2.load(vals);
    CHECK((ps2.get("a").value() - ps.get("a").value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round-trip is float32-exact and version-checked") {
    namespace fs = std::filesystem;
    fs::path dir = fs::path("nn_ckpt_ws");
    fs::remove_all(dir);

    nn::ParamStore ps;
    Rng init(21);
    ps.add_normal("enc.w", 3, 4, 0.5, init);
    ps.add_normal("dec.w", 2, 2, 0.5, init);
    nlohmann::json cfg{{"alpha", 1.5}, {"layers", 3}};
    nn::save_checkpoint(dir.string(), "widget", cfg, ps);
    CHECK(nn::checkpoint_exists(dir.string()));

    auto loaded_cfg = nn::load_checkpoint_config(dir.string(), "widget");
    CHECK(loaded_cfg.at("alpha") == 1.5);
    auto params = nn::load_checkpoint_params(dir.string());
    CHECK(params.count("enc.w") == 1);
    // Blobs are float32: values match to float precision, and a second
    // save/load cycle is bit-stable.
    CHECK((params.at("enc.w") - ps.get("enc.w").value()).cwiseAbs().maxCoeff() < 1e-6);

    nn::ParamStore ps2;
    Rng init2(22);
    ps2.add_normal("enc.w", 3, 4, 0.5, init2);
    ps2.add_normal("dec.w", 2, 2, 0.5, init2);
    ps2.load(params);
    fs::path dir2 = fs::path("nn_ckpt_ws2");
    fs::remove_all(dir2);
    nn::save_checkpoint(dir2.string(), "widget", cfg, ps2);
    CHECK(nn::checkpoint_fingerprint(dir.string()) == nn::checkpoint_fingerprint(dir2.string()));

    CHECK_THROWS_AS(nn::load_checkpoint_config(dir.string(), "other"), FormatError);

    // Corrupting one blob byte must change the fingerprint.
    auto fp_before = nn::checkpoint_fingerprint(dir.string());
    {
        std::fstream f(dir / "t0000.bin", std::ios::in | std::ios::out | std::ios::binary);
        char b;
        f.read(&b, 1);
        b = static_cast<char>(b ^ 0x40);
        f.seekp(0);
        f.write(&b, 1);
    }
    CHECK(nn::checkpoint_fingerprint(dir.string()) != fp_before);
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("Rng is deterministic and its draws have sane moments") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng c(7);
    double sum = 0, sum2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = c.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sum2 / n - 1.0) < 0.05);

    Rng d(8);
    int hist[3] = {0, 0, 0};
    for (int i = 0; i < 30000; ++i) ++hist[d.categorical({0.2, 0.3, 0.5})];
    CHECK(std::abs(hist[0] / 30000.0 - 0.2) < 0.02);
    CHECK(std::abs(hist[1] / 30000.0 - 0.3) < 0.02);
    CHECK(std::abs(hist[2] / 30000.0 - 0.5) < 0.02);

    std::vector<int> v1{1, 2, 3, 4, 5}, v2{1, 2, 3, 4, 5};
    Rng e1(9), e2(9);
    e1.shuffle(v1);
    e2.shuffle(v2);
    CHECK(v1 == v2);
}

TEST_CASE("derive_seed separates named streams") {
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(3, "x", 5) == derive_seed(3, "x", 5));
}
