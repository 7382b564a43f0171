#pragma once

#include <map>
#include <string>
#include <vector>

#include "t2m/core/rng.hpp"
#include "t2m/nn/autodiff.hpp"

namespace t2m::nn {

// Named trainable leaf variables, kept in registration order so optimizer
// state and checkpoint layout are stable across runs.
class ParamStore {
public:
    Var add_normal(const std::string& name, int rows, int cols, double stddev, Rng& rng);
    Var add_zeros(const std::string& name, int rows, int cols);
    Var add_ones(const std::string& name, int rows, int cols);
    Var add_value(const std::string& name, Mat value);

    bool has(const std::string& name) const { return by_name_.count(name) > 0; }
    const Var& get(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    std::size_t size() const { return order_.size(); }

    void zero_grad();
    double grad_norm() const;

    std::map<std::string, Mat> values() const;
    void load(const std::map<std::string, Mat>& values);

private:
    Var& insert(const std::string& name, Mat value);

    std::vector<std::string> order_;
    std::map<std::string, Var> by_name_;
};

struct Linear {
    Var w, b;

    Linear() = default;
    Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng);
    Var operator()(const Var& x) const { return add_row_broadcast(matmul(x, w), b); }
};

struct Embedding {
    Var table;

    Embedding() = default;
    Embedding(ParamStore& ps, const std::string& prefix, int count, int dim, Rng& rng);
    Var operator()(const std::vector<int>& ids) const { return embedding_lookup(table, ids); }
};

struct LayerNorm {
    Var gamma, beta;

    LayerNorm() = default;
    LayerNorm(ParamStore& ps, const std::string& prefix, int dim);
    Var operator()(const Var& x) const { return layer_norm_rows(x, gamma, beta, 1e-5); }
};

// 1-D convolution over ragged row-major sequences via unfold + matmul.
struct Conv1d {
    Var w, b;
    int kernel = 1, stride = 1, pad = 0;

    Conv1d() = default;
    Conv1d(ParamStore& ps, const std::string& prefix, int c_in, int c_out, int kernel, int stride,
           int pad, Rng& rng);
    std::pair<Var, Spans> operator()(const Var& x, const Spans& spans) const;
};

// Pre-norm transformer block: x + attn(ln1(x)), then x + ffn(ln2(x)).
struct TransformerBlock {
    LayerNorm ln1, ln2;
    Linear wq, wk, wv, wo, ff1, ff2;
    int heads = 1;

    TransformerBlock() = default;
    TransformerBlock(ParamStore& ps, const std::string& prefix, int dim, int heads, int ffn_dim,
                     Rng& rng);
    Var operator()(const Var& x, const Spans& spans) const;
};

class Adam {
public:
    Adam(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step();
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<Var> params_;
    std::vector<Mat> m_, v_;
    long t_ = 0;
    double lr_, beta1_, beta2_, eps_;
};

}  // namespace t2m::nn
