#include "t2m/nn/layers.hpp"

#include <cmath>

#include "t2m/core/errors.hpp"

namespace t2m::nn {

Var& ParamStore::insert(const std::string& name, Mat value) {
    if (by_name_.count(name)) throw ArgumentError("duplicate parameter name: " + name);
    order_.push_back(name);
    auto [it, ok] = by_name_.emplace(name, Var::leaf(std::move(value), true));
    (void)ok;
    return it->second;
}

Var ParamStore::add_normal(const std::string& name, int rows, int cols, double stddev, Rng& rng) {
    Mat v(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) v(r, c) = rng.normal() * stddev;
    return insert(name, std::move(v));
}

Var ParamStore::add_zeros(const std::string& name, int rows, int cols) {
    return insert(name, Mat::Zero(rows, cols));
}

Var ParamStore::add_ones(const std::string& name, int rows, int cols) {
    return insert(name, Mat::Ones(rows, cols));
}

Var ParamStore::add_value(const std::string& name, Mat value) {
    return insert(name, std::move(value));
}

const Var& ParamStore::get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ArgumentError("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, v] : by_name_) v.zero_grad();
}

double ParamStore::grad_norm() const {
    double acc = 0.0;
    for (const auto& [name, v] : by_name_) acc += v.grad().squaredNorm();
    return std::sqrt(acc);
}

std::map<std::string, Mat> ParamStore::values() const {
    std::map<std::string, Mat> out;
    for (const auto& [name, v] : by_name_) out.emplace(name, v.value());
    return out;
}

void ParamStore::load(const std::map<std::string, Mat>& values) {
    for (const auto& name : order_) {
        auto it = values.find(name);
        if (it == values.end()) throw FormatError("checkpoint missing parameter: " + name);
        Var& v = by_name_.at(name);
        if (it->second.rows() != v.value().rows() || it->second.cols() != v.value().cols())
            throw FormatError("checkpoint shape mismatch for parameter: " + name);
        v.value_mut() = it->second;
    }
    if (values.size() != order_.size())
        throw FormatError("checkpoint has extra parameters not used by the model");
}

Linear::Linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
    w = ps.add_normal(prefix + ".w", in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    b = ps.add_zeros(prefix + ".b", 1, out);
}

Embedding::Embedding(ParamStore& ps, const std::string& prefix, int count, int dim, Rng& rng) {
    table = ps.add_normal(prefix + ".table", count, dim, 0.02, rng);
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& prefix, int dim) {
    gamma = ps.add_ones(prefix + ".gamma", 1, dim);
    beta = ps.add_zeros(prefix + ".beta", 1, dim);
}

Conv1d::Conv1d(ParamStore& ps, const std::string& prefix, int c_in, int c_out, int kernel_,
               int stride_, int pad_, Rng& rng)
    : kernel(kernel_), stride(stride_), pad(pad_) {
    double stddev = 1.0 / std::sqrt(static_cast<double>(kernel_ * c_in));
    w = ps.add_normal(prefix + ".w", kernel_ * c_in, c_out, stddev, rng);
    b = ps.add_zeros(prefix + ".b", 1, c_out);
}

std::pair<Var, Spans> Conv1d::operator()(const Var& x, const Spans& spans) const {
    Spans out_spans = conv_out_spans(spans, kernel, stride, pad);
    Var cols = unfold1d(x, spans, kernel, stride, pad);
    return {add_row_broadcast(matmul(cols, w), b), out_spans};
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& prefix, int dim, int heads_,
                                   int ffn_dim, Rng& rng)
    : heads(heads_) {
    ln1 = LayerNorm(ps, prefix + ".ln1", dim);
    ln2 = LayerNorm(ps, prefix + ".ln2", dim);
    wq = Linear(ps, prefix + ".wq", dim, dim, rng);
    wk = Linear(ps, prefix + ".wk", dim, dim, rng);
    wv = Linear(ps, prefix + ".wv", dim, dim, rng);
    wo = Linear(ps, prefix + ".wo", dim, dim, rng);
    ff1 = Linear(ps, prefix + ".ff1", dim, ffn_dim, rng);
    ff2 = Linear(ps, prefix + ".ff2", ffn_dim, dim, rng);
}

Var TransformerBlock::operator()(const Var& x, const Spans& spans) const {
    Var h = ln1(x);
    Var attn = wo(self_attention(wq(h), wk(h), wv(h), spans, heads));
    Var y = add(x, attn);
    Var f = ff2(relu(ff1(ln2(y))));
    return add(y, f);
}

Adam::Adam(ParamStore& store, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& name : store.names()) {
        Var p = store.get(name);
        params_.push_back(p);
        m_.push_back(Mat::Zero(p.value().rows(), p.value().cols()));
        v_.push_back(Mat::Zero(p.value().rows(), p.value().cols()));
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Mat& g = params_[i].grad();
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        params_[i].value_mut().array() -=
            lr_ * (m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + eps_);
    }
}

}  // namespace t2m::nn
