#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace t2m::nn {

using Mat = Eigen::MatrixXd;

// Row range of one sample inside a stacked (sum-of-lengths x channels) matrix.
// Sequences of different lengths share one matrix; ops that mix information
// across time take the span list and stay within each sample's block.
struct Span {
    int offset = 0;
    int len = 0;
};
using Spans = std::vector<Span>;

inline int total_rows(const Spans& spans) {
    int n = 0;
    for (const auto& s : spans) n += s.len;
    return n;
}

// Reverse-mode autodiff over dense double matrices. Graphs are built per
// forward call and freed when the last Var handle drops; parameters are
// long-lived leaf nodes registered in a ParamStore.
class Node {
  public:
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.rows() != value.rows() || grad.cols() != value.cols())
            grad = Mat::Zero(value.rows(), value.cols());
    }
};

using NodePtr = std::shared_ptr<Node>;

class Var {
  public:
    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    static Var leaf(Mat value, bool requires_grad);
    static Var constant(Mat value) { return leaf(std::move(value), false); }

    bool valid() const { return n_ != nullptr; }
    const Mat& value() const { return n_->value; }
    Mat& value_mut() { return n_->value; }
    const Mat& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    void zero_grad() {
        if (n_) n_->grad = Mat::Zero(n_->value.rows(), n_->value.cols());
    }

    double scalar() const { return n_->value(0, 0); }

    // Seeds d(out)/d(out) = 1 and runs the tape. Requires a 1x1 value.
    void backward() const;

    NodePtr node() const { return n_; }

  private:
    NodePtr n_;
};

// Elementwise and linear algebra
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_const(const Var& a, const Mat& c);  // value shifts, gradient passes through
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var transpose(const Var& a);
Var add_row_broadcast(const Var& x, const Var& row);
Var relu(const Var& a);
Var expv(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Row/sequence structure
Var slice_rows(const Var& a, int offset, int len);
Var concat_rows(const std::vector<Var>& parts);
Var embedding_lookup(const Var& table, const std::vector<int>& indices);
Var mean_pool_rows(const Var& x, const Spans& spans);
Var upsample_rows(const Var& x, int factor, const Spans& spans);
Var unfold1d(const Var& x, const Spans& spans, int kernel, int stride, int pad);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var log_softmax_rows(const Var& x);
Var l2_normalize_rows(const Var& x, double eps = 1e-12);
Var self_attention(const Var& q, const Var& k, const Var& v, const Spans& spans, int n_heads);

// Reductions / losses (all return 1x1)
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var mse_const(const Var& a, const Mat& target);
Var l1_const(const Var& a, const Mat& target);
// Negative log likelihood over selected rows of log-probabilities.
// targets[r] < 0 skips row r; result = sum(-logp[r, t_r]) / norm.
Var nll_rows(const Var& logp, const std::vector<int>& targets, double norm);

Spans conv_out_spans(const Spans& in, int kernel, int stride, int pad);

}  // namespace t2m::nn
