#include "t2m/nn/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "t2m/core/errors.hpp"

namespace t2m::nn {

Var Var::leaf(Mat value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return Var(n);
}

namespace {

NodePtr make_node(Mat value, std::vector<NodePtr> parents, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return n;
}

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ArgumentError(std::string(op) + ": shape mismatch");
}

}  // namespace

void Var::backward() const {
    if (!n_) throw ArgumentError("backward on empty Var");
    if (n_->value.rows() != 1 || n_->value.cols() != 1)
        throw ArgumentError("backward requires a scalar output");

    // Iterative post-order topological sort.
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    visited.insert(n_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* node : topo) node->ensure_grad();
    n_->grad(0, 0) = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) node->backward_fn(*node);
    }
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    return Var(make_node(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
        for (int i = 0; i < 2; ++i) {
            auto& p = self.parents[i];
            if (p->requires_grad) {
                p->ensure_grad();
                p->grad += self.grad;
            }
        }
    }));
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    return Var(make_node(a.value() - b.value(), {a.node(), b.node()}, [](Node& self) {
        if (self.parents[0]->requires_grad) {
            self.parents[0]->ensure_grad();
            self.parents[0]->grad += self.grad;
        }
        if (self.parents[1]->requires_grad) {
            self.parents[1]->ensure_grad();
            self.parents[1]->grad -= self.grad;
        }
    }));
}

Var hadamard(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "hadamard");
    return Var(make_node(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad += self.grad.cwiseProduct(pb->value);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad += self.grad.cwiseProduct(pa->value);
        }
    }));
}

Var scale(const Var& a, double s) {
    return Var(make_node(a.value() * s, {a.node()}, [s](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad += self.grad * s;
    }));
}

Var add_const(const Var& a, const Mat& c) {
    check_same_shape(a.value(), c, "add_const");
    return Var(make_node(a.value() + c, {a.node()}, [](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad += self.grad;
    }));
}

Var matmul(const Var& a, const Var& b) {
    if (a.value().cols() != b.value().rows()) throw ArgumentError("matmul: inner dims differ");
    return Var(make_node(a.value() * b.value(), {a.node(), b.node()}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad.noalias() += self.grad * pb->value.transpose();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad.noalias() += pa->value.transpose() * self.grad;
        }
    }));
}

Var matmul_nt(const Var& a, const Var& b) {
    if (a.value().cols() != b.value().cols()) throw ArgumentError("matmul_nt: inner dims differ");
    return Var(make_node(a.value() * b.value().transpose(), {a.node(), b.node()}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad.noalias() += self.grad * pb->value;
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad.noalias() += self.grad.transpose() * pa->value;
        }
    }));
}

Var transpose(const Var& a) {
    return Var(make_node(a.value().transpose(), {a.node()}, [](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad += self.grad.transpose();
    }));
}

Var add_row_broadcast(const Var& x, const Var& row) {
    if (row.value().rows() != 1 || row.value().cols() != x.value().cols())
        throw ArgumentError("add_row_broadcast: row shape");
    Mat v = x.value();
    v.rowwise() += row.value().row(0);
    return Var(make_node(std::move(v), {x.node(), row.node()}, [](Node& self) {
        auto& px = self.parents[0];
        auto& pr = self.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            px->grad += self.grad;
        }
        if (pr->requires_grad) {
            pr->ensure_grad();
            pr->grad.row(0) += self.grad.colwise().sum();
        }
    }));
}

Var relu(const Var& a) {
    return Var(make_node(a.value().cwiseMax(0.0), {a.node()}, [](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad += self.grad.cwiseProduct((p->value.array() > 0.0).cast<double>().matrix());
    }));
}

Var expv(const Var& a) {
    return Var(make_node(a.value().array().exp().matrix(), {a.node()}, [](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad += self.grad.cwiseProduct(self.value);
    }));
}

Var clamp(const Var& a, double lo, double hi) {
    return Var(make_node(a.value().cwiseMax(lo).cwiseMin(hi), {a.node()}, [lo, hi](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        Mat pass = ((p->value.array() >= lo) && (p->value.array() <= hi)).cast<double>().matrix();
        p->grad += self.grad.cwiseProduct(pass);
    }));
}

Var slice_rows(const Var& a, int offset, int len) {
    if (offset < 0 || len < 0 || offset + len > a.value().rows())
        throw ArgumentError("slice_rows: range out of bounds");
    return Var(make_node(a.value().middleRows(offset, len), {a.node()}, [offset, len](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad.middleRows(offset, len) += self.grad;
    }));
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ArgumentError("concat_rows: empty");
    int rows = 0;
    const int cols = static_cast<int>(parts[0].value().cols());
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        if (p.value().cols() != cols) throw ArgumentError("concat_rows: column mismatch");
        rows += static_cast<int>(p.value().rows());
        parents.push_back(p.node());
    }
    Mat v(rows, cols);
    int at = 0;
    for (const auto& p : parts) {
        v.middleRows(at, p.value().rows()) = p.value();
        at += static_cast<int>(p.value().rows());
    }
    return Var(make_node(std::move(v), std::move(parents), [](Node& self) {
        int at = 0;
        for (auto& p : self.parents) {
            int len = static_cast<int>(p->value.rows());
            if (p->requires_grad) {
                p->ensure_grad();
                p->grad += self.grad.middleRows(at, len);
            }
            at += len;
        }
    }));
}

Var embedding_lookup(const Var& table, const std::vector<int>& indices) {
    const Mat& t = table.value();
    Mat v(static_cast<int>(indices.size()), t.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] < 0 || indices[r] >= t.rows()) throw ArgumentError("embedding_lookup: index out of range");
        v.row(static_cast<int>(r)) = t.row(indices[r]);
    }
    return Var(make_node(std::move(v), {table.node()}, [indices](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t r = 0; r < indices.size(); ++r)
            p->grad.row(indices[r]) += self.grad.row(static_cast<int>(r));
    }));
}

Var mean_pool_rows(const Var& x, const Spans& spans) {
    Mat v(static_cast<int>(spans.size()), x.value().cols());
    for (std::size_t b = 0; b < spans.size(); ++b) {
        if (spans[b].len <= 0) throw ArgumentError("mean_pool_rows: empty span");
        v.row(static_cast<int>(b)) = x.value().middleRows(spans[b].offset, spans[b].len).colwise().mean();
    }
    return Var(make_node(std::move(v), {x.node()}, [spans](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t b = 0; b < spans.size(); ++b) {
            double inv = 1.0 / spans[b].len;
            for (int r = 0; r < spans[b].len; ++r)
                p->grad.row(spans[b].offset + r) += self.grad.row(static_cast<int>(b)) * inv;
        }
    }));
}

Var upsample_rows(const Var& x, int factor, const Spans& spans) {
    if (factor < 1) throw ArgumentError("upsample_rows: factor < 1");
    Mat v(total_rows(spans) * factor, x.value().cols());
    int at = 0;
    for (const auto& s : spans) {
        for (int r = 0; r < s.len; ++r)
            for (int f = 0; f < factor; ++f) v.row(at + r * factor + f) = x.value().row(s.offset + r);
        at += s.len * factor;
    }
    return Var(make_node(std::move(v), {x.node()}, [factor, spans](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        int at = 0;
        for (const auto& s : spans) {
            for (int r = 0; r < s.len; ++r)
                for (int f = 0; f < factor; ++f)
                    p->grad.row(s.offset + r) += self.grad.row(at + r * factor + f);
            at += s.len * factor;
        }
    }));
}

Spans conv_out_spans(const Spans& in, int kernel, int stride, int pad) {
    Spans out;
    int at = 0;
    for (const auto& s : in) {
        int n = (s.len + 2 * pad - kernel) / stride + 1;
        if (n < 1) throw ArgumentError("conv_out_spans: sequence shorter than kernel");
        out.push_back({at, n});
        at += n;
    }
    return out;
}

Var unfold1d(const Var& x, const Spans& spans, int kernel, int stride, int pad) {
    const int c = static_cast<int>(x.value().cols());
    Spans out = conv_out_spans(spans, kernel, stride, pad);
    Mat v = Mat::Zero(total_rows(out), kernel * c);
    for (std::size_t b = 0; b < spans.size(); ++b) {
        for (int i = 0; i < out[b].len; ++i) {
            for (int t = 0; t < kernel; ++t) {
                int src = i * stride - pad + t;
                if (src >= 0 && src < spans[b].len)
                    v.block(out[b].offset + i, t * c, 1, c) = x.value().row(spans[b].offset + src);
            }
        }
    }
    return Var(make_node(std::move(v), {x.node()}, [spans, out, kernel, stride, pad, c](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t b = 0; b < spans.size(); ++b) {
            for (int i = 0; i < out[b].len; ++i) {
                for (int t = 0; t < kernel; ++t) {
                    int src = i * stride - pad + t;
                    if (src >= 0 && src < spans[b].len)
                        p->grad.row(spans[b].offset + src) += self.grad.block(out[b].offset + i, t * c, 1, c);
                }
            }
        }
    }));
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Mat& xv = x.value();
    const int cols = static_cast<int>(xv.cols());
    Mat xhat(xv.rows(), cols);
    Eigen::VectorXd inv_std(xv.rows());
    for (int r = 0; r < xv.rows(); ++r) {
        double mu = xv.row(r).mean();
        double var = (xv.row(r).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + eps);
        inv_std(r) = is;
        xhat.row(r) = (xv.row(r).array() - mu) * is;
    }
    Mat v = xhat;
    v.array().rowwise() *= gamma.value().row(0).array();
    v.rowwise() += beta.value().row(0);
    return Var(make_node(std::move(v), {x.node(), gamma.node(), beta.node()},
                         [xhat = std::move(xhat), inv_std = std::move(inv_std), cols](Node& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        if (pg->requires_grad) {
            pg->ensure_grad();
            pg->grad.row(0) += self.grad.cwiseProduct(xhat).colwise().sum();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad.row(0) += self.grad.colwise().sum();
        }
        if (px->requires_grad) {
            px->ensure_grad();
            for (int r = 0; r < self.grad.rows(); ++r) {
                Eigen::RowVectorXd dxhat = self.grad.row(r).cwiseProduct(pg->value.row(0));
                double m1 = dxhat.mean();
                double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
                px->grad.row(r) +=
                    inv_std(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
            }
        }
    }));
}

Var log_softmax_rows(const Var& x) {
    const Mat& xv = x.value();
    Mat v(xv.rows(), xv.cols());
    for (int r = 0; r < xv.rows(); ++r) {
        double mx = xv.row(r).maxCoeff();
        double lse = mx + std::log((xv.row(r).array() - mx).exp().sum());
        v.row(r) = xv.row(r).array() - lse;
    }
    return Var(make_node(std::move(v), {x.node()}, [](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (int r = 0; r < self.grad.rows(); ++r) {
            double gsum = self.grad.row(r).sum();
            p->grad.row(r) += self.grad.row(r) - gsum * self.value.row(r).array().exp().matrix();
        }
    }));
}

Var l2_normalize_rows(const Var& x, double eps) {
    const Mat& xv = x.value();
    Eigen::VectorXd norms(xv.rows());
    Mat v(xv.rows(), xv.cols());
    for (int r = 0; r < xv.rows(); ++r) {
        double n = std::sqrt(xv.row(r).squaredNorm() + eps);
        norms(r) = n;
        v.row(r) = xv.row(r) / n;
    }
    return Var(make_node(std::move(v), {x.node()}, [norms = std::move(norms)](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (int r = 0; r < self.grad.rows(); ++r) {
            double dot = self.grad.row(r).dot(p->value.row(r));
            double n = norms(r);
            p->grad.row(r) += self.grad.row(r) / n - p->value.row(r) * (dot / (n * n * n));
        }
    }));
}

Var self_attention(const Var& q, const Var& k, const Var& v, const Spans& spans, int n_heads) {
    const int dm = static_cast<int>(q.value().cols());
    if (dm % n_heads != 0) throw ArgumentError("self_attention: dims not divisible by heads");
    if (k.value().cols() != dm || v.value().cols() != dm) throw ArgumentError("self_attention: dim mismatch");
    const int dh = dm / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat out = Mat::Zero(q.value().rows(), dm);
    // Softmax matrices saved per (sample, head) for the backward pass.
    auto probs = std::make_shared<std::vector<Mat>>();
    probs->reserve(spans.size() * n_heads);
    for (const auto& s : spans) {
        for (int h = 0; h < n_heads; ++h) {
            auto qb = q.value().block(s.offset, h * dh, s.len, dh);
            auto kb = k.value().block(s.offset, h * dh, s.len, dh);
            auto vb = v.value().block(s.offset, h * dh, s.len, dh);
            Mat scores = qb * kb.transpose() * inv_sqrt;
            for (int r = 0; r < scores.rows(); ++r) {
                double mx = scores.row(r).maxCoeff();
                Eigen::RowVectorXd e = (scores.row(r).array() - mx).exp();
                scores.row(r) = e / e.sum();
            }
            out.block(s.offset, h * dh, s.len, dh) = scores * vb;
            probs->push_back(std::move(scores));
        }
    }
    return Var(make_node(std::move(out), {q.node(), k.node(), v.node()},
                         [spans, n_heads, dh, inv_sqrt, probs](Node& self) {
        auto& pq = self.parents[0];
        auto& pk = self.parents[1];
        auto& pv = self.parents[2];
        pq->ensure_grad();
        pk->ensure_grad();
        pv->ensure_grad();
        std::size_t pi = 0;
        for (const auto& s : spans) {
            for (int h = 0; h < n_heads; ++h, ++pi) {
                const Mat& p = (*probs)[pi];
                auto qb = pq->value.block(s.offset, h * dh, s.len, dh);
                auto kb = pk->value.block(s.offset, h * dh, s.len, dh);
                auto vb = pv->value.block(s.offset, h * dh, s.len, dh);
                auto g = self.grad.block(s.offset, h * dh, s.len, dh);
                Mat dp = g * vb.transpose();
                pv->grad.block(s.offset, h * dh, s.len, dh) += p.transpose() * g;
                Mat ds(p.rows(), p.cols());
                for (int r = 0; r < p.rows(); ++r) {
                    double rowdot = dp.row(r).dot(p.row(r));
                    ds.row(r) = (p.row(r).array() * (dp.row(r).array() - rowdot)).matrix();
                }
                pq->grad.block(s.offset, h * dh, s.len, dh) += ds * kb * inv_sqrt;
                pk->grad.block(s.offset, h * dh, s.len, dh) += ds.transpose() * qb * inv_sqrt;
            }
        }
    }));
}

Var sum_all(const Var& a) {
    Mat v(1, 1);
    v(0, 0) = a.value().sum();
    return Var(make_node(std::move(v), {a.node()}, [](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad.array() += self.grad(0, 0);
    }));
}

Var mean_all(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a.value().size());
    Mat v(1, 1);
    v(0, 0) = a.value().sum() * inv;
    return Var(make_node(std::move(v), {a.node()}, [inv](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad.array() += self.grad(0, 0) * inv;
    }));
}

Var mse_const(const Var& a, const Mat& target) {
    check_same_shape(a.value(), target, "mse_const");
    const double inv = 1.0 / static_cast<double>(a.value().size());
    Mat diff = a.value() - target;
    Mat v(1, 1);
    v(0, 0) = diff.squaredNorm() * inv;
    return Var(make_node(std::move(v), {a.node()}, [diff = std::move(diff), inv](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad += self.grad(0, 0) * 2.0 * inv * diff;
    }));
}

Var l1_const(const Var& a, const Mat& target) {
    check_same_shape(a.value(), target, "l1_const");
    const double inv = 1.0 / static_cast<double>(a.value().size());
    Mat diff = a.value() - target;
    Mat v(1, 1);
    v(0, 0) = diff.array().abs().sum() * inv;
    return Var(make_node(std::move(v), {a.node()}, [diff = std::move(diff), inv](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        p->grad += self.grad(0, 0) * inv * diff.array().sign().matrix();
    }));
}

Var nll_rows(const Var& logp, const std::vector<int>& targets, double norm) {
    if (static_cast<int>(targets.size()) != logp.value().rows())
        throw ArgumentError("nll_rows: target count mismatch");
    if (norm <= 0.0) throw ArgumentError("nll_rows: norm must be positive");
    double acc = 0.0;
    for (std::size_t r = 0; r < targets.size(); ++r) {
        if (targets[r] < 0) continue;
        if (targets[r] >= logp.value().cols()) throw ArgumentError("nll_rows: target out of range");
        acc -= logp.value()(static_cast<int>(r), targets[r]);
    }
    Mat v(1, 1);
    v(0, 0) = acc / norm;
    return Var(make_node(std::move(v), {logp.node()}, [targets, norm](Node& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        const double g = self.grad(0, 0) / norm;
        for (std::size_t r = 0; r < targets.size(); ++r)
            if (targets[r] >= 0) p->grad(static_cast<int>(r), targets[r]) -= g;
    }));
}

}  // namespace t2m::nn
