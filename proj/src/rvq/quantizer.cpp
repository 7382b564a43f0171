#include "t2m/rvq/quantizer.hpp"

#include <limits>

#include "t2m/core/errors.hpp"

namespace t2m::rvq {

std::pair<int, Eigen::RowVectorXd> quantize_nearest(const Eigen::RowVectorXd& z,
                                                    const Mat& codebook) {
    if (codebook.rows() < 1) throw ArgumentError("empty codebook");
    if (codebook.cols() != z.cols()) throw ArgumentError("code dimension mismatch");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < codebook.rows(); ++k) {
        double d = (codebook.row(k) - z).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return {best, codebook.row(best)};
}

ResidualQuantization residual_quantize(const Eigen::RowVectorXd& z, const LayeredCodebook& book) {
    ResidualQuantization out;
    Eigen::RowVectorXd r = z;
    for (const auto& layer : book.layers) {
        auto [idx, code] = quantize_nearest(r, layer.codes);
        out.indices.push_back(idx);
        out.quantized.push_back(code);
        r -= code;
    }
    return out;
}

CodeMatrix residual_quantize_rows(const Mat& latents, const LayeredCodebook& book,
                                  std::vector<Mat>* residual_inputs,
                                  std::vector<Mat>* quantized_residuals) {
    const int n = static_cast<int>(latents.rows());
    const int v_total = book.num_layers();
    CodeMatrix indices(n, v_total);
    if (residual_inputs) residual_inputs->assign(static_cast<std::size_t>(v_total),
                                                 Mat(n, latents.cols()));
    if (quantized_residuals)
        quantized_residuals->assign(static_cast<std::size_t>(v_total), Mat(n, latents.cols()));
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd r = latents.row(i);
        for (int v = 0; v < v_total; ++v) {
            if (residual_inputs) (*residual_inputs)[static_cast<std::size_t>(v)].row(i) = r;
            auto [idx, code] = quantize_nearest(r, book.layers[static_cast<std::size_t>(v)].codes);
            indices(i, v) = idx;
            if (quantized_residuals)
                (*quantized_residuals)[static_cast<std::size_t>(v)].row(i) = code;
            r -= code;
        }
    }
    return indices;
}

Mat dequantize(const CodeMatrix& indices, const LayeredCodebook& book) {
    if (indices.cols() != book.num_layers())
        throw ArgumentError("code sequence layer count disagrees with codebook");
    Mat out = Mat::Zero(indices.rows(), book.code_dim());
    for (int i = 0; i < indices.rows(); ++i)
        for (int v = 0; v < indices.cols(); ++v) {
            int k = indices(i, v);
            const auto& layer = book.layers[static_cast<std::size_t>(v)];
            if (k < 0 || k >= layer.size())
                throw ArgumentError("code index out of range: " + std::to_string(k));
            out.row(i) += layer.codes.row(k);
        }
    return out;
}

void ema_update(Codebook& layer, const Mat& vectors, const std::vector<int>& assignments,
                double decay) {
    if (static_cast<int>(assignments.size()) != vectors.rows())
        throw ArgumentError("assignment count disagrees with vector count");
    const int k_total = layer.size();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k_total);
    Mat sums = Mat::Zero(k_total, vectors.cols());
    for (int i = 0; i < vectors.rows(); ++i) {
        int k = assignments[static_cast<std::size_t>(i)];
        if (k < 0 || k >= k_total) throw ArgumentError("assignment index out of range");
        counts(k) += 1.0;
        sums.row(k) += vectors.row(i);
    }
    const int first = layer.zero_pinned ? 1 : 0;
    for (int k = first; k < k_total; ++k) {
        layer.ema_size(k) = decay * layer.ema_size(k) + (1.0 - decay) * counts(k);
        layer.ema_sum.row(k) = decay * layer.ema_sum.row(k) + (1.0 - decay) * sums.row(k);
        layer.codes.row(k) = layer.ema_sum.row(k) / (layer.ema_size(k) + 1e-5);
    }
}

void codebook_reset(Codebook& layer, const Mat& batch_vectors, double threshold, int window,
                    Rng& rng) {
    if (batch_vectors.rows() < 1) throw ArgumentError("empty batch for codebook reset");
    const int first = layer.zero_pinned ? 1 : 0;
    for (int k = first; k < layer.size(); ++k) {
        if (layer.ema_size(k) < threshold) {
            if (++layer.dead_steps[static_cast<std::size_t>(k)] >= window) {
                int pick = rng.below_int(static_cast<int>(batch_vectors.rows()));
                layer.codes.row(k) = batch_vectors.row(pick);
                layer.ema_size(k) = 1.0;
                layer.ema_sum.row(k) = batch_vectors.row(pick);
                layer.dead_steps[static_cast<std::size_t>(k)] = 0;
            }
        } else {
            layer.dead_steps[static_cast<std::size_t>(k)] = 0;
        }
    }
}

Mat kmeanspp_init(const Mat& vectors, int k, Rng& rng) {
    const int n = static_cast<int>(vectors.rows());
    if (n < 1) throw ArgumentError("k-means++ needs at least one vector");
    Mat centers(k, vectors.cols());
    centers.row(0) = vectors.row(rng.below_int(n));
    Eigen::VectorXd d2(n);
    for (int i = 0; i < n; ++i) d2(i) = (vectors.row(i) - centers.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
        double total = d2.sum();
        int pick;
        if (total <= 0.0) {
            pick = rng.below_int(n);
        } else {
            double u = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                acc += d2(i);
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centers.row(c) = vectors.row(pick);
        for (int i = 0; i < n; ++i)
            d2(i) = std::min(d2(i), (vectors.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

double rvq_loss(const Mat& motion, const Mat& recon, const std::vector<Mat>& residuals,
                const std::vector<Mat>& quantized, double beta) {
    if (motion.rows() != recon.rows() || motion.cols() != recon.cols())
        throw ArgumentError("rvq_loss: motion and reconstruction shapes differ");
    if (motion.size() == 0) throw ArgumentError("rvq_loss: empty motion");
    if (residuals.size() != quantized.size())
        throw ArgumentError("rvq_loss: residual and quantized layer counts differ");
    double loss = (motion - recon).cwiseAbs().mean();
    for (std::size_t v = 0; v < residuals.size(); ++v) {
        if (residuals[v].rows() != quantized[v].rows() ||
            residuals[v].cols() != quantized[v].cols())
            throw ArgumentError("rvq_loss: residual shape mismatch at layer " + std::to_string(v));
        loss += beta * (residuals[v] - quantized[v]).squaredNorm() /
                static_cast<double>(residuals[v].size());
    }
    return loss;
}

Codebook make_codebook(const Mat& codes, bool zero_pinned) {
    Codebook cb;
    cb.codes = codes;
    cb.zero_pinned = zero_pinned;
    if (zero_pinned) cb.codes.row(0).setZero();
    cb.ema_size = Eigen::VectorXd::Ones(codes.rows());
    cb.ema_sum = cb.codes;
    cb.dead_steps.assign(static_cast<std::size_t>(codes.rows()), 0);
    return cb;
}

}  // namespace t2m::rvq
