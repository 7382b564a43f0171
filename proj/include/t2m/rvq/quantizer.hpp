#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "t2m/core/rng.hpp"

namespace t2m::rvq {

using Mat = Eigen::MatrixXd;
using CodeMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct RvqConfig {
    int codebook_size = 64;  // K
    int code_dim = 32;       // d_c
    int downsample = 4;      // l, total encoder stride; power of two
    int num_layers = 3;      // quantizer layers: one base + (num_layers-1) residual
    double beta = 1.0;       // commitment weight
    double ema_decay = 0.99;
    double reset_threshold = 1.0;  // EMA cluster size below this counts as dead
    int reset_window = 200;        // consecutive dead steps before replacement
    int channels = 64;  // codec width
    // Cosine lr decay: the L1 term has constant-magnitude gradients, so the
    // achievable loss floors at a level proportional to the step size.
    double lr = 1e-3;
    double lr_min = 1e-5;
    int batch_size = 64;
    int epochs = 150;
    // Quantizer-free reconstruction epochs before the codebooks are seeded.
    // Seeding k-means++ on untrained latents deadlocks: codes that miss a
    // latent factor snap it away, the decoder never sees it, and the
    // straight-through gradient never asks the encoder to keep it.
    int warmup_epochs = 30;
    std::uint64_t seed = 0;
};

// One quantizer layer. Residual layers (v >= 1) pin code 0 to the zero
// vector and exclude it from EMA and reset; a zero candidate at every step
// makes prefix reconstruction error provably non-increasing in depth.
struct Codebook {
    Mat codes;                 // K x d_c
    Eigen::VectorXd ema_size;  // N_k
    Mat ema_sum;               // m_k
    std::vector<int> dead_steps;
    bool zero_pinned = false;

    int size() const { return static_cast<int>(codes.rows()); }
};

struct LayeredCodebook {
    std::vector<Codebook> layers;

    int num_layers() const { return static_cast<int>(layers.size()); }
    int codebook_size() const { return layers.empty() ? 0 : layers[0].size(); }
    int code_dim() const { return layers.empty() ? 0 : static_cast<int>(layers[0].codes.cols()); }
};

// Nearest code by Euclidean distance; ties resolved to the smallest index.
std::pair<int, Eigen::RowVectorXd> quantize_nearest(const Eigen::RowVectorXd& z,
                                                    const Mat& codebook);

struct ResidualQuantization {
    std::vector<int> indices;            // per layer
    std::vector<Eigen::RowVectorXd> quantized;  // r_hat per layer
};

// r^0 = z; per layer v: pick nearest code, subtract; reconstruction is the
// prefix sum of quantized residuals.
ResidualQuantization residual_quantize(const Eigen::RowVectorXd& z, const LayeredCodebook& book);

// Batch variants over row-major latent matrices.
CodeMatrix residual_quantize_rows(const Mat& latents, const LayeredCodebook& book,
                                  std::vector<Mat>* residual_inputs = nullptr,
                                  std::vector<Mat>* quantized_residuals = nullptr);
Mat dequantize(const CodeMatrix& indices, const LayeredCodebook& book);

// N_k <- decay*N_k + (1-decay)*count_k; m_k <- decay*m_k + (1-decay)*sum_k;
// c_k <- m_k / (N_k + 1e-5). Pinned code 0 is untouched.
void ema_update(Codebook& layer, const Mat& vectors, const std::vector<int>& assignments,
                double decay);

// Replaces codes whose EMA size stayed under threshold for `window` steps
// with a random row of `batch_vectors`; resets their EMA state.
void codebook_reset(Codebook& layer, const Mat& batch_vectors, double threshold, int window,
                    Rng& rng);

// Stage-1 objective: mean |M - M_hat| plus beta times the summed per-layer
// mean squared commitment ||R^v - sg[R_hat^v]||^2. Pure scalar form; the
// training loop rebuilds the same expression on the autodiff graph.
double rvq_loss(const Mat& motion, const Mat& recon, const std::vector<Mat>& residuals,
                const std::vector<Mat>& quantized, double beta);

// k-means++ seeding over batch rows (D^2 weighting, greedy assignment).
Mat kmeanspp_init(const Mat& vectors, int k, Rng& rng);

Codebook make_codebook(const Mat& codes, bool zero_pinned);

}  // namespace t2m::rvq
