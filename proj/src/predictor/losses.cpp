#include "t2m/predictor/losses.hpp"

#include <cmath>
#include <numbers>

#include "t2m/core/errors.hpp"

namespace t2m::predictor {

double mask_ratio(double u) { return std::cos(std::numbers::pi * u / 2.0); }

int masked_after(int step, int tokens, int steps) {
    if (steps < 1) throw ArgumentError("masked_after: steps must be >= 1");
    double phase = std::numbers::pi * (step + 1) / (2.0 * steps);
    int m = static_cast<int>(std::floor(tokens * std::cos(phase)));
    return m < 0 ? 0 : m;
}

double kl_loss(const Mat& mu, const Mat& log_var) {
    if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols())
        throw ArgumentError("kl_loss: mu / log_var shape mismatch");
    double acc = 0.0;
    for (int i = 0; i < mu.rows(); ++i)
        for (int j = 0; j < mu.cols(); ++j) {
            double m = mu(i, j), lv = log_var(i, j);
            acc += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
        }
    return acc / static_cast<double>(mu.size());
}

Var kl_loss(const Var& mu, const Var& log_var) {
    Var term = nn::sub(nn::add(nn::hadamard(mu, mu), nn::expv(log_var)),
                       nn::add_const(log_var, Mat::Ones(log_var.value().rows(),
                                                        log_var.value().cols())));
    return nn::scale(nn::mean_all(term), 0.5);
}

double masked_nll(const Mat& log_probs, const std::vector<int>& targets,
                  const std::vector<bool>& masked, bool* warn) {
    if (static_cast<int>(targets.size()) != log_probs.rows() ||
        masked.size() != targets.size())
        throw ArgumentError("masked_nll: row count mismatch");
    if (warn) *warn = false;
    double acc = 0.0;
    long count = 0;
    for (int r = 0; r < log_probs.rows(); ++r) {
        if (!masked[static_cast<std::size_t>(r)]) continue;
        int t = targets[static_cast<std::size_t>(r)];
        if (t < 0 || t >= log_probs.cols()) throw ArgumentError("masked_nll: target out of range");
        acc -= log_probs(r, t);
        ++count;
    }
    if (count == 0) {
        if (warn) *warn = true;
        return 0.0;
    }
    return acc / static_cast<double>(count);
}

}  // namespace t2m::predictor
