#pragma once

#include <vector>

#include "t2m/nn/autodiff.hpp"

namespace t2m::predictor {

using nn::Mat;
using nn::Var;

// Training-time mask ratio cos(pi*u/2) for u ~ U[0,1): heavy masking is the
// common case, light masking the rare one.
double mask_ratio(double u);

// Count of positions still masked after confidence step s of `steps`:
// floor(tokens * cos(pi*(s+1) / (2*steps))). Reaches 0 at the final step.
int masked_after(int step, int tokens, int steps);

// KL(N(mu, sigma^2) || N(0, 1)) averaged over all dimensions.
double kl_loss(const Mat& mu, const Mat& log_var);
Var kl_loss(const Var& mu, const Var& log_var);

// Mean NLL of targets over masked rows only; unmasked rows contribute exactly
// zero. No masked rows -> returns 0 and sets *warn when provided.
double masked_nll(const Mat& log_probs, const std::vector<int>& targets,
                  const std::vector<bool>& masked, bool* warn = nullptr);

}  // namespace t2m::predictor
