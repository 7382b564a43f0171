#pragma once

#include <vector>

#include <Eigen/Dense>

#include "t2m/core/rng.hpp"

namespace t2m::evalsuite {

using Feature = Eigen::VectorXd;

struct RetrievalScores {
    double top1 = 0.0;
    double top2 = 0.0;
    double top3 = 0.0;
};

// For each motion, rank its caption among pool_size-1 mismatched captions by
// Euclidean feature distance. caption_class groups textually identical
// captions; only other classes are eligible mismatches. Distance ties count
// against the true caption.
RetrievalScores r_precision(const std::vector<Feature>& motion_features,
                            const std::vector<Feature>& caption_features,
                            const std::vector<int>& caption_class, int pool_size, Rng& rng);

// Frechet distance between Gaussian fits: |mu1-mu2|^2 + Tr(S1+S2-2(S1 S2)^1/2).
// Covariances use the n-1 divisor; matrix square roots go through symmetric
// eigendecomposition with small negative eigenvalues clamped to zero.
double fid(const std::vector<Feature>& real_features, const std::vector<Feature>& generated_features);

// Mean Euclidean distance over aligned (caption, generated motion) pairs.
double mm_dist(const std::vector<Feature>& caption_features,
               const std::vector<Feature>& motion_features);

// Per caption: a seeded shuffle picks 20 of exactly 30 generations, paired off
// disjointly (10 pairs); the metric is the mean pair distance over captions.
double multimodality(const std::vector<std::vector<Feature>>& per_caption_generations, Rng& rng);

}  // namespace t2m::evalsuite
