#include "t2m/evalsuite/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "t2m/core/errors.hpp"

namespace t2m::evalsuite {

namespace {

void check_features(const std::vector<Feature>& feats, const char* what) {
    if (feats.empty()) throw ArgumentError(std::string(what) + ": empty feature list");
    const auto dim = feats.front().size();
    for (const auto& f : feats) {
        if (f.size() != dim) throw ArgumentError(std::string(what) + ": feature dim mismatch");
        if (!f.allFinite()) throw ArgumentError(std::string(what) + ": non-finite feature");
    }
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

RetrievalScores r_precision(const std::vector<Feature>& motion_features,
                            const std::vector<Feature>& caption_features,
                            const std::vector<int>& caption_class, int pool_size, Rng& rng) {
    if (motion_features.size() != caption_features.size() ||
        caption_features.size() != caption_class.size())
        throw ArgumentError("r_precision: aligned lists required");
    if (pool_size < 2) throw ArgumentError("r_precision: pool_size must be >= 2");
    check_features(motion_features, "r_precision");
    check_features(caption_features, "r_precision");

    const int n = static_cast<int>(motion_features.size());
    RetrievalScores scores;
    for (int i = 0; i < n; ++i) {
        std::vector<int> candidates;
        for (int j = 0; j < n; ++j)
            if (caption_class[static_cast<std::size_t>(j)] != caption_class[static_cast<std::size_t>(i)])
                candidates.push_back(j);
        if (static_cast<int>(candidates.size()) < pool_size - 1)
            throw ArgumentError("r_precision: fewer than pool_size distinct captions");
        rng.shuffle(candidates);
        double d_true = (motion_features[static_cast<std::size_t>(i)] -
                         caption_features[static_cast<std::size_t>(i)]).norm();
        int beaten = 0;
        for (int k = 0; k < pool_size - 1; ++k) {
            double d = (motion_features[static_cast<std::size_t>(i)] -
                        caption_features[static_cast<std::size_t>(candidates[static_cast<std::size_t>(k)])]).norm();
            if (d <= d_true) ++beaten;
        }
        int rank = beaten + 1;
        if (rank <= 1) scores.top1 += 1.0;
        if (rank <= 2) scores.top2 += 1.0;
        if (rank <= 3) scores.top3 += 1.0;
    }
    scores.top1 /= n;
    scores.top2 /= n;
    scores.top3 /= n;
    return scores;
}

double fid(const std::vector<Feature>& real_features,
           const std::vector<Feature>& generated_features) {
    check_features(real_features, "fid");
    check_features(generated_features, "fid");
    if (real_features.size() < 2 || generated_features.size() < 2)
        throw ArgumentError("fid: at least two samples per side required");
    if (real_features.front().size() != generated_features.front().size())
        throw ArgumentError("fid: feature dim mismatch");

    const auto moments = [](const std::vector<Feature>& feats) {
        const int n = static_cast<int>(feats.size());
        const int d = static_cast<int>(feats.front().size());
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
        for (const auto& f : feats) mu += f;
        mu /= n;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        for (const auto& f : feats) {
            Eigen::VectorXd c = f - mu;
            cov += c * c.transpose();
        }
        cov /= n - 1;
        return std::make_pair(mu, cov);
    };
    auto [mu1, s1] = moments(real_features);
    auto [mu2, s2] = moments(generated_features);

    Eigen::MatrixXd a = sqrt_psd(s1);
    Eigen::MatrixXd cross = sqrt_psd(a * s2 * a);
    return (mu1 - mu2).squaredNorm() + (s1 + s2).trace() - 2.0 * cross.trace();
}

double mm_dist(const std::vector<Feature>& caption_features,
               const std::vector<Feature>& motion_features) {
    if (caption_features.size() != motion_features.size())
        throw ArgumentError("mm_dist: aligned lists required");
    check_features(caption_features, "mm_dist");
    check_features(motion_features, "mm_dist");
    double acc = 0.0;
    for (std::size_t i = 0; i < caption_features.size(); ++i)
        acc += (caption_features[i] - motion_features[i]).norm();
    return acc / static_cast<double>(caption_features.size());
}

double multimodality(const std::vector<std::vector<Feature>>& per_caption_generations,
                     Rng& rng) {
    if (per_caption_generations.empty())
        throw ArgumentError("multimodality: at least one caption required");
    double acc = 0.0;
    for (const auto& gens : per_caption_generations) {
        if (gens.size() != 30)
            throw ArgumentError("multimodality: exactly 30 generations per caption required");
        check_features(gens, "multimodality");
        std::vector<int> idx(30);
        for (int i = 0; i < 30; ++i) idx[static_cast<std::size_t>(i)] = i;
        rng.shuffle(idx);
        double pair_acc = 0.0;
        for (int p = 0; p < 10; ++p) {
            const Feature& a = gens[static_cast<std::size_t>(idx[static_cast<std::size_t>(2 * p)])];
            const Feature& b = gens[static_cast<std::size_t>(idx[static_cast<std::size_t>(2 * p + 1)])];
            pair_acc += (a - b).norm();
        }
        acc += pair_acc / 10.0;
    }
    return acc / static_cast<double>(per_caption_generations.size());
}

}  // namespace t2m::evalsuite
