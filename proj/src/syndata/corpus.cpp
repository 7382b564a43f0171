#include "t2m/syndata/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"
#include "t2m/core/rng.hpp"
#include "t2m/syndata/caption.hpp"
#include "t2m/syndata/render.hpp"

namespace t2m::syndata {

void length_band(const CorpusSpec& spec, Speed speed, int& lo, int& hi) {
    const int span = spec.t_max - spec.t_min;
    const int third = span / 3;
    switch (speed) {
        case Speed::fast:
            lo = spec.t_min;
            hi = spec.t_min + third;
            break;
        case Speed::normal:
            lo = spec.t_min + third + 1;
            hi = spec.t_min + 2 * third;
            break;
        case Speed::slow:
            lo = spec.t_min + 2 * third + 1;
            hi = spec.t_max;
            break;
    }
    lo = std::min(std::max(lo, spec.t_min), spec.t_max);
    hi = std::min(std::max(hi, lo), spec.t_max);
}

Dataset generate_corpus(const CorpusSpec& spec) {
    if (spec.n_samples < 1) throw ArgumentError("n_samples must be >= 1");
    if (spec.t_min < 1 || spec.t_min > spec.t_max) throw ArgumentError("bad length range");
    if (spec.described_prob < 0.0 || spec.described_prob > 1.0)
        throw ArgumentError("described_prob must be in [0, 1]");
    if (spec.holdout_fraction < 0.0 || spec.holdout_fraction >= 1.0)
        throw ArgumentError("holdout_fraction must be in [0, 1)");
    if (spec.feature_dim < 16) throw ArgumentError("feature_dim must be at least 16");

    Dataset ds;
    ds.spec = spec;
    ds.samples.reserve(static_cast<std::size_t>(spec.n_samples));
    for (int i = 0; i < spec.n_samples; ++i) {
        Rng rng(derive_seed(spec.seed, "sample", static_cast<std::uint64_t>(i)));
        Sample s;
        s.attrs.gait = static_cast<Gait>(rng.below_int(kGaitCount));
        s.attrs.direction = static_cast<Direction>(rng.below_int(kDirectionCount));
        s.attrs.speed = static_cast<Speed>(rng.below_int(kSpeedCount));
        s.attrs.posture = static_cast<Posture>(rng.below_int(kPostureCount));
        s.attrs.free_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        s.attrs.free_amplitude = rng.uniform(0.5, 1.5);

        DescribedMask mask;
        mask.gait = rng.uniform() < spec.described_prob;
        mask.direction = rng.uniform() < spec.described_prob;
        mask.speed = rng.uniform() < spec.described_prob;
        mask.posture = rng.uniform() < spec.described_prob;

        int lo, hi;
        length_band(spec, s.attrs.speed, lo, hi);
        int length = lo + rng.below_int(hi - lo + 1);

        s.caption = caption_of(s.attrs, mask,
                               derive_seed(spec.seed, "caption", static_cast<std::uint64_t>(i)));
        s.motion = render_motion(s.attrs, length, spec,
                                 derive_seed(spec.seed, "motion", static_cast<std::uint64_t>(i)));
        ds.samples.push_back(std::move(s));
    }

    std::vector<int> order(static_cast<std::size_t>(spec.n_samples));
    for (int i = 0; i < spec.n_samples; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng split_rng(derive_seed(spec.seed, "split"));
    split_rng.shuffle(order);
    int n_heldout = static_cast<int>(std::lround(spec.n_samples * spec.holdout_fraction));
    n_heldout = std::min(n_heldout, spec.n_samples - 1);
    ds.heldout_indices.assign(order.begin(), order.begin() + n_heldout);
    ds.train_indices.assign(order.begin() + n_heldout, order.end());
    std::sort(ds.heldout_indices.begin(), ds.heldout_indices.end());
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
    return ds;
}

Eigen::VectorXd channel_stddev(const Dataset& ds, const std::vector<int>& indices) {
    const int d = ds.spec.feature_dim;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(d);
    long n = 0;
    for (int i : indices) {
        const auto& m = ds.samples[static_cast<std::size_t>(i)].motion.frames;
        sum += m.colwise().sum().transpose();
        sumsq += m.array().square().colwise().sum().matrix().transpose();
        n += m.rows();
    }
    if (n < 2) throw ArgumentError("need at least 2 frames for stddev");
    Eigen::VectorXd mean = sum / static_cast<double>(n);
    Eigen::VectorXd var =
        (sumsq / static_cast<double>(n) - mean.array().square().matrix()).cwiseMax(0.0);
    return var.array().sqrt();
}

}  // namespace t2m::syndata
