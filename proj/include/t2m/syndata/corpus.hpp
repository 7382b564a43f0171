#pragma once

#include "t2m/syndata/types.hpp"

namespace t2m::syndata {

// Length band for a speed class: fast motions occupy the lower third of the
// corpus length range, normal the middle, slow the upper.
void length_band(const CorpusSpec& spec, Speed speed, int& lo, int& hi);

Dataset generate_corpus(const CorpusSpec& spec);

// Per-channel standard deviation over all frames of the listed samples.
Eigen::VectorXd channel_stddev(const Dataset& ds, const std::vector<int>& indices);

}  // namespace t2m::syndata
