#pragma once

#include <string>

#include "t2m/syndata/types.hpp"

namespace t2m::syndata {

// Dataset directory layout, format version 1:
//   manifest.json  spec, vocabulary, per-sample lengths / caption offsets /
//                  described masks / attributes, split indices
//   data.bin       float32 LE row-major frames, samples concatenated in
//                  manifest order (sum(lengths) x d values)
//   captions.bin   uint16 LE token ids, indexed by manifest caption_offsets
inline constexpr int kDatasetVersion = 1;

void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

bool dataset_exists(const std::string& dir);

}  // namespace t2m::syndata
