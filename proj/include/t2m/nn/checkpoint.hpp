#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "t2m/nn/autodiff.hpp"
#include "t2m/nn/layers.hpp"

namespace t2m::nn {

// Checkpoint directory layout:
//   config.json   kind, format version, model configuration
//   params.json   ordered tensor index {name, rows, cols, file}
//   t<NNNN>.bin   one float32 little-endian row-major blob per tensor
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& dir, const std::string& kind, nlohmann::json config,
                     const ParamStore& params);

// Verifies kind and version; returns the config with bookkeeping keys removed.
nlohmann::json load_checkpoint_config(const std::string& dir, const std::string& kind);
std::map<std::string, Mat> load_checkpoint_params(const std::string& dir);

// Content hash over config.json, params.json and every blob, in index order.
std::uint64_t checkpoint_fingerprint(const std::string& dir);

bool checkpoint_exists(const std::string& dir);

}  // namespace t2m::nn
