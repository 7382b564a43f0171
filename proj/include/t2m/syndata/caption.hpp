#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "t2m/syndata/types.hpp"

namespace t2m::syndata {

int vocabulary_size();
const std::vector<std::string>& vocabulary();

// Templated caption over the fixed vocabulary, mentioning exactly the masked
// attributes. The seed picks the article; an empty mask always collapses to
// the one generic sequence "a person moves".
CaptionTokens caption_of(const MotionAttributes& attrs, const DescribedMask& mask,
                         std::uint64_t seed);

// Inverse of caption_of up to undescribed fields (left at defaults).
std::pair<MotionAttributes, DescribedMask> decode_caption(const std::vector<int>& tokens);

std::string caption_text(const std::vector<int>& tokens);

// Parses a space-separated caption back to token ids; unknown word -> error.
std::vector<int> tokenize_text(const std::string& text);

}  // namespace t2m::syndata
