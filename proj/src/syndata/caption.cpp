#include "t2m/syndata/caption.hpp"

#include <sstream>

#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"

namespace t2m::syndata {

namespace {

enum TokenId {
    kA = 0,
    kThe = 1,
    kPerson = 2,
    kWalks = 3,
    kJumps = 4,
    kWaves = 5,
    kWipes = 6,
    kMoves = 7,
    kLeftwards = 8,
    kRightwards = 9,
    kForwards = 10,
    kSlowly = 11,
    kSteadily = 12,
    kQuickly = 13,
    kWhile = 14,
    kStanding = 15,
    kLeaning = 16,
    kBending = 17,
};

const std::vector<std::string> kVocabulary = {
    "a",       "the",       "person",   "walks",  "jumps",    "waves",   "wipes",   "moves",
    "leftwards", "rightwards", "forwards", "slowly", "steadily", "quickly", "while",
    "standing", "leaning",   "bending",
};

int verb_token(Gait g) { return kWalks + static_cast<int>(g); }
int direction_token(Direction d) { return kLeftwards + static_cast<int>(d); }
int speed_token(Speed s) { return kSlowly + static_cast<int>(s); }
int posture_token(Posture p) { return kStanding + static_cast<int>(p); }

}  // namespace

int vocabulary_size() { return static_cast<int>(kVocabulary.size()); }

const std::vector<std::string>& vocabulary() { return kVocabulary; }

CaptionTokens caption_of(const MotionAttributes& attrs, const DescribedMask& mask,
                         std::uint64_t seed) {
    CaptionTokens out;
    out.described = mask;
    int article = kA;
    if (mask.count() > 0 && (derive_seed(seed, "article") & 1)) article = kThe;
    out.tokens.push_back(article);
    out.tokens.push_back(kPerson);
    out.tokens.push_back(mask.gait ? verb_token(attrs.gait) : kMoves);
    if (mask.direction) out.tokens.push_back(direction_token(attrs.direction));
    if (mask.speed) out.tokens.push_back(speed_token(attrs.speed));
    if (mask.posture) {
        out.tokens.push_back(kWhile);
        out.tokens.push_back(posture_token(attrs.posture));
    }
    return out;
}

std::pair<MotionAttributes, DescribedMask> decode_caption(const std::vector<int>& tokens) {
    MotionAttributes attrs;
    DescribedMask mask;
    std::size_t i = 0;
    auto need = [&](bool cond, const char* what) {
        if (!cond) throw ArgumentError(std::string("malformed caption: ") + what);
    };
    need(tokens.size() >= 3, "too short");
    need(tokens[0] == kA || tokens[0] == kThe, "expected article");
    need(tokens[1] == kPerson, "expected subject");
    i = 2;
    int verb = tokens[i++];
    if (verb >= kWalks && verb <= kWipes) {
        mask.gait = true;
        attrs.gait = static_cast<Gait>(verb - kWalks);
    } else {
        need(verb == kMoves, "expected verb");
    }
    if (i < tokens.size() && tokens[i] >= kLeftwards && tokens[i] <= kForwards) {
        mask.direction = true;
        attrs.direction = static_cast<Direction>(tokens[i] - kLeftwards);
        ++i;
    }
    if (i < tokens.size() && tokens[i] >= kSlowly && tokens[i] <= kQuickly) {
        mask.speed = true;
        attrs.speed = static_cast<Speed>(tokens[i] - kSlowly);
        ++i;
    }
    if (i < tokens.size() && tokens[i] == kWhile) {
        ++i;
        need(i < tokens.size() && tokens[i] >= kStanding && tokens[i] <= kBending,
             "expected posture after 'while'");
        mask.posture = true;
        attrs.posture = static_cast<Posture>(tokens[i] - kStanding);
        ++i;
    }
    need(i == tokens.size(), "trailing tokens");
    return {attrs, mask};
}

std::string caption_text(const std::vector<int>& tokens) {
    std::ostringstream out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= vocabulary_size())
            throw ArgumentError("caption token id out of range");
        if (i) out << ' ';
        out << kVocabulary[static_cast<std::size_t>(tokens[i])];
    }
    return out.str();
}

std::vector<int> tokenize_text(const std::string& text) {
    std::istringstream in(text);
    std::vector<int> out;
    std::string word;
    while (in >> word) {
        int id = -1;
        for (std::size_t k = 0; k < kVocabulary.size(); ++k)
            if (kVocabulary[k] == word) {
                id = static_cast<int>(k);
                break;
            }
        if (id < 0) throw ArgumentError("unknown caption word: " + word);
        out.push_back(id);
    }
    if (out.size() > 16) throw ArgumentError("caption longer than 16 tokens");
    return out;
}

}  // namespace t2m::syndata
