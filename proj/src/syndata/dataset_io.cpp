#include "t2m/syndata/dataset_io.hpp"

#include <filesystem>

#include <json.hpp>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/syndata/caption.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace t2m::syndata {

bool dataset_exists(const std::string& dir) {
    return fs::exists(fs::path(dir) / "manifest.json");
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    const int n = static_cast<int>(ds.samples.size());

    json manifest;
    manifest["format_version"] = kDatasetVersion;
    manifest["spec"] = {{"n_samples", ds.spec.n_samples},
                        {"feature_dim", ds.spec.feature_dim},
                        {"t_min", ds.spec.t_min},
                        {"t_max", ds.spec.t_max},
                        {"described_prob", ds.spec.described_prob},
                        {"holdout_fraction", ds.spec.holdout_fraction},
                        {"frame_rate", ds.spec.frame_rate},
                        {"seed", ds.spec.seed}};
    manifest["vocabulary"] = vocabulary();

    std::vector<int> lengths, masks;
    std::vector<long> offsets{0};
    json attrs = json::array();
    std::vector<std::uint8_t> frames, captions;
    for (const auto& s : ds.samples) {
        lengths.push_back(s.motion.length());
        masks.push_back(s.caption.described.bits());
        offsets.push_back(offsets.back() + static_cast<long>(s.caption.tokens.size()));
        attrs.push_back({static_cast<int>(s.attrs.gait), static_cast<int>(s.attrs.direction),
                         static_cast<int>(s.attrs.speed), static_cast<int>(s.attrs.posture),
                         s.attrs.free_phase, s.attrs.free_amplitude});
        for (int t = 0; t < s.motion.length(); ++t)
            for (int c = 0; c < s.motion.dim(); ++c)
                put_f32le(frames, static_cast<float>(s.motion.frames(t, c)));
        for (int id : s.caption.tokens) put_u16le(captions, static_cast<std::uint16_t>(id));
    }
    manifest["lengths"] = lengths;
    manifest["caption_offsets"] = offsets;
    manifest["described_masks"] = masks;
    manifest["attrs"] = attrs;
    manifest["train_indices"] = ds.train_indices;
    manifest["heldout_indices"] = ds.heldout_indices;
    (void)n;

    write_file_text(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
    write_file_bytes(fs::path(dir) / "data.bin", frames);
    write_file_bytes(fs::path(dir) / "captions.bin", captions);
}

Dataset read_dataset(const std::string& dir) {
    const fs::path root(dir);
    const std::string manifest_path = (root / "manifest.json").string();
    if (!fs::exists(root / "manifest.json"))
        throw PrerequisiteError("missing dataset manifest: " + manifest_path);

    auto j = json::parse(read_file_text(root / "manifest.json"), nullptr, false);
    if (j.is_discarded()) throw FormatError("invalid JSON: " + manifest_path);
    auto fail = [&](const std::string& why, const std::string& file) -> void {
        throw FormatError(why + ": " + (root / file).string());
    };
    if (j.value("format_version", -1) != kDatasetVersion)
        fail("unsupported dataset format version", "manifest.json");
    for (const char* key : {"spec", "vocabulary", "lengths", "caption_offsets", "described_masks",
                            "attrs", "train_indices", "heldout_indices"})
        if (!j.contains(key)) fail(std::string("manifest missing key '") + key + "'", "manifest.json");
    if (j["vocabulary"].get<std::vector<std::string>>() != vocabulary())
        fail("vocabulary mismatch", "manifest.json");

    Dataset ds;
    const auto& sp = j["spec"];
    ds.spec.n_samples = sp.at("n_samples");
    ds.spec.feature_dim = sp.at("feature_dim");
    ds.spec.t_min = sp.at("t_min");
    ds.spec.t_max = sp.at("t_max");
    ds.spec.described_prob = sp.at("described_prob");
    ds.spec.holdout_fraction = sp.at("holdout_fraction");
    ds.spec.frame_rate = sp.at("frame_rate");
    ds.spec.seed = sp.at("seed");

    auto lengths = j["lengths"].get<std::vector<int>>();
    auto offsets = j["caption_offsets"].get<std::vector<long>>();
    auto masks = j["described_masks"].get<std::vector<int>>();
    const auto& attrs = j["attrs"];
    const int n = ds.spec.n_samples;
    if (static_cast<int>(lengths.size()) != n || static_cast<int>(masks.size()) != n ||
        static_cast<int>(attrs.size()) != n || static_cast<int>(offsets.size()) != n + 1)
        fail("per-sample table size disagrees with sample count", "manifest.json");
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i)
        if (offsets[i] > offsets[i + 1] || offsets[0] != 0)
            fail("caption offsets not monotone from zero", "manifest.json");

    long total_frames = 0;
    for (int t : lengths) {
        if (t < 1) fail("nonpositive sample length", "manifest.json");
        total_frames += t;
    }
    const int d = ds.spec.feature_dim;
    auto frame_bytes = read_file_bytes(root / "data.bin");
    if (frame_bytes.size() != static_cast<std::size_t>(total_frames) * d * 4)
        fail("frame blob size disagrees with manifest lengths", "data.bin");
    auto caption_bytes = read_file_bytes(root / "captions.bin");
    if (caption_bytes.size() != static_cast<std::size_t>(offsets.back()) * 2)
        fail("caption blob size disagrees with manifest offsets", "captions.bin");

    std::size_t at = 0;
    for (int i = 0; i < n; ++i) {
        Sample s;
        const auto& a = attrs[static_cast<std::size_t>(i)];
        if (!a.is_array() || a.size() != 6) fail("malformed attrs row", "manifest.json");
        int gait = a[0], direction = a[1], speed = a[2], posture = a[3];
        if (gait < 0 || gait >= kGaitCount || direction < 0 || direction >= kDirectionCount ||
            speed < 0 || speed >= kSpeedCount || posture < 0 || posture >= kPostureCount)
            fail("attribute value out of range", "manifest.json");
        s.attrs.gait = static_cast<Gait>(gait);
        s.attrs.direction = static_cast<Direction>(direction);
        s.attrs.speed = static_cast<Speed>(speed);
        s.attrs.posture = static_cast<Posture>(posture);
        s.attrs.free_phase = a[4];
        s.attrs.free_amplitude = a[5];

        s.motion.frame_rate = ds.spec.frame_rate;
        s.motion.frames.resize(lengths[static_cast<std::size_t>(i)], d);
        for (int t = 0; t < lengths[static_cast<std::size_t>(i)]; ++t)
            for (int c = 0; c < d; ++c, at += 4)
                s.motion.frames(t, c) = static_cast<double>(get_f32le(frame_bytes.data() + at));

        s.caption.described = DescribedMask::from_bits(masks[static_cast<std::size_t>(i)]);
        for (long k = offsets[static_cast<std::size_t>(i)];
             k < offsets[static_cast<std::size_t>(i) + 1]; ++k) {
            int id = get_u16le(caption_bytes.data() + static_cast<std::size_t>(k) * 2);
            if (id >= vocabulary_size()) fail("caption token id out of range", "captions.bin");
            s.caption.tokens.push_back(id);
        }
        ds.samples.push_back(std::move(s));
    }

    ds.train_indices = j["train_indices"].get<std::vector<int>>();
    ds.heldout_indices = j["heldout_indices"].get<std::vector<int>>();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto* list : {&ds.train_indices, &ds.heldout_indices})
        for (int idx : *list) {
            if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)])
                fail("split indices do not partition the sample range", "manifest.json");
            seen[static_cast<std::size_t>(idx)] = true;
        }
    if (static_cast<int>(ds.train_indices.size() + ds.heldout_indices.size()) != n)
        fail("split indices do not partition the sample range", "manifest.json");
    return ds;
}

}  // namespace t2m::syndata
