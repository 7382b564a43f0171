#include "t2m/nn/checkpoint.hpp"

#include <cstdio>
#include <filesystem>

#include "t2m/core/binio.hpp"
#include "t2m/core/errors.hpp"
#include "t2m/core/hash.hpp"

namespace fs = std::filesystem;

namespace t2m::nn {

namespace {

std::string blob_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "t%04zu.bin", index);
    return buf;
}

nlohmann::json parse_json_file(const fs::path& path) {
    if (!fs::exists(path)) throw PrerequisiteError("missing file: " + path.string());
    auto text = read_file_text(path);
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError("invalid JSON: " + path.string());
    return j;
}

nlohmann::json tensor_index(const fs::path& dir) {
    auto idx = parse_json_file(dir / "params.json");
    if (!idx.contains("tensors") || !idx["tensors"].is_array())
        throw FormatError("params.json missing tensor list: " + (dir / "params.json").string());
    return idx;
}

}  // namespace

bool checkpoint_exists(const std::string& dir) {
    return fs::exists(fs::path(dir) / "config.json") && fs::exists(fs::path(dir) / "params.json");
}

void save_checkpoint(const std::string& dir, const std::string& kind, nlohmann::json config,
                     const ParamStore& params) {
    fs::create_directories(dir);
    config["kind"] = kind;
    config["format_version"] = kCheckpointVersion;

    nlohmann::json tensors = nlohmann::json::array();
    auto values = params.values();
    std::size_t i = 0;
    for (const auto& name : params.names()) {
        const Mat& m = values.at(name);
        std::string file = blob_name(i++);
        tensors.push_back({{"name", name},
                           {"rows", m.rows()},
                           {"cols", m.cols()},
                           {"file", file}});
        std::vector<std::uint8_t> bytes;
        bytes.reserve(static_cast<std::size_t>(m.size()) * 4);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                put_f32le(bytes, static_cast<float>(m(r, c)));
        write_file_bytes(fs::path(dir) / file, bytes);
    }
    nlohmann::json idx = {{"format_version", kCheckpointVersion}, {"tensors", tensors}};
    write_file_text(fs::path(dir) / "params.json", idx.dump(2) + "\n");
    write_file_text(fs::path(dir) / "config.json", config.dump(2) + "\n");
}

nlohmann::json load_checkpoint_config(const std::string& dir, const std::string& kind) {
    if (!fs::exists(dir))
        throw PrerequisiteError("missing checkpoint directory: " + dir);
    auto config = parse_json_file(fs::path(dir) / "config.json");
    if (config.value("format_version", -1) != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version in " + dir + "/config.json");
    if (config.value("kind", "") != kind)
        throw FormatError("checkpoint at " + dir + " has kind '" + config.value("kind", "?") +
                          "', expected '" + kind + "'");
    config.erase("kind");
    config.erase("format_version");
    return config;
}

std::map<std::string, Mat> load_checkpoint_params(const std::string& dir) {
    auto idx = tensor_index(dir);
    if (idx.value("format_version", -1) != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version in " + dir + "/params.json");
    std::map<std::string, Mat> out;
    for (const auto& t : idx["tensors"]) {
        const std::string name = t.at("name");
        const int rows = t.at("rows");
        const int cols = t.at("cols");
        const fs::path file = fs::path(dir) / std::string(t.at("file"));
        auto bytes = read_file_bytes(file);
        if (bytes.size() != static_cast<std::size_t>(rows) * cols * 4)
            throw FormatError("blob size mismatch: " + file.string());
        Mat m(rows, cols);
        std::size_t at = 0;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c, at += 4)
                m(r, c) = static_cast<double>(get_f32le(bytes.data() + at));
        out.emplace(name, std::move(m));
    }
    return out;
}

std::uint64_t checkpoint_fingerprint(const std::string& dir) {
    if (!checkpoint_exists(dir)) throw PrerequisiteError("missing checkpoint directory: " + dir);
    std::uint64_t h = kFnvOffset;
    auto config_text = read_file_text(fs::path(dir) / "config.json");
    h = fnv1a64(config_text, h);
    auto idx_text = read_file_text(fs::path(dir) / "params.json");
    h = fnv1a64(idx_text, h);
    auto idx = tensor_index(dir);
    for (const auto& t : idx["tensors"]) {
        auto bytes = read_file_bytes(fs::path(dir) / std::string(t.at("file")));
        h = fnv1a64(bytes.data(), bytes.size(), h);
    }
    return h;
}

}  // namespace t2m::nn
