#include "mo3tr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace mo3tr {

namespace {

constexpr char kMagic[8] = {'M', 'O', '3', 'T', 'R', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

using nlohmann::json;

json config_to_json(const ModelConfig& cfg) {
    return json{{"d_z", cfg.d_z},
                {"num_heads", cfg.num_heads},
                {"temporal_layers", cfg.temporal_layers},
                {"encoder_layers", cfg.encoder_layers},
                {"decoder_layers", cfg.decoder_layers},
                {"ffn_mult", cfg.ffn_mult},
                {"num_queries", cfg.num_queries},
                {"grid_h", cfg.grid_h},
                {"grid_w", cfg.grid_w},
                {"channels", cfg.channels},
                {"query_mode", cfg.query_mode},
                {"alignment_width", cfg.alignment_width},
                {"patience", cfg.patience},
                {"cd_threshold", cfg.cd_threshold},
                {"iou_threshold", cfg.iou_threshold}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.d_z = j.at("d_z").get<int>();
    cfg.num_heads = j.at("num_heads").get<int>();
    cfg.temporal_layers = j.at("temporal_layers").get<int>();
    cfg.encoder_layers = j.at("encoder_layers").get<int>();
    cfg.decoder_layers = j.at("decoder_layers").get<int>();
    cfg.ffn_mult = j.at("ffn_mult").get<int>();
    cfg.num_queries = j.at("num_queries").get<int>();
    cfg.grid_h = j.at("grid_h").get<int>();
    cfg.grid_w = j.at("grid_w").get<int>();
    cfg.channels = j.at("channels").get<int>();
    cfg.query_mode = j.at("query_mode").get<std::string>();
    cfg.alignment_width = j.at("alignment_width").get<int>();
    cfg.patience = j.at("patience").get<int>();
    cfg.cd_threshold = j.at("cd_threshold").get<double>();
    cfg.iou_threshold = j.at("iou_threshold").get<double>();
    return cfg;
}

struct ParsedCheckpoint {
    ModelConfig config;
    json tensors;
    std::vector<double> payload;
};

ParsedCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "missing checkpoint " + path);
    }
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
        throw Error(ErrorKind::Parse, "not a checkpoint file: " + path);
    }
    uint32_t version = 0;
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in || version != kVersion) {
        throw Error(ErrorKind::Parse, "unsupported checkpoint version in " + path);
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        throw Error(ErrorKind::Parse, "truncated checkpoint header in " + path);
    }
    json j;
    try {
        j = json::parse(header);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, "bad checkpoint header: " + std::string(e.what()));
    }
    ParsedCheckpoint parsed;
    parsed.config = config_from_json(j.at("config"));
    parsed.tensors = j.at("tensors");
    uint64_t total = j.at("payload_doubles").get<uint64_t>();
    parsed.payload.resize(total);
    in.read(reinterpret_cast<char*>(parsed.payload.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(total * sizeof(double))) {
        throw Error(ErrorKind::Parse, "truncated checkpoint payload in " + path);
    }
    return parsed;
}

void apply_weights(Mo3trModel& model, const ParsedCheckpoint& parsed) {
    ParamRegistry reg = model.params();
    if (parsed.tensors.size() != reg.items.size()) {
        throw Error(ErrorKind::Config, "checkpoint tensor count does not match the model");
    }
    std::size_t idx = 0;
    for (auto& [name, tensor] : reg.items) {
        const json& meta = parsed.tensors.at(idx++);
        if (meta.at("name").get<std::string>() != name) {
            throw Error(ErrorKind::Config,
                        "checkpoint tensor order mismatch at '" + name + "'");
        }
        int rows = meta.at("rows").get<int>();
        int cols = meta.at("cols").get<int>();
        if (rows != tensor.rows() || cols != tensor.cols()) {
            throw Error(ErrorKind::Config, "checkpoint shape mismatch for '" + name + "'");
        }
        uint64_t offset = meta.at("offset").get<uint64_t>();
        auto vals = tensor.mutable_values();
        std::copy(parsed.payload.begin() + static_cast<std::ptrdiff_t>(offset),
                  parsed.payload.begin() + static_cast<std::ptrdiff_t>(offset + vals.size()),
                  vals.begin());
    }
}

} // namespace

void save_checkpoint(const Mo3trModel& model, const std::string& path) {
    ParamRegistry reg = model.params();
    json tensors = json::array();
    std::vector<double> payload;
    for (const auto& [name, tensor] : reg.items) {
        tensors.push_back({{"name", name},
                           {"rows", tensor.rows()},
                           {"cols", tensor.cols()},
                           {"offset", payload.size()}});
        auto vals = tensor.values();
        payload.insert(payload.end(), vals.begin(), vals.end());
    }
    json header = {{"config", config_to_json(model.config())},
                   {"tensors", std::move(tensors)},
                   {"payload_doubles", payload.size()}};
    std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write checkpoint " + path);
    }
    out.write(kMagic, 8);
    uint32_t version = kVersion;
    uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing checkpoint " + path);
    }
}

Mo3trModel load_checkpoint(const std::string& path) {
    ParsedCheckpoint parsed = read_checkpoint(path);
    Mo3trModel model(parsed.config, 0);
    apply_weights(model, parsed);
    return model;
}

void load_weights(Mo3trModel& model, const std::string& path) {
    ParsedCheckpoint parsed = read_checkpoint(path);
    apply_weights(model, parsed);
}

} // namespace mo3tr
