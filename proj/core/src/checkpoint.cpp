#include "lertlab/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "lertlab/error.hpp"

#include "json.hpp"

namespace lertlab {

namespace {

constexpr char kMagic[8] = {'L', 'E', 'R', 'T', 'C', 'K', 'P', 'T'};
constexpr int64_t kFormatVersion = 1;

static_assert(sizeof(float) == 4, "checkpoint format assumes 4-byte float");

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"layers", cfg.layers},       {"hidden", cfg.hidden},
            {"heads", cfg.heads},         {"ffn_inner", cfg.ffn_inner},
            {"vocab", cfg.vocab},         {"max_len", cfg.max_len},
            {"segments", cfg.segments},   {"layernorm_eps", cfg.layernorm_eps},
            {"init_std", cfg.init_std}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.layers = j.at("layers").get<int32_t>();
    cfg.hidden = j.at("hidden").get<int32_t>();
    cfg.heads = j.at("heads").get<int32_t>();
    cfg.ffn_inner = j.at("ffn_inner").get<int32_t>();
    cfg.vocab = j.at("vocab").get<int32_t>();
    cfg.max_len = j.at("max_len").get<int32_t>();
    cfg.segments = j.at("segments").get<int32_t>();
    cfg.layernorm_eps = j.at("layernorm_eps").get<double>();
    cfg.init_std = j.at("init_std").get<double>();
    return cfg;
}

// Little-endian serialization; on big-endian hosts the bytes are swapped so
// the on-disk format stays fixed.
bool host_is_little_endian() {
    const uint16_t probe = 1;
    return *reinterpret_cast<const uint8_t*>(&probe) == 1;
}

void write_floats_le(std::ofstream& out, const std::vector<float>& values) {
    if (host_is_little_endian()) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * 4));
        return;
    }
    for (float v : values) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
        out.write(bytes, 4);
    }
}

void read_floats_le(std::ifstream& in, std::vector<float>& values) {
    if (host_is_little_endian()) {
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
        return;
    }
    for (float& v : values) {
        unsigned char bytes[4];
        in.read(reinterpret_cast<char*>(bytes), 4);
        uint32_t bits = static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
                        (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
        std::memcpy(&v, &bits, 4);
    }
}

struct DirectoryEntry {
    std::string name;
    std::vector<int64_t> shape;
    int64_t offset = 0;  // in floats, from the start of the data section
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json dir = nlohmann::json::array();
    int64_t offset = 0;
    auto add_entries = [&](const ParamStore<float>& store, const std::string& prefix) {
        for (size_t i = 0; i < store.tensors.size(); ++i) {
            dir.push_back({{"name", prefix + store.names[i]},
                           {"shape", store.tensors[i].shape},
                           {"offset", offset}});
            offset += store.tensors[i].numel();
        }
    };
    add_entries(ckpt.params, "");
    if (ckpt.moments) {
        add_entries(ckpt.moments->m, "adam.m/");
        add_entries(ckpt.moments->v, "adam.v/");
    }

    nlohmann::json header = {
        {"format_version", kFormatVersion},
        {"model", config_to_json(ckpt.config)},
        {"heads", {{"pos", ckpt.heads.pos}, {"ner", ckpt.heads.ner}, {"dep", ckpt.heads.dep}}},
        {"step", ckpt.moments ? ckpt.moments->step : 0},
        {"has_moments", ckpt.moments.has_value()},
        {"directory", dir},
    };
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::Io, "cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    uint64_t header_len = header_text.size();
    char len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((header_len >> (8 * i)) & 0xff);
    out.write(len_bytes, 8);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

    auto write_store = [&](const ParamStore<float>& store) {
        for (const auto& tensor : store.tensors) write_floats_le(out, tensor.data);
    };
    write_store(ckpt.params);
    if (ckpt.moments) {
        write_store(ckpt.moments->m);
        write_store(ckpt.moments->v);
    }
    if (!out) raise(ErrorKind::Io, "write to checkpoint '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open checkpoint '" + path + "'");

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        raise(ErrorKind::Version, "'" + path + "' is not a checkpoint file");
    char len_bytes[8];
    in.read(len_bytes, 8);
    if (!in) raise(ErrorKind::Truncated, "checkpoint '" + path + "' ends inside the header length");
    uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i)
        header_len |= static_cast<uint64_t>(static_cast<unsigned char>(len_bytes[i])) << (8 * i);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) raise(ErrorKind::Truncated, "checkpoint '" + path + "' ends inside the JSON header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Parse, std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    const int64_t version = header.at("format_version").get<int64_t>();
    if (version != kFormatVersion)
        raise(ErrorKind::Version, "checkpoint format version " + std::to_string(version) +
                                      " does not match expected " + std::to_string(kFormatVersion));

    Checkpoint ckpt;
    ckpt.config = config_from_json(header.at("model"));
    ckpt.heads.pos = header.at("heads").at("pos").get<int32_t>();
    ckpt.heads.ner = header.at("heads").at("ner").get<int32_t>();
    ckpt.heads.dep = header.at("heads").at("dep").get<int32_t>();
    const bool has_moments = header.at("has_moments").get<bool>();
    if (has_moments) {
        ckpt.moments.emplace();
        ckpt.moments->step = header.at("step").get<int64_t>();
    }

    std::vector<DirectoryEntry> entries;
    int64_t expected_offset = 0;
    for (const auto& e : header.at("directory")) {
        DirectoryEntry entry;
        entry.name = e.at("name").get<std::string>();
        entry.shape = e.at("shape").get<std::vector<int64_t>>();
        entry.offset = e.at("offset").get<int64_t>();
        if (entry.offset != expected_offset)
            raise(ErrorKind::Parse, "checkpoint directory offsets are not contiguous");
        int64_t numel = 1;
        for (int64_t d : entry.shape) {
            if (d <= 0) raise(ErrorKind::Shape, "non-positive dimension for tensor '" + entry.name + "'");
            numel *= d;
        }
        expected_offset += numel;
        entries.push_back(std::move(entry));
    }

    auto read_into = [&](ParamStore<float>& store, const std::string& name, const std::vector<int64_t>& shape) {
        Tensor<float>& t = store.add(name, shape);
        read_floats_le(in, t.data);
        if (!in) raise(ErrorKind::Truncated, "checkpoint '" + path + "' ends inside tensor '" + name + "'");
    };
    for (const auto& entry : entries) {
        if (entry.name.rfind("adam.m/", 0) == 0) {
            if (!ckpt.moments) raise(ErrorKind::Parse, "moment tensors present but has_moments is false");
            read_into(ckpt.moments->m, entry.name.substr(7), entry.shape);
        } else if (entry.name.rfind("adam.v/", 0) == 0) {
            if (!ckpt.moments) raise(ErrorKind::Parse, "moment tensors present but has_moments is false");
            read_into(ckpt.moments->v, entry.name.substr(7), entry.shape);
        } else {
            read_into(ckpt.params, entry.name, entry.shape);
        }
    }
    // Cross-check the parameter directory against the configured architecture.
    ParamStore<float> expected = init_params<float>(ckpt.config, ckpt.heads, 0);
    if (expected.names != ckpt.params.names)
        raise(ErrorKind::Shape, "checkpoint tensor directory does not match the model config");
    for (size_t i = 0; i < expected.tensors.size(); ++i)
        if (expected.tensors[i].shape != ckpt.params.tensors[i].shape)
            raise(ErrorKind::Shape, "tensor '" + ckpt.params.names[i] + "' has an unexpected shape");
    return ckpt;
}

}  // namespace lertlab
