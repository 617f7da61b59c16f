#include "noiselab/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace noiselab::model {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'N', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
uint32_t get_u32(const char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(p[i])) << (8 * i);
    return v;
}
uint64_t get_u64(const char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(p[i])) << (8 * i);
    return v;
}

json config_json(const ModelConfig& c) {
    return json{{"n_layers", c.n_layers},       {"hidden_dim", c.hidden_dim},
                {"n_heads", c.n_heads},         {"ff_dim", c.ff_dim},
                {"vocab_size", c.vocab_size},   {"max_positions", c.max_positions},
                {"n_segments", c.n_segments},   {"dropout_rate", c.dropout_rate},
                {"layernorm_eps", c.layernorm_eps}};
}

ModelConfig config_from(const json& j) {
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<size_t>();
    c.hidden_dim = j.at("hidden_dim").get<size_t>();
    c.n_heads = j.at("n_heads").get<size_t>();
    c.ff_dim = j.at("ff_dim").get<size_t>();
    c.vocab_size = j.at("vocab_size").get<size_t>();
    c.max_positions = j.at("max_positions").get<size_t>();
    c.n_segments = j.at("n_segments").get<size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.layernorm_eps = j.at("layernorm_eps").get<double>();
    return c;
}

}  // namespace

void save_checkpoint(const ModelF& m, const std::string& path) {
    json manifest;
    manifest["config"] = config_json(m.config);
    manifest["sandwich"] = {{"n_prepend", m.sandwich.n_prepend},
                            {"n_append", m.sandwich.n_append},
                            {"init_seed", m.sandwich.init_seed}};
    manifest["layers"] = json::array();
    for (const auto& l : m.layers)
        manifest["layers"].push_back({{"prefix", l.prefix}, {"label", l.label}});
    manifest["has_mlm_head"] = m.has_mlm_head;
    manifest["n_classes"] = m.n_classes;
    manifest["has_lora"] = m.has_lora;
    manifest["lora"] = {{"rank", m.lora.rank}, {"alpha", m.lora.alpha}};
    manifest["params"] = json::array();
    uint64_t offset = 0;  // in floats, into the payload
    for (const auto& p : m.params) {
        manifest["params"].push_back({{"name", p.name},
                                      {"shape", p.value.shape},
                                      {"trainable", p.trainable},
                                      {"offset", offset}});
        offset += p.value.numel();
    }

    std::string blob;
    blob.append(kMagic, sizeof kMagic);
    put_u32(blob, kVersion);
    const std::string text = manifest.dump();
    put_u64(blob, text.size());
    blob += text;
    blob.reserve(blob.size() + offset * 4);
    for (const auto& p : m.params)
        for (float f : p.value.data) {
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(blob, bits);
        }

    // write-then-rename keeps readers from ever seeing a partial file
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot open for writing: " + tmp);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw CheckpointError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw CheckpointError("cannot rename " + tmp + " to " + path);
}

ModelF load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < sizeof kMagic + 12) throw CheckpointError("truncated checkpoint: " + path);
    if (std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0)
        throw CheckpointError("bad magic, not a model checkpoint: " + path);
    const uint32_t version = get_u32(blob.data() + 8);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + ": " +
                              path);
    const uint64_t manifest_len = get_u64(blob.data() + 12);
    const size_t payload_at = 20 + manifest_len;
    if (blob.size() < payload_at) throw CheckpointError("truncated manifest: " + path);

    json manifest;
    try {
        manifest = json::parse(blob.substr(20, manifest_len));
    } catch (const json::exception& e) {
        throw CheckpointError("manifest parse error in " + path + ": " + e.what());
    }

    ModelF m;
    try {
        m.config = config_from(manifest.at("config"));
        const auto& sw = manifest.at("sandwich");
        m.sandwich = SandwichSpec{sw.at("n_prepend").get<size_t>(),
                                  sw.at("n_append").get<size_t>(),
                                  sw.at("init_seed").get<uint64_t>()};
        for (const auto& l : manifest.at("layers"))
            m.layers.push_back(
                LayerInfo{l.at("prefix").get<std::string>(), l.at("label").get<std::string>()});
        m.has_mlm_head = manifest.at("has_mlm_head").get<bool>();
        m.n_classes = manifest.at("n_classes").get<size_t>();
        m.has_lora = manifest.at("has_lora").get<bool>();
        m.lora = LoRASpec{manifest.at("lora").at("rank").get<size_t>(),
                          manifest.at("lora").at("alpha").get<double>()};

        const size_t n_floats = (blob.size() - payload_at) / 4;
        if ((blob.size() - payload_at) % 4 != 0)
            throw CheckpointError("payload not a whole number of floats: " + path);
        uint64_t expect_offset = 0;
        for (const auto& pj : manifest.at("params")) {
            auto name = pj.at("name").get<std::string>();
            auto shape = pj.at("shape").get<std::vector<size_t>>();
            if (pj.at("offset").get<uint64_t>() != expect_offset)
                throw CheckpointError("non-contiguous payload offset for " + name + ": " + path);
            ad::Tensor<float> t(shape);
            if (expect_offset + t.numel() > n_floats)
                throw CheckpointError("payload too short for " + name + ": " + path);
            const char* src = blob.data() + payload_at + expect_offset * 4;
            for (size_t i = 0; i < t.numel(); ++i) {
                const uint32_t bits = get_u32(src + i * 4);
                std::memcpy(&t.data[i], &bits, 4);
            }
            m.params.add(name, std::move(t), pj.at("trainable").get<bool>());
            expect_offset += m.params.at(name).value.numel();
        }
        if (expect_offset != n_floats)
            throw CheckpointError("payload has " + std::to_string(n_floats - expect_offset) +
                                  " trailing floats: " + path);
    } catch (const json::exception& e) {
        throw CheckpointError("manifest field error in " + path + ": " + e.what());
    }
    return m;
}

ModelF load_checkpoint(const std::string& path, size_t expect_vocab_size) {
    ModelF m = load_checkpoint(path);
    if (m.config.vocab_size != expect_vocab_size)
        throw CheckpointError("checkpoint " + path + " was built for vocab size " +
                              std::to_string(m.config.vocab_size) + ", expected " +
                              std::to_string(expect_vocab_size));
    return m;
}

}  // namespace noiselab::model
