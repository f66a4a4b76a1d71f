#include "molang/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"
#include "molang/error.hpp"

namespace molang {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::string& buf, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    return v;
}

void put_f32(std::string& out, float v) {
    static_assert(sizeof(float) == 4);
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    nlohmann::json meta = nlohmann::json::parse(ck.meta_json, nullptr, false);
    if (meta.is_discarded()) throw ConfigError("checkpoint meta_json is not valid JSON");

    nlohmann::json tensors = nlohmann::json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ck.tensors) {  // std::map: deterministic order
        nlohmann::json entry;
        entry["dtype"] = "f32";
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        tensors[name] = entry;
        offset += static_cast<std::uint64_t>(t.size()) * 4;
    }
    nlohmann::json header;
    header["meta"] = meta;
    header["tensors"] = tensors;
    std::string header_str = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, header_str.size());
    out += header_str;
    for (const auto& [name, t] : ck.tensors)
        for (long i = 0; i < t.size(); ++i) put_f32(out, static_cast<float>(t[i]));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError(0, "cannot open " + path + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError(0, "short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(0, "cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 16) throw FormatError(buf.size(), "truncated header in " + path);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError(0, "bad magic in " + path);
    std::uint32_t version = get_u32(buf, 4);
    if (version != kVersion)
        throw FormatError(4, "unsupported version " + std::to_string(version) + " in " + path);
    std::uint64_t header_len = get_u64(buf, 8);
    if (header_len > buf.size() - 16) throw FormatError(8, "header length exceeds file size in " + path);

    nlohmann::json header = nlohmann::json::parse(buf.substr(16, header_len), nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("tensors") ||
        !header["tensors"].is_object())
        throw FormatError(16, "malformed header JSON in " + path);

    std::size_t payload_at = 16 + header_len;
    std::size_t payload_size = buf.size() - payload_at;

    Checkpoint ck;
    ck.meta_json = header.contains("meta") ? header["meta"].dump() : "{}";

    struct Extent {
        std::uint64_t begin, end;
        std::string name;
    };
    std::vector<Extent> extents;
    for (const auto& [name, entry] : header["tensors"].items()) {
        if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") || !entry.contains("offset"))
            throw FormatError(16, "tensor '" + name + "' entry malformed in " + path);
        if (entry["dtype"] != "f32") throw FormatError(16, "tensor '" + name + "' has unsupported dtype in " + path);
        if (!entry["shape"].is_array() || !entry["offset"].is_number_unsigned())
            throw FormatError(16, "tensor '" + name + "' entry malformed in " + path);
        std::vector<long> shape;
        std::uint64_t numel = 1;
        for (const auto& dim : entry["shape"]) {
            if (!dim.is_number_integer() || dim.get<long>() < 1)
                throw FormatError(16, "tensor '" + name + "' has a bad dimension in " + path);
            shape.push_back(dim.get<long>());
            numel *= static_cast<std::uint64_t>(dim.get<long>());
            if (numel > (1ull << 40)) throw FormatError(16, "tensor '" + name + "' is implausibly large in " + path);
        }
        std::uint64_t off = entry["offset"].get<std::uint64_t>();
        std::uint64_t bytes = numel * 4;
        if (off > payload_size || bytes > payload_size - off)
            throw FormatError(payload_at + static_cast<std::size_t>(off),
                              "tensor '" + name + "' payload out of bounds in " + path);
        extents.push_back({off, off + bytes, name});

        Tensor t = Tensor::zeros(shape);
        const char* src = buf.data() + payload_at + off;
        for (long i = 0; i < t.size(); ++i) {
            float v;
            std::memcpy(&v, src + 4 * i, 4);
            t[i] = static_cast<double>(v);
        }
        ck.tensors.emplace(name, std::move(t));
    }

    std::sort(extents.begin(), extents.end(), [](const Extent& a, const Extent& b) { return a.begin < b.begin; });
    std::uint64_t cursor = 0;
    for (const auto& e : extents) {
        if (e.begin < cursor)
            throw FormatError(payload_at + static_cast<std::size_t>(e.begin),
                              "tensor '" + e.name + "' overlaps the previous tensor in " + path);
        cursor = e.end;
    }
    if (cursor != payload_size)
        throw FormatError(payload_at + static_cast<std::size_t>(cursor), "trailing payload bytes in " + path);
    return ck;
}

void save_tokenizer_checkpoint(const std::string& path, const Tokenizer& tok, const std::string& run_config_json) {
    Checkpoint ck;
    for (const auto& [name, t] : tok.params.items()) ck.tensors.emplace("param." + name, t);
    ck.tensors.emplace("codebook.entries", tok.codebook.entries);
    ck.tensors.emplace("codebook.ema_cluster_size", tok.codebook.ema_cluster_size);
    ck.tensors.emplace("codebook.ema_embed_sum", tok.codebook.ema_embed_sum);
    ck.tensors.emplace("feat.mu", tok.feat_mu);
    ck.tensors.emplace("feat.sigma", tok.feat_sigma);

    nlohmann::json meta;
    meta["kind"] = "tokenizer";
    meta["config"] = {{"codebook_size", tok.config.K}, {"code_dim", tok.config.d},     {"downsample", tok.config.l},
                      {"hidden", tok.config.hidden},   {"beta", tok.config.beta},      {"lambda_v", tok.config.lambda_v},
                      {"gamma", tok.config.gamma},     {"tau", tok.config.tau}};
    meta["feature_dim"] = tok.feature_dim;
    meta["codebook_ready"] = tok.codebook_ready;
    meta["usage"] = tok.codebook.usage;
    if (!run_config_json.empty()) {
        nlohmann::json rc = nlohmann::json::parse(run_config_json, nullptr, false);
        if (rc.is_discarded()) throw ConfigError("run_config_json is not valid JSON");
        meta["run_config"] = rc;
    }
    ck.meta_json = meta.dump();
    save_checkpoint(path, ck);
}

Tokenizer load_tokenizer_checkpoint(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    nlohmann::json meta = nlohmann::json::parse(ck.meta_json, nullptr, false);
    if (meta.is_discarded() || !meta.is_object() || meta.value("kind", "") != "tokenizer")
        throw FormatError(16, path + " is not a tokenizer checkpoint");
    if (!meta.contains("config") || !meta["config"].is_object())
        throw FormatError(16, "missing tokenizer config in " + path);

    TokenizerConfig cfg;
    const auto& c = meta["config"];
    cfg.K = c.value("codebook_size", cfg.K);
    cfg.d = c.value("code_dim", cfg.d);
    cfg.l = c.value("downsample", cfg.l);
    cfg.hidden = c.value("hidden", cfg.hidden);
    cfg.beta = c.value("beta", cfg.beta);
    cfg.lambda_v = c.value("lambda_v", cfg.lambda_v);
    cfg.gamma = c.value("gamma", cfg.gamma);
    cfg.tau = c.value("tau", cfg.tau);
    long feature_dim = meta.value("feature_dim", 0L);
    if (feature_dim < 1) throw FormatError(16, "missing feature_dim in " + path);

    Tokenizer tok = init_tokenizer(cfg, feature_dim, 0);
    auto take = [&](const std::string& name) -> Tensor {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end()) throw FormatError(16, "missing tensor '" + name + "' in " + path);
        return it->second;
    };
    for (auto& [name, t] : tok.params.items()) {
        Tensor loaded = take("param." + name);
        if (!loaded.same_shape(t))
            throw FormatError(16, "tensor 'param." + name + "' has the wrong shape in " + path);
        t = loaded;
    }
    auto assign = [&](Tensor& dst, const std::string& name) {
        Tensor loaded = take(name);
        if (!loaded.same_shape(dst)) throw FormatError(16, "tensor '" + name + "' has the wrong shape in " + path);
        dst = loaded;
    };
    assign(tok.codebook.entries, "codebook.entries");
    assign(tok.codebook.ema_cluster_size, "codebook.ema_cluster_size");
    assign(tok.codebook.ema_embed_sum, "codebook.ema_embed_sum");
    assign(tok.feat_mu, "feat.mu");
    assign(tok.feat_sigma, "feat.sigma");
    tok.codebook_ready = meta.value("codebook_ready", false);
    tok.codebook.usage.assign(cfg.K, 0);
    if (meta.contains("usage") && meta["usage"].is_array() && (long)meta["usage"].size() == cfg.K)
        for (long k = 0; k < cfg.K; ++k) tok.codebook.usage[k] = meta["usage"][k].get<long>();
    return tok;
}

void save_lm_checkpoint(const std::string& path, const LMWeights& weights, const UnifiedVocab& vocab,
                        const std::string& run_config_json) {
    Checkpoint ck;
    for (const auto& [name, t] : weights.params.items()) ck.tensors.emplace("param." + name, t);
    nlohmann::json meta;
    meta["kind"] = "lm";
    meta["config"] = {{"d_model", weights.config.d_model},
                      {"n_layers", weights.config.n_layers},
                      {"n_heads", weights.config.n_heads},
                      {"d_kv", weights.config.d_kv},
                      {"d_ff", weights.config.d_ff},
                      {"dropout", weights.config.dropout},
                      {"rel_buckets", weights.config.rel_buckets},
                      {"rel_max_distance", weights.config.rel_max_distance},
                      {"max_source", weights.config.max_source},
                      {"max_target", weights.config.max_target}};
    meta["vocab_size"] = weights.vocab_size;
    meta["vocab_hash"] = vocab_hash(vocab);
    if (!run_config_json.empty()) {
        nlohmann::json rc = nlohmann::json::parse(run_config_json, nullptr, false);
        if (rc.is_discarded()) throw ConfigError("run_config_json is not valid JSON");
        meta["run_config"] = rc;
    }
    ck.meta_json = meta.dump();
    save_checkpoint(path, ck);
}

LMWeights load_lm_checkpoint(const std::string& path, const UnifiedVocab& vocab) {
    Checkpoint ck = load_checkpoint(path);
    nlohmann::json meta = nlohmann::json::parse(ck.meta_json, nullptr, false);
    if (meta.is_discarded() || !meta.is_object() || meta.value("kind", "") != "lm")
        throw FormatError(16, path + " is not a language-model checkpoint");
    if (!meta.contains("config") || !meta["config"].is_object())
        throw FormatError(16, "missing lm config in " + path);

    std::uint64_t stamped = meta.value("vocab_hash", 0ULL);
    if (stamped != vocab_hash(vocab))
        throw CompatibilityError("checkpoint " + path + " was trained against a different vocabulary");
    long vocab_size = meta.value("vocab_size", 0L);
    if (vocab_size != vocab.size())
        throw CompatibilityError("checkpoint vocab size " + std::to_string(vocab_size) +
                                 " does not match the vocabulary (" + std::to_string(vocab.size()) + ")");

    LMConfig cfg;
    const auto& c = meta["config"];
    cfg.d_model = c.value("d_model", cfg.d_model);
    cfg.n_layers = c.value("n_layers", cfg.n_layers);
    cfg.n_heads = c.value("n_heads", cfg.n_heads);
    cfg.d_kv = c.value("d_kv", cfg.d_kv);
    cfg.d_ff = c.value("d_ff", cfg.d_ff);
    cfg.dropout = c.value("dropout", cfg.dropout);
    cfg.rel_buckets = c.value("rel_buckets", cfg.rel_buckets);
    cfg.rel_max_distance = c.value("rel_max_distance", cfg.rel_max_distance);
    cfg.max_source = c.value("max_source", cfg.max_source);
    cfg.max_target = c.value("max_target", cfg.max_target);

    LMWeights w = init_lm(cfg, vocab_size, 0);
    for (auto& [name, t] : w.params.items()) {
        auto it = ck.tensors.find("param." + name);
        if (it == ck.tensors.end()) throw FormatError(16, "missing tensor 'param." + name + "' in " + path);
        if (!it->second.same_shape(t))
            throw FormatError(16, "tensor 'param." + name + "' has the wrong shape in " + path);
        t = it->second;
    }
    return w;
}

}  // namespace molang
