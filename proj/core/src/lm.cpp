#include "molang/lm.hpp"

#include <cmath>
#include <cstdio>

#include "molang/error.hpp"
#include "molang/vocab.hpp"

namespace molang {

void LMConfig::validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_kv < 1 || d_ff < 1)
        throw ConfigError("lm: all dimensions must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("lm: dropout must lie in [0, 1)");
    if (rel_buckets < 4 || rel_buckets % 2 != 0) throw ConfigError("lm: rel_buckets must be even and >= 4");
    if (rel_max_distance <= rel_buckets / 4) throw ConfigError("lm: rel_max_distance too small for the bucket layout");
    if (max_source < 1 || max_target < 1) throw ConfigError("lm: max lengths must be >= 1");
}

std::vector<std::string> config_warnings(const LMConfig& c) {
    std::vector<std::string> notes;
    if (c.d_model != c.n_heads * c.d_kv)
        notes.push_back("d_model (" + std::to_string(c.d_model) + ") != n_heads*d_kv (" +
                        std::to_string(c.n_heads * c.d_kv) + "); attention will project through a different width");
    return notes;
}

LMConfig desk_lm_config() {
    LMConfig c;
    c.d_model = 128;
    c.n_layers = 4;
    c.n_heads = 4;
    c.d_kv = 32;
    c.d_ff = 512;
    return c;
}

LMConfig small_lm_config() {
    LMConfig c;
    c.d_model = 512;
    c.n_layers = 6;
    c.n_heads = 8;
    c.d_kv = 64;
    c.d_ff = 2048;
    return c;
}

LMConfig base_lm_config() { return LMConfig{}; }

LMConfig large_lm_config() {
    LMConfig c;
    c.d_model = 1024;
    c.n_layers = 24;
    c.n_heads = 16;
    c.d_kv = 64;
    c.d_ff = 4096;
    return c;
}

namespace {

std::string lname(const char* side, long layer, const char* leaf) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s.L%ld.%s", side, layer, leaf);
    return buf;
}

void add_block_params(ParamStore& ps, const char* side, long i, const LMConfig& c, bool cross, Rng& rng) {
    long dh = c.n_heads * c.d_kv;
    double s_in = 1.0 / std::sqrt(static_cast<double>(c.d_model));
    double s_out = 1.0 / std::sqrt(static_cast<double>(dh));
    double s_ff = 1.0 / std::sqrt(static_cast<double>(c.d_ff));
    ps.add(lname(side, i, "ln1.g"), Tensor::full({c.d_model}, 1.0));
    ps.add(lname(side, i, "ln1.b"), Tensor::zeros({c.d_model}));
    ps.add(lname(side, i, "attn.wq"), Tensor::randn({c.d_model, dh}, rng, s_in));
    ps.add(lname(side, i, "attn.wk"), Tensor::randn({c.d_model, dh}, rng, s_in));
    ps.add(lname(side, i, "attn.wv"), Tensor::randn({c.d_model, dh}, rng, s_in));
    ps.add(lname(side, i, "attn.wo"), Tensor::randn({dh, c.d_model}, rng, s_out));
    if (cross) {
        ps.add(lname(side, i, "ln2.g"), Tensor::full({c.d_model}, 1.0));
        ps.add(lname(side, i, "ln2.b"), Tensor::zeros({c.d_model}));
        ps.add(lname(side, i, "cross.wq"), Tensor::randn({c.d_model, dh}, rng, s_in));
        ps.add(lname(side, i, "cross.wk"), Tensor::randn({c.d_model, dh}, rng, s_in));
        ps.add(lname(side, i, "cross.wv"), Tensor::randn({c.d_model, dh}, rng, s_in));
        ps.add(lname(side, i, "cross.wo"), Tensor::randn({dh, c.d_model}, rng, s_out));
    }
    const char* lnf = cross ? "ln3" : "ln2";
    ps.add(lname(side, i, (std::string(lnf) + ".g").c_str()), Tensor::full({c.d_model}, 1.0));
    ps.add(lname(side, i, (std::string(lnf) + ".b").c_str()), Tensor::zeros({c.d_model}));
    ps.add(lname(side, i, "ffn.w1"), Tensor::randn({c.d_model, c.d_ff}, rng, s_in));
    ps.add(lname(side, i, "ffn.w2"), Tensor::randn({c.d_ff, c.d_model}, rng, s_ff));
}

void check_ids(const std::vector<long>& ids, long vocab_size, const char* what) {
    for (long id : ids)
        if (id < 0 || id >= vocab_size)
            throw RangeError(std::string(what) + ": token id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(vocab_size));
}

constexpr double kMaskValue = -1e9;

// Per-head [Lq, Lk] bias gathered from the shared table; reused by every
// layer of one side within a single graph.
std::vector<Var> rel_bias_heads(Graph& g, Var table, long Lq, long Lk, bool bidirectional, const LMConfig& c) {
    std::vector<long> buckets;
    buckets.reserve(static_cast<std::size_t>(Lq * Lk));
    for (long i = 0; i < Lq; ++i)
        for (long j = 0; j < Lk; ++j) buckets.push_back(relative_bucket(j - i, bidirectional, c.rel_buckets, c.rel_max_distance));
    Var gathered = g.embedding(table, std::move(buckets));  // [Lq*Lk, H]
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(c.n_heads));
    for (long h = 0; h < c.n_heads; ++h) heads.push_back(g.reshape(g.slice_cols(gathered, h, 1), {Lq, Lk}));
    return heads;
}

// Additive key mask hiding <pad> source columns from every query row.
Var pad_key_mask(Graph& g, long Lq, const std::vector<long>& key_ids) {
    bool any = false;
    for (long id : key_ids) any = any || id == UnifiedVocab::kPad;
    if (!any) return Var{};
    long Lk = static_cast<long>(key_ids.size());
    Tensor m = Tensor::zeros({Lq, Lk});
    for (long j = 0; j < Lk; ++j)
        if (key_ids[static_cast<std::size_t>(j)] == UnifiedVocab::kPad)
            for (long i = 0; i < Lq; ++i) m.at(i, j) = kMaskValue;
    return g.constant(std::move(m));
}

Var causal_mask(Graph& g, long L) {
    Tensor m = Tensor::zeros({L, L});
    for (long i = 0; i < L; ++i)
        for (long j = i + 1; j < L; ++j) m.at(i, j) = kMaskValue;
    return g.constant(std::move(m));
}

struct Ctx {
    Graph& g;
    const LMWeights& w;
    const LMBound& b;
    double dropout;
    Rng* rng;

    Var drop(Var x) const { return (dropout > 0.0 && rng) ? g.dropout(x, dropout, *rng) : x; }
    Var ln(const std::string& prefix, Var x) const { return g.layer_norm(x, b.p.at(prefix + ".g"), b.p.at(prefix + ".b")); }
};

// bias_heads may be empty (cross-attention); mask may be invalid.
Var attention(const Ctx& c, const std::string& prefix, Var xq, Var xkv, const std::vector<Var>& bias_heads, Var mask) {
    Graph& g = c.g;
    const LMConfig& cfg = c.w.config;
    Var q = g.matmul(xq, c.b.p.at(prefix + ".wq"));
    Var k = g.matmul(xkv, c.b.p.at(prefix + ".wk"));
    Var v = g.matmul(xkv, c.b.p.at(prefix + ".wv"));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(cfg.n_heads));
    for (long h = 0; h < cfg.n_heads; ++h) {
        Var qh = g.slice_cols(q, h * cfg.d_kv, cfg.d_kv);
        Var kh = g.slice_cols(k, h * cfg.d_kv, cfg.d_kv);
        Var vh = g.slice_cols(v, h * cfg.d_kv, cfg.d_kv);
        Var bias;
        if (!bias_heads.empty()) bias = bias_heads[static_cast<std::size_t>(h)];
        if (mask.valid()) bias = bias.valid() ? g.add(bias, mask) : mask;
        outs.push_back(sdpa(g, qh, kh, vh, bias));
    }
    return g.matmul(g.concat_cols(outs), c.b.p.at(prefix + ".wo"));
}

Var ffn(const Ctx& c, const std::string& prefix, Var x) {
    return c.g.matmul(c.g.relu(c.g.matmul(x, c.b.p.at(prefix + ".w1"))), c.b.p.at(prefix + ".w2"));
}

}  // namespace

LMWeights init_lm(const LMConfig& config, long vocab_size, std::uint64_t seed) {
    config.validate();
    if (vocab_size < 2) throw ConfigError("lm: vocab_size must be >= 2");
    LMWeights w;
    w.config = config;
    w.vocab_size = vocab_size;
    Rng rng(hash_combine(seed, 0x1a));
    w.params.add("embed", Tensor::randn({vocab_size, config.d_model}, rng, 0.02));
    w.params.add("enc.relbias", Tensor::zeros({config.rel_buckets, config.n_heads}));
    w.params.add("dec.relbias", Tensor::zeros({config.rel_buckets, config.n_heads}));
    for (long i = 0; i < config.n_layers; ++i) add_block_params(w.params, "enc", i, config, false, rng);
    for (long i = 0; i < config.n_layers; ++i) add_block_params(w.params, "dec", i, config, true, rng);
    w.params.add("enc.final.g", Tensor::full({config.d_model}, 1.0));
    w.params.add("enc.final.b", Tensor::zeros({config.d_model}));
    w.params.add("dec.final.g", Tensor::full({config.d_model}, 1.0));
    w.params.add("dec.final.b", Tensor::zeros({config.d_model}));
    return w;
}

long relative_bucket(long rel, bool bidirectional, long num_buckets, long max_distance) {
    long bucket = 0;
    long nb = num_buckets;
    long r;
    if (bidirectional) {
        nb /= 2;
        if (rel > 0) bucket += nb;
        r = std::labs(rel);
    } else {
        r = rel < 0 ? -rel : 0;  // causal tables clamp future positions to bucket 0
    }
    long max_exact = nb / 2;
    if (r < max_exact) return bucket + r;
    double frac = std::log(static_cast<double>(r) / static_cast<double>(max_exact)) /
                  std::log(static_cast<double>(max_distance) / static_cast<double>(max_exact));
    long large = max_exact + static_cast<long>(frac * static_cast<double>(nb - max_exact));
    return bucket + std::min(large, nb - 1);
}

LMBound bind_lm(Graph& g, const LMWeights& w, bool requires_grad) {
    LMBound b;
    for (const auto& [name, tensor] : w.params.items()) b.p.emplace(name, g.input(tensor, requires_grad));
    b.embed = b.p.at("embed");
    b.embed_t = g.transpose(b.embed);
    return b;
}

Var encoder_forward(Graph& g, const LMWeights& w, const LMBound& b, const std::vector<long>& source_ids,
                    double dropout, Rng* drop_rng) {
    if (source_ids.empty()) throw ContractError("encoder: empty source");
    check_ids(source_ids, w.vocab_size, "encoder");
    const LMConfig& cfg = w.config;
    Ctx c{g, w, b, dropout, drop_rng};
    long Ls = static_cast<long>(source_ids.size());
    Var h = c.drop(g.embedding(b.embed, source_ids));
    std::vector<Var> rel = rel_bias_heads(g, b.p.at("enc.relbias"), Ls, Ls, true, cfg);
    Var mask = pad_key_mask(g, Ls, source_ids);
    for (long i = 0; i < cfg.n_layers; ++i) {
        std::string L = lname("enc", i, "");
        L.pop_back();  // "enc.Li"
        Var n1 = c.ln(L + ".ln1", h);
        h = g.add(h, c.drop(attention(c, L + ".attn", n1, n1, rel, mask)));
        Var f = ffn(c, L + ".ffn", c.ln(L + ".ln2", h));
        h = g.add(h, c.drop(f));
    }
    return c.ln("enc.final", h);
}

Var decoder_forward(Graph& g, const LMWeights& w, const LMBound& b, const std::vector<long>& decoder_input_ids,
                    Var enc_out, const std::vector<long>& source_ids, double dropout, Rng* drop_rng) {
    if (decoder_input_ids.empty()) throw ContractError("decoder: empty input");
    check_ids(decoder_input_ids, w.vocab_size, "decoder");
    const LMConfig& cfg = w.config;
    Ctx c{g, w, b, dropout, drop_rng};
    long Lt = static_cast<long>(decoder_input_ids.size());
    Var h = c.drop(g.embedding(b.embed, decoder_input_ids));
    std::vector<Var> rel = rel_bias_heads(g, b.p.at("dec.relbias"), Lt, Lt, false, cfg);
    Var self_mask = causal_mask(g, Lt);
    Var cross_mask = pad_key_mask(g, Lt, source_ids);
    for (long i = 0; i < cfg.n_layers; ++i) {
        std::string L = lname("dec", i, "");
        L.pop_back();
        Var n1 = c.ln(L + ".ln1", h);
        h = g.add(h, c.drop(attention(c, L + ".attn", n1, n1, rel, self_mask)));
        Var x = attention(c, L + ".cross", c.ln(L + ".ln2", h), enc_out, {}, cross_mask);
        h = g.add(h, c.drop(x));
        Var f = ffn(c, L + ".ffn", c.ln(L + ".ln3", h));
        h = g.add(h, c.drop(f));
    }
    return g.matmul(c.ln("dec.final", h), b.embed_t);  // [Lt, V]
}

LMLossParts lm_loss_graph(Graph& g, const LMWeights& w, const LMBound& b, const std::vector<long>& source_ids,
                          const std::vector<long>& target_ids, double dropout, Rng* drop_rng) {
    if (target_ids.empty()) throw ContractError("lm loss: empty target");
    check_ids(target_ids, w.vocab_size, "target");
    Var enc = encoder_forward(g, w, b, source_ids, dropout, drop_rng);
    std::vector<long> dec_in;
    dec_in.reserve(target_ids.size());
    dec_in.push_back(UnifiedVocab::kPad);  // decoder start
    dec_in.insert(dec_in.end(), target_ids.begin(), target_ids.end() - 1);
    Var logits = decoder_forward(g, w, b, dec_in, enc, source_ids, dropout, drop_rng);
    LMLossParts parts;
    parts.loss_sum = g.cross_entropy_sum(logits, target_ids, UnifiedVocab::kPad);
    parts.token_count = 0;
    for (long id : target_ids)
        if (id != UnifiedVocab::kPad) ++parts.token_count;
    if (parts.token_count == 0) throw ContractError("lm loss: target is all padding");
    return parts;
}

double lm_forward_loss(const LMWeights& w, const std::vector<long>& source_ids, const std::vector<long>& target_ids) {
    Graph g;
    LMBound b = bind_lm(g, w, false);
    LMLossParts parts = lm_loss_graph(g, w, b, source_ids, target_ids, 0.0, nullptr);
    return g.value(parts.loss_sum).item() / static_cast<double>(parts.token_count);
}

}  // namespace molang
