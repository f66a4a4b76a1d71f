#include "molang/vq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "molang/error.hpp"
#include "molang/skeleton.hpp"

namespace molang {

long TokenizerConfig::stages() const {
    long s = 0;
    for (long v = l; v > 1; v /= 2) ++s;
    return s;
}

void TokenizerConfig::validate() const {
    if (K < 2) throw ConfigError("tokenizer: K must be >= 2");
    if (d < 1) throw ConfigError("tokenizer: d must be >= 1");
    if (l != 2 && l != 4 && l != 8) throw ConfigError("tokenizer: l must be one of {2, 4, 8}");
    if (hidden < 1) throw ConfigError("tokenizer: hidden width must be >= 1");
    if (beta < 0.0 || lambda_v < 0.0) throw ConfigError("tokenizer: loss weights must be non-negative");
    if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("tokenizer: gamma must lie in (0, 1)");
    if (tau < 0.0) throw ConfigError("tokenizer: tau must be non-negative");
}

TokenizerConfig desk_tokenizer_config() {
    TokenizerConfig c;
    c.K = 512;
    c.d = 64;
    c.l = 4;
    c.hidden = 64;
    return c;
}

namespace {

std::string pname(const char* side, long stage, const char* leaf) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s.s%ld.%s", side, stage, leaf);
    return buf;
}

Tensor conv_init(long cout, long cin, long k, Rng& rng) {
    return Tensor::randn({cout, cin, k}, rng, std::sqrt(2.0 / static_cast<double>(cin * k)));
}

// conv(k=3,p=1) -> relu -> conv(k=3,p=1) -> relu, added back to the input.
Var residual_block(Graph& g, const BoundParams& p, const std::string& prefix, Var h) {
    Var r = g.conv1d(g.relu(h), p.at(prefix + ".c1.w"), p.at(prefix + ".c1.b"), 1, 1);
    r = g.conv1d(g.relu(r), p.at(prefix + ".c2.w"), p.at(prefix + ".c2.b"), 1, 1);
    return g.add(h, r);
}

}  // namespace

Tokenizer init_tokenizer(const TokenizerConfig& config, long feature_dim, std::uint64_t seed) {
    config.validate();
    if (feature_dim < 1) throw ConfigError("tokenizer: feature_dim must be >= 1");
    Tokenizer tok;
    tok.config = config;
    tok.feature_dim = feature_dim;
    Rng rng(hash_combine(seed, 0x7160));

    long S = config.stages();
    for (long i = 0; i < S; ++i) {
        long cin = (i == 0) ? feature_dim : config.hidden;
        long cout = (i == S - 1) ? config.d : config.hidden;
        tok.params.add(pname("enc", i, "conv.w"), conv_init(cout, cin, 4, rng));
        tok.params.add(pname("enc", i, "conv.b"), Tensor::zeros({cout}));
        tok.params.add(pname("enc", i, "res.c1.w"), conv_init(cout, cout, 3, rng));
        tok.params.add(pname("enc", i, "res.c1.b"), Tensor::zeros({cout}));
        tok.params.add(pname("enc", i, "res.c2.w"), conv_init(cout, cout, 3, rng));
        tok.params.add(pname("enc", i, "res.c2.b"), Tensor::zeros({cout}));
    }
    for (long i = 0; i < S; ++i) {
        long cin = (i == 0) ? config.d : config.hidden;
        long cout = config.hidden;
        tok.params.add(pname("dec", i, "conv.w"), conv_init(cout, cin, 3, rng));
        tok.params.add(pname("dec", i, "conv.b"), Tensor::zeros({cout}));
        tok.params.add(pname("dec", i, "res.c1.w"), conv_init(cout, cout, 3, rng));
        tok.params.add(pname("dec", i, "res.c1.b"), Tensor::zeros({cout}));
        tok.params.add(pname("dec", i, "res.c2.w"), conv_init(cout, cout, 3, rng));
        tok.params.add(pname("dec", i, "res.c2.b"), Tensor::zeros({cout}));
    }
    tok.params.add("dec.out.w", conv_init(feature_dim, config.hidden, 3, rng));
    tok.params.add("dec.out.b", Tensor::zeros({feature_dim}));

    tok.codebook.entries = Tensor::zeros({config.K, config.d});
    tok.codebook.ema_cluster_size = Tensor::full({config.K}, 1.0);
    tok.codebook.ema_embed_sum = Tensor::zeros({config.K, config.d});
    tok.codebook.usage.assign(static_cast<std::size_t>(config.K), 0);

    tok.feat_mu = Tensor::zeros({feature_dim});
    tok.feat_sigma = Tensor::full({feature_dim}, 1.0);
    return tok;
}

BoundParams bind_params(Graph& g, const Tokenizer& tok, bool requires_grad) {
    BoundParams bound;
    for (auto& [name, tensor] : tok.params.items()) bound.emplace(name, g.input(tensor, requires_grad));
    return bound;
}

Var encode_pass(Graph& g, const Tokenizer& tok, const BoundParams& p, Var features) {
    const Tensor& x = g.value(features);
    if (x.rank() != 2 || x.dim(1) != tok.feature_dim)
        throw ShapeError("encode: features must be [M, " + std::to_string(tok.feature_dim) + "], got " + shape_str(x.shape()));
    if (x.dim(0) % tok.config.l != 0 || x.dim(0) < tok.config.l)
        throw ContractError("encode: frame count must be a positive multiple of l");
    Var h = g.transpose(features);  // [D, M]
    long S = tok.config.stages();
    for (long i = 0; i < S; ++i) {
        h = g.conv1d(h, p.at(pname("enc", i, "conv.w")), p.at(pname("enc", i, "conv.b")), 2, 1);
        h = residual_block(g, p, pname("enc", i, "res"), h);
        h = g.relu(h);
    }
    return g.transpose(h);  // [L, d]
}

Var decode_pass(Graph& g, const Tokenizer& tok, const BoundParams& p, Var quantized) {
    const Tensor& q = g.value(quantized);
    if (q.rank() != 2 || q.dim(1) != tok.config.d)
        throw ShapeError("decode: quantized must be [L, " + std::to_string(tok.config.d) + "], got " + shape_str(q.shape()));
    if (q.dim(0) < 1) throw ContractError("decode: need at least one code");
    Var h = g.transpose(quantized);  // [d, L]
    long S = tok.config.stages();
    for (long i = 0; i < S; ++i) {
        h = g.upsample_nn(h, 2);
        h = g.conv1d(h, p.at(pname("dec", i, "conv.w")), p.at(pname("dec", i, "conv.b")), 1, 1);
        h = residual_block(g, p, pname("dec", i, "res"), h);
        h = g.relu(h);
    }
    h = g.conv1d(h, p.at("dec.out.w"), p.at("dec.out.b"), 1, 1);  // [D, M]
    return g.transpose(h);
}

QuantizeResult quantize(const Tensor& latents, const Codebook& codebook) {
    const Tensor& e = codebook.entries;
    if (e.rank() != 2 || e.dim(0) < 1) throw ContractError("quantize: codebook is empty");
    if (latents.rank() != 2 || latents.dim(1) != e.dim(1))
        throw ShapeError("quantize: latent width " + shape_str(latents.shape()) + " vs codebook " + shape_str(e.shape()));
    long L = latents.dim(0), d = latents.dim(1), K = e.dim(0);
    QuantizeResult out;
    out.ids.resize(static_cast<std::size_t>(L));
    out.quantized = Tensor::zeros({L, d});
    const double* zp = latents.data();
    const double* ep = e.data();
    for (long i = 0; i < L; ++i) {
        const double* z = zp + i * d;
        long best = 0;
        double best_dist = 0.0;
        for (long k = 0; k < K; ++k) {
            const double* row = ep + k * d;
            double dist = 0.0;
            for (long j = 0; j < d; ++j) {
                double diff = z[j] - row[j];
                dist += diff * diff;
            }
            if (k == 0 || dist < best_dist) {  // ties keep the lowest index
                best_dist = dist;
                best = k;
            }
        }
        out.ids[static_cast<std::size_t>(i)] = best;
        std::copy(ep + best * d, ep + (best + 1) * d, out.quantized.data() + i * d);
    }
    return out;
}

QuantizeResult quantize_st(Graph& g, Var latents, const Codebook& codebook) {
    QuantizeResult out = quantize(g.value(latents), codebook);
    out.ste_out = g.ste(latents, out.quantized);
    return out;
}

TokenizerLossVars tokenizer_loss(Graph& g, const Tokenizer& tok, const BoundParams& p,
                                 const std::vector<Tensor>& batch_features) {
    if (batch_features.empty()) throw ContractError("tokenizer_loss: empty batch");
    for (const Tensor& f : batch_features)
        if (!f.same_shape(batch_features.front()))
            throw ContractError("tokenizer_loss: batch windows must share one shape");
    long M = batch_features.front().dim(0);
    if (M < 2) throw ContractError("tokenizer_loss: need at least two frames for the velocity term");

    TokenizerLossVars out;
    Var recon_acc, vel_acc, commit_acc;
    double embed_acc = 0.0;
    for (const Tensor& window : batch_features) {
        Var x = g.constant(window);
        Var lat = encode_pass(g, tok, p, x);
        QuantizeResult qr = quantize_st(g, lat, tok.codebook);
        Var recon = decode_pass(g, tok, p, qr.ste_out);

        Var r_loss = g.mean(g.smooth_l1(g.sub(recon, x)));
        Var d_recon = g.sub(g.slice_rows(recon, 1, M - 1), g.slice_rows(recon, 0, M - 1));
        Var d_x = g.sub(g.slice_rows(x, 1, M - 1), g.slice_rows(x, 0, M - 1));
        Var v_loss = g.mean(g.smooth_l1(g.sub(d_recon, d_x)));
        Var c_loss = g.mean(g.square(g.sub(lat, g.constant(qr.quantized))));

        recon_acc = recon_acc.valid() ? g.add(recon_acc, r_loss) : r_loss;
        vel_acc = vel_acc.valid() ? g.add(vel_acc, v_loss) : v_loss;
        commit_acc = commit_acc.valid() ? g.add(commit_acc, c_loss) : c_loss;
        embed_acc += g.value(c_loss).item();

        out.batch_ids.push_back(qr.ids);
        out.batch_latents.push_back(g.value(lat));
    }
    double inv_b = 1.0 / static_cast<double>(batch_features.size());
    Var recon_mean = g.scale(recon_acc, inv_b);
    Var vel_mean = g.scale(vel_acc, inv_b);
    Var commit_mean = g.scale(g.scale(commit_acc, inv_b), tok.config.beta);
    out.train_loss = g.add(g.add(recon_mean, g.scale(vel_mean, tok.config.lambda_v)), commit_mean);

    out.values.recon = g.value(recon_mean).item();
    out.values.velocity = g.value(vel_mean).item();
    out.values.commit = g.value(commit_mean).item();
    out.values.embed = embed_acc * inv_b;
    out.values.total = out.values.recon + tok.config.lambda_v * out.values.velocity + out.values.embed + out.values.commit;
    return out;
}

void ema_update(Codebook& codebook, const std::vector<Tensor>& batch_latents,
                const std::vector<std::vector<long>>& batch_ids, double gamma) {
    if (batch_latents.size() != batch_ids.size()) throw ContractError("ema_update: latents/ids count mismatch");
    long K = codebook.entries.dim(0), d = codebook.entries.dim(1);
    std::vector<double> n(static_cast<std::size_t>(K), 0.0);
    Tensor sums = Tensor::zeros({K, d});
    for (std::size_t b = 0; b < batch_ids.size(); ++b) {
        const Tensor& lat = batch_latents[b];
        const std::vector<long>& ids = batch_ids[b];
        if (lat.dim(0) != static_cast<long>(ids.size())) throw ContractError("ema_update: ids/latent row mismatch");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            long k = ids[i];
            if (k < 0 || k >= K) throw RangeError("ema_update: id out of range");
            n[static_cast<std::size_t>(k)] += 1.0;
            const double* src = lat.data() + static_cast<long>(i) * d;
            double* dst = sums.data() + k * d;
            for (long j = 0; j < d; ++j) dst[j] += src[j];
        }
    }
    double* N = codebook.ema_cluster_size.data();
    double* S = codebook.ema_embed_sum.data();
    double* E = codebook.entries.data();
    for (long k = 0; k < K; ++k) {
        N[k] = gamma * N[k] + (1.0 - gamma) * n[static_cast<std::size_t>(k)];
        const double* sk = sums.data() + k * d;
        double denom = std::max(N[k], 1e-5);
        for (long j = 0; j < d; ++j) {
            S[k * d + j] = gamma * S[k * d + j] + (1.0 - gamma) * sk[j];
            E[k * d + j] = S[k * d + j] / denom;
        }
        codebook.usage[static_cast<std::size_t>(k)] += static_cast<long>(n[static_cast<std::size_t>(k)]);
    }
}

long reset_dead_codes(Codebook& codebook, const std::vector<Tensor>& reservoir, double tau, Rng& rng) {
    if (reservoir.empty()) return 0;
    long K = codebook.entries.dim(0), d = codebook.entries.dim(1);
    long resets = 0;
    double* N = codebook.ema_cluster_size.data();
    double* S = codebook.ema_embed_sum.data();
    double* E = codebook.entries.data();
    for (long k = 0; k < K; ++k) {
        if (N[k] >= tau) continue;
        const Tensor& row = reservoir[static_cast<std::size_t>(rng.next_below(reservoir.size()))];
        if (row.rank() != 1 || row.dim(0) != d) throw ShapeError("reset_dead_codes: reservoir row width mismatch");
        for (long j = 0; j < d; ++j) {
            E[k * d + j] = row.data()[j];
            S[k * d + j] = row.data()[j];
        }
        N[k] = 1.0;
        ++resets;
    }
    return resets;
}

Tensor normalize_features(const Tokenizer& tok, const Tensor& frames) {
    if (frames.rank() != 2 || frames.dim(1) != tok.feature_dim)
        throw ShapeError("normalize_features: got " + shape_str(frames.shape()));
    Tensor out = frames;
    const double* mu = tok.feat_mu.data();
    const double* sg = tok.feat_sigma.data();
    for (long t = 0; t < out.dim(0); ++t)
        for (long j = 0; j < tok.feature_dim; ++j) out.at(t, j) = (out.at(t, j) - mu[j]) / sg[j];
    return out;
}

Tensor denormalize_features(const Tokenizer& tok, const Tensor& frames) {
    if (frames.rank() != 2 || frames.dim(1) != tok.feature_dim)
        throw ShapeError("denormalize_features: got " + shape_str(frames.shape()));
    Tensor out = frames;
    const double* mu = tok.feat_mu.data();
    const double* sg = tok.feat_sigma.data();
    for (long t = 0; t < out.dim(0); ++t)
        for (long j = 0; j < tok.feature_dim; ++j) out.at(t, j) = out.at(t, j) * sg[j] + mu[j];
    return out;
}

Tensor encode_features(const Tokenizer& tok, const MotionFeatures& features) {
    long M = features.frames.rank() == 0 ? 0 : features.frames.dim(0);
    if (M < tok.config.l)
        throw InsufficientFramesError("encode: need at least " + std::to_string(tok.config.l) + " frames, got " + std::to_string(M));
    long keep = (M / tok.config.l) * tok.config.l;
    Tensor window = Tensor::zeros({keep, tok.feature_dim});
    if (features.frames.dim(1) != tok.feature_dim) throw ShapeError("encode: feature width mismatch");
    std::copy(features.frames.data(), features.frames.data() + keep * tok.feature_dim, window.data());
    Graph g;
    BoundParams p = bind_params(g, tok, false);
    Var lat = encode_pass(g, tok, p, g.constant(normalize_features(tok, window)));
    return g.value(lat);
}

std::vector<long> tokenize_motion(const Tokenizer& tok, const MotionSequence& motion) {
    long M = motion.positions.rank() == 0 ? 0 : motion.positions.dim(0);
    if (M < std::max<long>(tok.config.l, 2))
        throw InsufficientFramesError("tokenize: motion too short (" + std::to_string(M) + " frames)");
    MotionFeatures f = features_from_positions(motion);
    return quantize(encode_features(tok, f), tok.codebook).ids;
}

MotionSequence detokenize_motion(const Tokenizer& tok, const std::vector<long>& ids, double fps) {
    if (ids.empty()) throw ContractError("detokenize: empty id list");
    for (long id : ids)
        if (id < 0 || id >= tok.config.K) throw RangeError("detokenize: motion token id " + std::to_string(id) + " out of range");
    if (feature_width(13) != tok.feature_dim)
        throw ContractError("detokenize: tokenizer feature width does not match the 13-joint layout");
    long L = static_cast<long>(ids.size()), d = tok.config.d;
    Tensor q = Tensor::zeros({L, d});
    for (long i = 0; i < L; ++i)
        std::copy(tok.codebook.entries.data() + ids[static_cast<std::size_t>(i)] * d,
                  tok.codebook.entries.data() + (ids[static_cast<std::size_t>(i)] + 1) * d, q.data() + i * d);
    Graph g;
    BoundParams p = bind_params(g, tok, false);
    Var recon = decode_pass(g, tok, p, g.constant(std::move(q)));
    MotionFeatures f;
    f.fps = fps;
    f.frames = denormalize_features(tok, g.value(recon));
    f.root_init[0] = 0.0;
    f.root_init[1] = 0.0;
    return positions_from_features(humanoid13(), f);
}

}  // namespace molang
