#include "molang/vq_train.hpp"

#include <algorithm>
#include <cmath>

#include "molang/error.hpp"

namespace molang {

void TokenizerTrainConfig::validate() const {
    if (steps < 1) throw ConfigError("tokenizer train: steps must be >= 1");
    if (batch_size < 1) throw ConfigError("tokenizer train: batch_size must be >= 1");
    if (crop_frames < 2) throw ConfigError("tokenizer train: crop_frames must be >= 2");
    if (lr <= 0.0) throw ConfigError("tokenizer train: lr must be positive");
    if (log_every < 1) throw ConfigError("tokenizer train: log_every must be >= 1");
}

namespace {

constexpr std::size_t kReservoirCap = 512;

struct Reservoir {
    std::vector<Tensor> rows;
    std::uint64_t seen = 0;

    void add(const Tensor& latents, Rng& rng) {
        long L = latents.dim(0), d = latents.dim(1);
        for (long i = 0; i < L; ++i) {
            Tensor row = Tensor::zeros({d});
            std::copy(latents.data() + i * d, latents.data() + (i + 1) * d, row.data());
            ++seen;
            if (rows.size() < kReservoirCap) {
                rows.push_back(std::move(row));
            } else {
                std::uint64_t j = rng.next_below(seen);
                if (j < kReservoirCap) rows[static_cast<std::size_t>(j)] = std::move(row);
            }
        }
    }

    void clear() {
        rows.clear();
        seen = 0;
    }
};

std::vector<Tensor> draw_batch(const std::vector<Tensor>& normed, long batch_size, long W, Rng& rng) {
    std::vector<Tensor> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    long D = normed.front().dim(1);
    for (long b = 0; b < batch_size; ++b) {
        const Tensor& seq = normed[static_cast<std::size_t>(rng.next_below(normed.size()))];
        long M = seq.dim(0);
        long offset = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(M - W + 1)));
        Tensor window = Tensor::zeros({W, D});
        std::copy(seq.data() + offset * D, seq.data() + (offset + W) * D, window.data());
        batch.push_back(std::move(window));
    }
    return batch;
}

void seed_codebook(Tokenizer& tok, const std::vector<Tensor>& batch) {
    Graph g;
    BoundParams p = bind_params(g, tok, false);
    std::vector<Tensor> latents;
    latents.reserve(batch.size());
    for (const Tensor& window : batch) latents.push_back(g.value(encode_pass(g, tok, p, g.constant(window))));
    long d = tok.config.d;
    long total = 0;
    for (const Tensor& lat : latents) total += lat.dim(0);
    double* E = tok.codebook.entries.data();
    double* S = tok.codebook.ema_embed_sum.data();
    for (long k = 0; k < tok.config.K; ++k) {
        long pick = k % total;  // cycle when the batch yields fewer rows than K
        const double* src = nullptr;
        for (const Tensor& lat : latents) {
            if (pick < lat.dim(0)) {
                src = lat.data() + pick * d;
                break;
            }
            pick -= lat.dim(0);
        }
        for (long j = 0; j < d; ++j) {
            E[k * d + j] = src[j];
            S[k * d + j] = src[j];
        }
        tok.codebook.ema_cluster_size.data()[k] = 1.0;
    }
    tok.codebook_ready = true;
}

}  // namespace

TokenizerTrainResult train_tokenizer(const std::vector<MotionFeatures>& dataset, const TokenizerConfig& config,
                                     const TokenizerTrainConfig& train) {
    config.validate();
    train.validate();
    if (dataset.empty()) throw ConfigError("tokenizer train: empty dataset");
    long D = dataset.front().frames.rank() == 2 ? dataset.front().frames.dim(1) : 0;
    if (D < 1) throw ConfigError("tokenizer train: dataset has no feature columns");
    long min_M = dataset.front().frames.dim(0);
    for (const MotionFeatures& f : dataset) {
        if (f.frames.rank() != 2 || f.frames.dim(1) != D)
            throw ConfigError("tokenizer train: inconsistent feature widths in dataset");
        min_M = std::min(min_M, f.frames.dim(0));
    }
    if (min_M < config.l) throw InsufficientFramesError("tokenizer train: shortest sequence is below the downsample rate");

    TokenizerTrainResult result;
    result.tokenizer = init_tokenizer(config, D, train.seed);
    Tokenizer& tok = result.tokenizer;

    // Population z-score statistics over every frame of the training set.
    {
        double count = 0.0;
        Tensor mu = Tensor::zeros({D}), m2 = Tensor::zeros({D});
        for (const MotionFeatures& f : dataset)
            for (long t = 0; t < f.frames.dim(0); ++t) {
                count += 1.0;
                for (long j = 0; j < D; ++j) {
                    double x = f.frames.at(t, j);
                    double delta = x - mu.data()[j];
                    mu.data()[j] += delta / count;
                    m2.data()[j] += delta * (x - mu.data()[j]);
                }
            }
        for (long j = 0; j < D; ++j) {
            tok.feat_mu.data()[j] = mu.data()[j];
            tok.feat_sigma.data()[j] = std::max(std::sqrt(m2.data()[j] / count), 1e-6);
        }
    }

    std::vector<Tensor> normed;
    normed.reserve(dataset.size());
    for (const MotionFeatures& f : dataset) normed.push_back(normalize_features(tok, f.frames));

    long W = std::min(train.crop_frames, min_M);
    W = (W / config.l) * config.l;
    if (W < config.l) throw ContractError("tokenizer train: crop window shorter than the downsample rate");

    Rng rng_batch(hash_combine(train.seed, 1));
    Rng rng_res(hash_combine(train.seed, 2));
    Rng rng_reset(hash_combine(train.seed, 3));

    seed_codebook(tok, draw_batch(normed, train.batch_size, W, rng_batch));

    AdamWConfig opt_cfg;
    opt_cfg.lr = train.lr;
    AdamW opt(opt_cfg);
    Reservoir reservoir;
    long steps_per_epoch = (static_cast<long>(dataset.size()) + train.batch_size - 1) / train.batch_size;

    for (long step = 0; step < train.steps; ++step) {
        std::vector<Tensor> batch = draw_batch(normed, train.batch_size, W, rng_batch);
        Graph g;
        BoundParams p = bind_params(g, tok, true);
        TokenizerLossVars loss = tokenizer_loss(g, tok, p, batch);
        if (!std::isfinite(loss.values.total)) throw NumericError("tokenizer train: non-finite loss at step " + std::to_string(step));
        g.backward(loss.train_loss);

        std::vector<Tensor> grads;
        grads.reserve(tok.params.items().size());
        std::vector<Tensor*> grad_ptrs;
        for (auto& [name, var] : p) {
            (void)name;
            grads.push_back(g.grad(var));
        }
        for (Tensor& t : grads) grad_ptrs.push_back(&t);
        if (train.grad_clip > 0.0) AdamW::clip_global_norm(grad_ptrs, train.grad_clip);

        std::vector<std::pair<Tensor*, const Tensor*>> updates;
        std::size_t gi = 0;
        for (auto& [name, tensor] : tok.params.items()) {
            (void)name;
            updates.emplace_back(&tensor, &grads[gi++]);
        }
        opt.step(updates);

        ema_update(tok.codebook, loss.batch_latents, loss.batch_ids, config.gamma);
        for (const Tensor& lat : loss.batch_latents) reservoir.add(lat, rng_res);

        if (step % train.log_every == 0 || step + 1 == train.steps)
            result.log.push_back({step, loss.values});

        if ((step + 1) % steps_per_epoch == 0) {
            result.codes_reset += reset_dead_codes(tok.codebook, reservoir.rows, config.tau, rng_reset);
            reservoir.clear();
            ++result.epochs;
        }
    }
    return result;
}

}  // namespace molang
