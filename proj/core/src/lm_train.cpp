#include "molang/lm_train.hpp"

#include <algorithm>
#include <cmath>

#include "molang/error.hpp"
#include "molang/span_corrupt.hpp"

namespace molang {

void PretrainMixture::validate() const {
    if (span_text < 0 || span_motion < 0 || t2m < 0 || m2t < 0)
        throw ConfigError("pretrain mixture: weights must be non-negative");
    double sum = span_text + span_motion + t2m + m2t;
    if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("pretrain mixture: weights must sum to 1");
}

void StageConfig::validate() const {
    if (steps < 1) throw ConfigError("train stage: steps must be >= 1");
    if (batch_size < 1) throw ConfigError("train stage: batch_size must be >= 1");
    if (lr <= 0.0) throw ConfigError("train stage: lr must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("train stage: dropout must lie in [0, 1)");
    if (log_every < 1) throw ConfigError("train stage: log_every must be >= 1");
    if (span_ratio < 0.0 || span_ratio >= 1.0) throw ConfigError("train stage: span_ratio must lie in [0, 1)");
    if (span_mean_len < 1.0) throw ConfigError("train stage: span_mean_len must be >= 1");
}

namespace {

// Clamp to the configured windows; a truncated target keeps </s> at its end.
SeqPair clipped(SeqPair pair, const LMConfig& cfg) {
    if (static_cast<long>(pair.source.size()) > cfg.max_source) pair.source.resize(static_cast<std::size_t>(cfg.max_source));
    if (static_cast<long>(pair.target.size()) > cfg.max_target) {
        pair.target.resize(static_cast<std::size_t>(cfg.max_target));
        pair.target.back() = UnifiedVocab::kEos;
    }
    return pair;
}

// One optimization step over assembled pairs; returns the token-mean loss.
double run_step(LMWeights& w, AdamW& opt, const std::vector<SeqPair>& batch, const StageConfig& cfg, Rng& drop_rng) {
    Graph g;
    LMBound b = bind_lm(g, w, true);
    Var loss_sum;
    long tokens = 0;
    for (const SeqPair& pair : batch) {
        LMLossParts parts = lm_loss_graph(g, w, b, pair.source, pair.target, cfg.dropout, &drop_rng);
        loss_sum = loss_sum.valid() ? g.add(loss_sum, parts.loss_sum) : parts.loss_sum;
        tokens += parts.token_count;
    }
    Var loss = g.scale(loss_sum, 1.0 / static_cast<double>(tokens));
    double loss_value = g.value(loss).item();
    if (!std::isfinite(loss_value)) throw NumericError("train stage: non-finite loss");
    g.backward(loss);

    std::vector<Tensor> grads;
    grads.reserve(b.p.size());
    for (const auto& [name, var] : b.p) {
        (void)name;
        grads.push_back(g.grad(var));
    }
    std::vector<Tensor*> grad_ptrs;
    grad_ptrs.reserve(grads.size());
    for (Tensor& t : grads) grad_ptrs.push_back(&t);
    if (cfg.grad_clip > 0.0) AdamW::clip_global_norm(grad_ptrs, cfg.grad_clip);

    std::vector<std::pair<Tensor*, const Tensor*>> updates;
    std::size_t gi = 0;
    for (auto& [name, tensor] : w.params.items()) {
        (void)name;
        updates.emplace_back(&tensor, &grads[gi++]);
    }
    opt.step(updates);
    return loss_value;
}

template <typename MakeBatch>
TrainLog run_stage(LMWeights& w, const StageConfig& cfg, MakeBatch&& make_batch) {
    AdamWConfig oc;
    oc.lr = cfg.lr;
    AdamW opt(oc);
    TrainLog log;
    for (long step = 0; step < cfg.steps; ++step) {
        Rng drop_rng(hash_combine(hash_combine(cfg.seed, 0xd409), static_cast<std::uint64_t>(step)));
        double loss = run_step(w, opt, make_batch(step), cfg, drop_rng);
        if (step % cfg.log_every == 0 || step + 1 == cfg.steps) log.entries.push_back({step, loss});
        log.final_loss = loss;
    }
    return log;
}

}  // namespace

TrainLog train_pairs(LMWeights& w, const std::vector<SeqPair>& pairs, const StageConfig& config) {
    config.validate();
    if (pairs.empty()) throw ConfigError("train stage: no pairs supplied");
    for (const SeqPair& p : pairs)
        if (p.source.empty() || p.target.empty()) throw ConfigError("train stage: pairs must be non-empty");
    Rng data_rng(hash_combine(config.seed, 0xda7a));
    return run_stage(w, config, [&](long) {
        std::vector<SeqPair> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (long i = 0; i < config.batch_size; ++i)
            batch.push_back(clipped(pairs[static_cast<std::size_t>(data_rng.next_below(pairs.size()))], w.config));
        return batch;
    });
}

TrainLog train_pretrain(LMWeights& w, const PretrainData& data, const PretrainMixture& mixture,
                        const StageConfig& config, const UnifiedVocab& vocab) {
    config.validate();
    mixture.validate();
    if (mixture.span_text > 0 && data.text_streams.empty())
        throw ConfigError("pretrain: span_text weighted but no text streams");
    if (mixture.span_motion > 0 && data.motion_streams.empty())
        throw ConfigError("pretrain: span_motion weighted but no motion streams");
    if (mixture.t2m > 0 && data.t2m_pairs.empty()) throw ConfigError("pretrain: t2m weighted but no pairs");
    if (mixture.m2t > 0 && data.m2t_pairs.empty()) throw ConfigError("pretrain: m2t weighted but no pairs");
    if (config.corrupt_streams_jointly && (mixture.span_text > 0 || mixture.span_motion > 0) &&
        (data.text_streams.empty() || data.motion_streams.empty()))
        throw ConfigError("pretrain: joint corruption needs both stream types");

    Rng data_rng(hash_combine(config.seed, 0xda7a));
    std::uint64_t corrupt_counter = 0;

    auto corrupted = [&](const std::vector<long>& stream) {
        SpanCorruptResult r = span_corrupt(stream, config.span_ratio, config.span_mean_len,
                                           hash_combine(hash_combine(config.seed, 0x5ba), corrupt_counter++), vocab);
        SeqPair pair;
        pair.source = std::move(r.source);
        pair.target = std::move(r.target);
        pair.target.push_back(UnifiedVocab::kEos);
        return pair;
    };

    return run_stage(w, config, [&](long) {
        std::vector<SeqPair> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (long i = 0; i < config.batch_size; ++i) {
            double u = data_rng.next_double();
            SeqPair pair;
            if (u < mixture.span_text) {
                if (config.corrupt_streams_jointly) {
                    std::vector<long> joint = data.text_streams[static_cast<std::size_t>(data_rng.next_below(data.text_streams.size()))];
                    const std::vector<long>& m = data.motion_streams[static_cast<std::size_t>(data_rng.next_below(data.motion_streams.size()))];
                    joint.insert(joint.end(), m.begin(), m.end());
                    pair = corrupted(joint);
                } else {
                    pair = corrupted(data.text_streams[static_cast<std::size_t>(data_rng.next_below(data.text_streams.size()))]);
                }
            } else if (u < mixture.span_text + mixture.span_motion) {
                if (config.corrupt_streams_jointly) {
                    std::vector<long> joint = data.motion_streams[static_cast<std::size_t>(data_rng.next_below(data.motion_streams.size()))];
                    const std::vector<long>& t = data.text_streams[static_cast<std::size_t>(data_rng.next_below(data.text_streams.size()))];
                    joint.insert(joint.end(), t.begin(), t.end());
                    pair = corrupted(joint);
                } else {
                    pair = corrupted(data.motion_streams[static_cast<std::size_t>(data_rng.next_below(data.motion_streams.size()))]);
                }
            } else if (u < mixture.span_text + mixture.span_motion + mixture.t2m) {
                pair = data.t2m_pairs[static_cast<std::size_t>(data_rng.next_below(data.t2m_pairs.size()))];
            } else {
                pair = data.m2t_pairs[static_cast<std::size_t>(data_rng.next_below(data.m2t_pairs.size()))];
            }
            batch.push_back(clipped(std::move(pair), w.config));
        }
        return batch;
    });
}

double mean_pair_loss(const LMWeights& w, const std::vector<SeqPair>& pairs) {
    if (pairs.empty()) throw ConfigError("mean_pair_loss: no pairs");
    double total = 0.0;
    for (const SeqPair& p : pairs) total += lm_forward_loss(w, p.source, p.target);
    return total / static_cast<double>(pairs.size());
}

}  // namespace molang
