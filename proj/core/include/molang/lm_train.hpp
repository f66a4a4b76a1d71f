#pragma once

#include <cstdint>
#include <vector>

#include "molang/lm.hpp"
#include "molang/vocab.hpp"

namespace molang {

struct SeqPair {
    std::vector<long> source;
    std::vector<long> target;  // should end with </s>
};

// Mixing weights over the four pretraining components; must be non-negative
// and sum to 1. A positive weight whose dataset is empty is a ConfigError.
struct PretrainMixture {
    double span_text = 0.25;
    double span_motion = 0.25;
    double t2m = 0.25;
    double m2t = 0.25;

    void validate() const;
};

struct PretrainData {
    std::vector<std::vector<long>> text_streams;    // caption token ids
    std::vector<std::vector<long>> motion_streams;  // motion-word ids, unwrapped
    std::vector<SeqPair> t2m_pairs;
    std::vector<SeqPair> m2t_pairs;
};

struct StageConfig {
    long steps = 2000;
    long batch_size = 4;
    double lr = 2e-4;  // pretrain default; instruction tuning uses 1e-4
    double grad_clip = 1.0;
    double dropout = 0.1;
    std::uint64_t seed = 0;
    long log_every = 50;
    double span_ratio = 0.15;
    double span_mean_len = 3.0;
    // When set, span corruption draws one text stream and one motion stream
    // and corrupts their concatenation as a single sequence; by default each
    // stream type is corrupted separately.
    bool corrupt_streams_jointly = false;

    void validate() const;
};

struct StepLoss {
    long step = 0;
    double loss = 0.0;
};

struct TrainLog {
    std::vector<StepLoss> entries;
    double final_loss = 0.0;
};

// Supervised seq2seq stage over explicit pairs (instruction tuning and the
// paired-translation component share this path). Deterministic per seed.
TrainLog train_pairs(LMWeights& w, const std::vector<SeqPair>& pairs, const StageConfig& config);

// Mixture pretraining: each batch slot draws a component by mixture weight,
// then a uniform item; span components run span_corrupt with a per-sample
// seed and append </s> to the target.
TrainLog train_pretrain(LMWeights& w, const PretrainData& data, const PretrainMixture& mixture,
                        const StageConfig& config, const UnifiedVocab& vocab);

// Evaluation-mode mean loss over a pair list (e.g. a held-out split).
double mean_pair_loss(const LMWeights& w, const std::vector<SeqPair>& pairs);

}  // namespace molang
