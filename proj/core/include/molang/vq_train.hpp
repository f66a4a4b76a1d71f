#pragma once

#include <cstdint>
#include <vector>

#include "molang/vq.hpp"

namespace molang {

struct TokenizerTrainConfig {
    long steps = 2000;
    long batch_size = 32;
    long crop_frames = 64;  // training window; clamped to the shortest sequence
    double lr = 1e-4;
    double grad_clip = 1.0;  // <= 0 disables clipping
    std::uint64_t seed = 0;
    long log_every = 50;

    void validate() const;
};

struct TokenizerLogEntry {
    long step = 0;
    LossBreakdown loss;
};

struct TokenizerTrainResult {
    Tokenizer tokenizer;
    std::vector<TokenizerLogEntry> log;
    long epochs = 0;
    long codes_reset = 0;  // dead-code reseeds summed over epoch boundaries
};

// Deterministic single-threaded trainer. Feature z-score statistics come
// from the whole training set and are frozen into the tokenizer; the
// codebook is seeded from the first batch's encoder latents; dead codes are
// re-seeded from a reservoir of the finished epoch's latents.
TokenizerTrainResult train_tokenizer(const std::vector<MotionFeatures>& dataset, const TokenizerConfig& config,
                                     const TokenizerTrainConfig& train);

}  // namespace molang
