#pragma once

#include <cstdint>
#include <vector>

#include "molang/lm.hpp"

namespace molang {

enum class DecodeMode { Greedy, Sample, Beam };

struct GenerationConfig {
    DecodeMode mode = DecodeMode::Greedy;
    double temperature = 1.0;  // > 0; applies to Sample only
    long beam_width = 1;       // >= 1; Beam with width 1 matches Greedy exactly
    long max_new_tokens = 64;
    std::uint64_t seed = 0;    // Sample only

    void validate() const;  // ConfigError on violation (beam width 0 included)
};

struct GenerationResult {
    std::vector<long> ids;  // generated tokens; includes </s> when it fired
    // log-probability of each emitted token under the distribution it was
    // drawn from (temperature-scaled for Sample)
    std::vector<double> step_logprobs;
    double sequence_logprob = 0.0;  // sum of step_logprobs
    bool ended_with_eos = false;
};

// Autoregressive decode. Greedy takes the argmax each step with lowest-index
// tie-breaking; Sample draws from the temperature-scaled softmax with a
// seeded RNG; Beam keeps `beam_width` hypotheses ranked by mean per-token
// log-probability, breaking ties toward lexicographically smaller token ids.
// Decoding stops at </s> or after max_new_tokens.
GenerationResult generate(const LMWeights& w, const std::vector<long>& source_ids, const GenerationConfig& config);

}  // namespace molang
