#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molang/graph.hpp"
#include "molang/optim.hpp"

namespace molang {

struct LMConfig {
    long d_model = 768;
    long n_layers = 12;  // encoder and decoder each
    long n_heads = 12;
    long d_kv = 64;
    long d_ff = 3072;
    double dropout = 0.1;     // training-time; evaluation always runs at 0
    long rel_buckets = 32;    // relative-position buckets per bias table
    long rel_max_distance = 128;
    long max_source = 256;
    long max_target = 192;

    void validate() const;  // ConfigError on nonpositive dimensions
};

// Returns human-readable notes for legal-but-odd settings, e.g. when
// d_model != n_heads * d_kv.
std::vector<std::string> config_warnings(const LMConfig& config);

LMConfig desk_lm_config();   // {128, 4, 4, 32, 512}
LMConfig small_lm_config();  // {512, 6, 8, 64, 2048}
LMConfig base_lm_config();   // {768, 12, 12, 64, 3072}
LMConfig large_lm_config();  // {1024, 24, 16, 64, 4096}

// Encoder-decoder transformer with a shared token embedding that doubles as
// the output projection. Pre-LN blocks; relative-position bias on
// self-attention only, one table per side shared across its layers.
struct LMWeights {
    LMConfig config;
    long vocab_size = 0;
    ParamStore params;
};

LMWeights init_lm(const LMConfig& config, long vocab_size, std::uint64_t seed);

// T5-style log-spaced distance bucketing. `rel` is key position minus query
// position; bidirectional tables split buckets between signs, causal tables
// only see rel <= 0.
long relative_bucket(long rel, bool bidirectional, long num_buckets, long max_distance);

// Parameters bound into a graph plus the shared derived views.
struct LMBound {
    BoundParams p;
    Var embed;    // [V, d_model]
    Var embed_t;  // [d_model, V], logits projection (tied)
};

LMBound bind_lm(Graph& g, const LMWeights& w, bool requires_grad);

// Both id lists are validated against vocab_size (RangeError). Dropout reads
// from `drop_rng` in op order; pass dropout = 0 for evaluation.
Var encoder_forward(Graph& g, const LMWeights& w, const LMBound& b, const std::vector<long>& source_ids,
                    double dropout, Rng* drop_rng);

// Decoder over `decoder_input_ids` (already shifted: <pad> first) attending
// to `enc_out`. Returns logits [Lt, V].
Var decoder_forward(Graph& g, const LMWeights& w, const LMBound& b, const std::vector<long>& decoder_input_ids,
                    Var enc_out, const std::vector<long>& source_ids, double dropout, Rng* drop_rng);

struct LMLossParts {
    Var loss_sum;       // summed negative log-likelihood over counted positions
    long token_count;   // target positions that enter the mean (pad-labeled rows skipped)
};

// Teacher-forced loss pieces for one (source, target) pair. target must be
// the raw target sequence (typically ending in </s>); the shifted decoder
// input is built internally with <pad> as decoder start.
LMLossParts lm_loss_graph(Graph& g, const LMWeights& w, const LMBound& b, const std::vector<long>& source_ids,
                          const std::vector<long>& target_ids, double dropout, Rng* drop_rng);

// Evaluation-mode mean negative log-likelihood per target token.
double lm_forward_loss(const LMWeights& w, const std::vector<long>& source_ids, const std::vector<long>& target_ids);

}  // namespace molang
