#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "molang/graph.hpp"
#include "molang/motion.hpp"
#include "molang/optim.hpp"

namespace molang {

struct TokenizerConfig {
    long K = 512;          // codebook size
    long d = 512;          // code dimension
    long l = 4;            // temporal downsample rate, one conv stage per factor of 2
    long hidden = 128;     // channel width of intermediate conv stages
    double beta = 0.25;    // commitment weight
    double lambda_v = 0.5; // velocity-loss weight
    double gamma = 0.99;   // EMA decay
    double tau = 1.0;      // dead-code threshold on the EMA cluster size

    long stages() const;   // log2(l)
    void validate() const; // ConfigError on violation
};

// Small preset that trains in minutes on one core.
TokenizerConfig desk_tokenizer_config();

struct Codebook {
    Tensor entries;           // [K, d]
    Tensor ema_cluster_size;  // [K]
    Tensor ema_embed_sum;     // [K, d]
    std::vector<long> usage;  // assignment counts, reporting only
};

struct QuantizeResult {
    std::vector<long> ids;  // in [0, K)
    Tensor quantized;       // [L, d], row i = entries[ids[i]]
    Var ste_out;            // straight-through value; invalid in the pure overload
};

// Encoder/decoder/codebook plus the feature z-score statistics frozen at
// training time. All losses and latents live in normalized feature space.
struct Tokenizer {
    TokenizerConfig config;
    long feature_dim = 0;
    ParamStore params;
    Codebook codebook;
    Tensor feat_mu, feat_sigma;  // [D]
    bool codebook_ready = false; // set once entries are seeded from data
};

Tokenizer init_tokenizer(const TokenizerConfig& config, long feature_dim, std::uint64_t seed);

// Graph-bound views of the conv parameters; requires_grad toggles training vs
// inference binding.
BoundParams bind_params(Graph& g, const Tokenizer& tok, bool requires_grad);

// Encoder: [M, D] normalized features -> [L, d] latents, L = M / l.
// Each stage is conv1d(k=4, s=2, p=1) -> residual block (two k=3 convs) ->
// ReLU, widths D -> hidden -> ... -> d.
Var encode_pass(Graph& g, const Tokenizer& tok, const BoundParams& p, Var features);

// Decoder mirror: [L, d] -> [M, D] via nearest-neighbor upsampling stages and
// a final k=3 projection back to feature width.
Var decode_pass(Graph& g, const Tokenizer& tok, const BoundParams& p, Var quantized);

// Nearest codebook row by Euclidean distance; exact ties take the lowest
// index. ContractError on an empty codebook, ShapeError on width mismatch.
QuantizeResult quantize(const Tensor& latents, const Codebook& codebook);
// Same, plus ste_out wired into the graph (forward = quantized rows,
// gradient copied to the latents unchanged).
QuantizeResult quantize_st(Graph& g, Var latents, const Codebook& codebook);

struct LossBreakdown {
    double total = 0.0;     // recon + lambda_v*velocity + embed + commit (reported)
    double recon = 0.0;     // mean smooth-L1 over elements
    double embed = 0.0;     // mean ||sg(latents) - quantized||^2; NOT backpropagated
    double commit = 0.0;    // beta * mean ||latents - sg(quantized)||^2
    double velocity = 0.0;  // mean smooth-L1 of frame differences (unweighted)
};

struct TokenizerLossVars {
    Var train_loss;  // recon + lambda_v*velocity + commit (embed learns via EMA)
    LossBreakdown values;
    std::vector<std::vector<long>> batch_ids;  // per sequence, for the EMA update
    std::vector<Tensor> batch_latents;         // per sequence [L, d] encoder outputs
};

// Full forward over a batch of equal-length normalized feature windows.
TokenizerLossVars tokenizer_loss(Graph& g, const Tokenizer& tok, const BoundParams& p,
                                 const std::vector<Tensor>& batch_features);

// N_k <- gamma*N_k + (1-gamma)*n_k; S_k likewise with latent sums;
// entries_k <- S_k / max(N_k, 1e-5). Also bumps usage counters.
void ema_update(Codebook& codebook, const std::vector<Tensor>& batch_latents,
                const std::vector<std::vector<long>>& batch_ids, double gamma);

// Re-seeds every code with N_k < tau from a uniformly drawn reservoir row
// (an encoder output of the finished epoch); N_k := 1, S_k := entry.
// Returns the number of codes reset. No-op on an empty reservoir.
long reset_dead_codes(Codebook& codebook, const std::vector<Tensor>& reservoir, double tau, Rng& rng);

Tensor normalize_features(const Tokenizer& tok, const Tensor& frames);
Tensor denormalize_features(const Tokenizer& tok, const Tensor& frames);

// Inference codecs. tokenize truncates M to a multiple of l and needs
// M >= l (InsufficientFramesError); detokenize rejects out-of-range ids
// (RangeError) and empty id lists (ContractError).
Tensor encode_features(const Tokenizer& tok, const MotionFeatures& features);  // [L, d]
std::vector<long> tokenize_motion(const Tokenizer& tok, const MotionSequence& motion);
MotionSequence detokenize_motion(const Tokenizer& tok, const std::vector<long>& ids, double fps = 20.0);

}  // namespace molang
