#pragma once

#include <map>
#include <string>

#include "molang/lm.hpp"
#include "molang/tensor.hpp"
#include "molang/vocab.hpp"
#include "molang/vq.hpp"

namespace molang {

// Container file: magic "MGCK", u32 version, u64 header length, UTF-8 JSON
// header {"meta": ..., "tensors": {name: {dtype, shape, offset}}}, then the
// payload: IEEE-754 binary32 little-endian, row-major, at the stated offsets
// (relative to payload start). The loader rejects overlapping or
// out-of-bounds offsets and any trailing payload bytes.
struct Checkpoint {
    std::map<std::string, Tensor> tensors;
    std::string meta_json = "{}";  // JSON object: model config, vocab hash, run config
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);  // FormatError with byte offset

// Model-level wrappers. Values round-trip through binary32; saving what a
// load returned reproduces the file byte for byte.
void save_tokenizer_checkpoint(const std::string& path, const Tokenizer& tok,
                               const std::string& run_config_json = "");
Tokenizer load_tokenizer_checkpoint(const std::string& path);

// LM checkpoints stamp vocab_hash(vocab); loading against a different vocab
// raises CompatibilityError.
void save_lm_checkpoint(const std::string& path, const LMWeights& weights, const UnifiedVocab& vocab,
                        const std::string& run_config_json = "");
LMWeights load_lm_checkpoint(const std::string& path, const UnifiedVocab& vocab);

}  // namespace molang
