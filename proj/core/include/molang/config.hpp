#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "molang/generate.hpp"
#include "molang/lm.hpp"
#include "molang/lm_train.hpp"
#include "molang/synthetic.hpp"
#include "molang/vq.hpp"
#include "molang/vq_train.hpp"

namespace molang {

// Evaluation selection. Task aliases ("t2m", "m2t", "pred", "inbetween",
// "lengthqa") resolve in the eval module.
struct EvalSection {
    std::vector<std::string> tasks = {"t2m", "m2t", "pred", "inbetween"};
    bool timing = true;
    long max_samples = 0;  // 0 = whole test split
};

// Whole-run configuration. The defaults define the desk-scale recipe; a
// `--config` JSON document overrides any subset of fields, and unknown keys
// are rejected by their dotted path. One seed drives every stage.
struct RunConfig {
    std::uint64_t seed = 0;
    SyntheticSpec data;  // data.seed mirrors the top-level seed
    std::array<double, 3> split = {0.8, 0.1, 0.1};
    TokenizerConfig tokenizer;
    LMConfig lm;
    TokenizerTrainConfig tokenizer_train;
    StageConfig pretrain;
    StageConfig instruct;
    PretrainMixture mixture;
    GenerationConfig generation;
    EvalSection eval;

    void validate() const;  // ConfigError on any violation
};

// Desk scale: full pipeline in well under an hour on one CPU core.
RunConfig desk_run_config();
// Full-scale iteration counts and batch sizes (150K tokenizer steps at
// batch 256, 300K + 300K language-model steps at batch 16).
RunConfig paper_scale_config();

// Sets config.seed and propagates it into every stage's seed field.
void apply_seed(RunConfig& config, std::uint64_t seed);

// Serializes every field; the output parses back to an equal config and
// doubles as the documentation of defaults.
std::string run_config_to_json(const RunConfig& config);

// Starts from `base`, applies the keys present in `text`, rejects unknown
// keys, re-propagates the seed, and validates.
RunConfig run_config_from_json(const std::string& text, const RunConfig& base = desk_run_config());
RunConfig load_run_config(const std::string& path, const RunConfig& base = desk_run_config());

}  // namespace molang
