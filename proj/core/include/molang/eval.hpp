#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "molang/generate.hpp"
#include "molang/lm.hpp"
#include "molang/motion.hpp"
#include "molang/vocab.hpp"
#include "molang/vq.hpp"

namespace molang {

// Evaluation protocol identifiers; the string aliases are what reports and
// `--tasks` use.
enum class EvalTask { TextToMotion, MotionToText, Prediction, InBetween, LengthQA };

EvalTask eval_task_from_name(const std::string& name);  // ConfigError on unknown alias
const char* eval_task_name(EvalTask task);

struct EvalTaskResult {
    std::string task;
    bool skipped = false;
    std::string skip_reason;  // set iff skipped
    long samples = 0;         // items that produced a scored output
    long failures = 0;        // generation contract violations (no motion segment, wrong span, unparsable)
    long decode_repairs = 0;  // unbalanced motion delimiters repaired while decoding
    std::map<std::string, double> metrics;
};

struct EvalReport {
    std::vector<EvalTaskResult> tasks;  // one entry per requested task, request order
    std::string feature_source;         // labels the FID/DIV feature extractor
    std::uint64_t seed = 0;
    bool timing = false;
    double fps = 0.0;  // generated frames per wall-clock second, batch size 1; timing runs only
    long generated_frames = 0;
    double generation_seconds = 0.0;
};

// Stable JSON: object keys sorted, timing block present only when enabled,
// so reports with timing off are byte-identical across reruns.
std::string eval_report_to_json(const EvalReport& report);
void save_eval_report(const std::string& path, const EvalReport& report);

// Null members mark missing checkpoints; tasks that need them produce
// explicit skip entries instead of failing the run.
struct EvalInputs {
    const Tokenizer* tokenizer = nullptr;
    const LMWeights* lm = nullptr;
    const UnifiedVocab* vocab = nullptr;
};

// Runs each requested task over the test split with per-item derived seeds.
// Prediction evaluates ADE/FDE on the generated region only; in-between uses
// the fixed 25/50/25 layout. Greedy decoding makes all metric values exact
// across reruns.
EvalReport evaluate_model(const EvalInputs& inputs, const std::vector<CaptionedMotion>& test_split,
                          const std::vector<std::string>& task_names, const GenerationConfig& genconfig,
                          bool timing = false, long max_samples = 0, std::uint64_t seed = 0);

}  // namespace molang
