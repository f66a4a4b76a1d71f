#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molang/vocab.hpp"

namespace molang {

enum class TaskKind {
    TextToMotion,
    TextToMotionWithLength,
    LengthToMotion,
    RandomMotion,
    MotionToText,
    MotionToTextWithLength,
    MotionToLength,
    CaptionToLength,
    LengthToCaption,
    RandomCaption,
    MotionPrediction,
    MotionInBetween,
    MotionCompletionFree,
    LengthQA,
};

inline constexpr int kTaskKindCount = 14;

const std::vector<TaskKind>& all_task_kinds();
std::string task_name(TaskKind task);
TaskKind task_from_name(const std::string& name);  // ConfigError on unknown

struct PromptTemplate {
    long id = 0;  // position in the shipped bank
    TaskKind task = TaskKind::TextToMotion;
    std::string input_pattern;   // may use [caption] [frames] [seconds] and a motion placeholder
    std::string output_pattern;  // same placeholder language; "<motion_tokens>" alone = motion target
};

// Shipped bank: at least 10 templates per task.
const std::vector<PromptTemplate>& template_bank();
std::vector<PromptTemplate> templates_for(TaskKind task);

struct Provenance {
    std::string corpus_id;
    long template_id = -1;
    std::uint64_t seed = 0;
};

struct InstructionSample {
    TaskKind task = TaskKind::TextToMotion;
    TokenSequence source;
    TokenSequence target;
    Provenance provenance;
};

// Tokenized corpus item: captions plus the motion's codebook indices.
struct CorpusItemTokens {
    std::string id;
    std::vector<std::string> captions;
    std::vector<long> motion_ids;
    long frames = 0;
    double fps = 20.0;
};

struct InstructionDataset {
    std::vector<InstructionSample> samples;
    long skipped = 0;  // items too short for a completion task
};

// One sample per applicable task kind per corpus item; template and caption
// drawn uniformly from per-(item, task) RNG streams. Deterministic per seed.
// Items too short for prediction (< 5 ids) or in-between (< 8 ids) skip just
// that task and count into `skipped`.
InstructionDataset build_instruction_dataset(const std::vector<CorpusItemTokens>& corpus, const UnifiedVocab& vocab,
                                             std::uint64_t seed);

// Motion prediction: source = prompt + first max(1, round-half-up(0.2*L))
// motion tokens, target = the rest. ContractError if |ids| < 5.
InstructionSample build_prediction_sample(const CorpusItemTokens& item, const UnifiedVocab& vocab,
                                          std::uint64_t seed);

// The prediction split point: max(1, round-half-up(0.2 * token_count)).
long prediction_prefix_tokens(long token_count);

enum class InbetweenMode { Random50, Fixed252525 };

// Motion in-between: a contiguous interior span is removed and <extra_id_0>
// marks the hole between the two kept motion segments in the source; the
// target is the removed span. Random50 removes 50%±10% (uniform, clamped so
// the fraction stays in [0.4, 0.6]); Fixed252525 keeps exactly the first and
// last floor(0.25*L) tokens. ContractError if |ids| < 8.
InstructionSample build_inbetween_sample(const CorpusItemTokens& item, InbetweenMode mode, const UnifiedVocab& vocab,
                                         std::uint64_t seed);

// The Fixed252525 hole: keeps floor(0.25*L) tokens on each side.
struct InbetweenLayout {
    long keep = 0;  // kept on each side
    long span = 0;  // removed interior length
};
InbetweenLayout fixed_inbetween_layout(long token_count);

// NDJSON: {"task", "source_ids", "target_ids", "provenance"} per line.
void save_instruction_dataset(const std::string& path, const std::vector<InstructionSample>& samples);
std::vector<InstructionSample> load_instruction_dataset(const std::string& path);  // FormatError on bad lines

// The filled source text of a template for binding-coverage counting: motion
// ids render as their token strings through the same prompt machinery.
std::string fill_template_text(const PromptTemplate& tmpl, const CorpusItemTokens& item, const UnifiedVocab& vocab,
                               const std::string& caption);

}  // namespace molang
