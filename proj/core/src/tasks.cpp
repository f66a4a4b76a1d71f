#include "molang/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "molang/error.hpp"
#include "molang/rng.hpp"

namespace molang {

namespace {

constexpr long kMinPredictionIds = 5;
constexpr long kMinInbetweenIds = 8;

const char* kTaskNames[kTaskKindCount] = {
    "text_to_motion",
    "text_to_motion_with_length",
    "length_to_motion",
    "random_motion",
    "motion_to_text",
    "motion_to_text_with_length",
    "motion_to_length",
    "caption_to_length",
    "length_to_caption",
    "random_caption",
    "motion_prediction",
    "motion_in_between",
    "motion_completion_free",
    "length_qa",
};

long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5)); }

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", s);
    return buf;
}

TokenSequence motion_target(const std::vector<long>& motion_ids, const UnifiedVocab& vocab) {
    TokenSequence t = wrap_motion(motion_ids, vocab);
    t.ids.push_back(UnifiedVocab::kEos);
    t.role = Role::Target;
    return t;
}

TokenSequence text_target(const std::string& pattern, const PromptBindings& b, const UnifiedVocab& vocab) {
    TokenSequence t = render_prompt(pattern, b, vocab);
    t.ids.push_back(UnifiedVocab::kEos);
    t.role = Role::Target;
    return t;
}

const PromptTemplate& draw_template(TaskKind task, Rng& rng) {
    static const auto by_task = [] {
        std::vector<std::vector<PromptTemplate>> v(kTaskKindCount);
        for (const PromptTemplate& t : template_bank()) v[static_cast<int>(t.task)].push_back(t);
        return v;
    }();
    const auto& pool = by_task[static_cast<int>(task)];
    return pool[rng.next_below(pool.size())];
}

const std::string& draw_caption(const CorpusItemTokens& item, Rng& rng) {
    return item.captions[rng.next_below(item.captions.size())];
}

void check_item(const CorpusItemTokens& item) {
    if (item.captions.empty()) throw ContractError("corpus item '" + item.id + "' has no captions");
    if (item.motion_ids.empty()) throw ContractError("corpus item '" + item.id + "' has no motion ids");
}

// Prediction split: the kept prefix is 20% of the ids, rounded half up, at
// least one token and always leaving a non-empty remainder for |ids| >= 5.
long prediction_prefix_len(long n) { return std::max<long>(1, round_half_up(0.2 * static_cast<double>(n))); }

InstructionSample make_prediction(const CorpusItemTokens& item, const UnifiedVocab& vocab, std::uint64_t seed) {
    check_item(item);
    long n = static_cast<long>(item.motion_ids.size());
    if (n < kMinPredictionIds)
        throw ContractError("motion prediction needs at least 5 motion ids, got " + std::to_string(n));
    Rng rng(seed);
    const PromptTemplate& tmpl = draw_template(TaskKind::MotionPrediction, rng);
    long keep = prediction_prefix_len(n);
    PromptBindings b;
    b.motion_ids = std::vector<long>(item.motion_ids.begin(), item.motion_ids.begin() + keep);
    InstructionSample s;
    s.task = TaskKind::MotionPrediction;
    s.source = render_prompt(tmpl.input_pattern, b, vocab);
    s.target = motion_target({item.motion_ids.begin() + keep, item.motion_ids.end()}, vocab);
    s.provenance = {item.id, tmpl.id, seed};
    return s;
}

InstructionSample make_inbetween(const CorpusItemTokens& item, InbetweenMode mode, const UnifiedVocab& vocab,
                                 std::uint64_t seed) {
    check_item(item);
    long n = static_cast<long>(item.motion_ids.size());
    if (n < kMinInbetweenIds)
        throw ContractError("motion in-between needs at least 8 motion ids, got " + std::to_string(n));
    Rng rng(seed);
    const PromptTemplate& tmpl = draw_template(TaskKind::MotionInBetween, rng);

    long span_len = 0;
    long start = 0;
    if (mode == InbetweenMode::Fixed252525) {
        InbetweenLayout layout = fixed_inbetween_layout(n);
        start = layout.keep;
        span_len = layout.span;
    } else {
        // Masked fraction uniform in [0.4, 0.6]; clamping keeps the realized
        // integer span inside those bounds. At least one id survives on each
        // side.
        double f = 0.4 + 0.2 * rng.next_double();
        long lo = static_cast<long>(std::ceil(0.4 * static_cast<double>(n)));
        long hi = static_cast<long>(std::floor(0.6 * static_cast<double>(n)));
        span_len = std::clamp(round_half_up(f * static_cast<double>(n)), lo, hi);
        span_len = std::clamp<long>(span_len, 1, n - 2);
        start = 1 + static_cast<long>(rng.next_below(static_cast<std::uint64_t>(n - span_len - 1)));
    }

    std::vector<long> pre(item.motion_ids.begin(), item.motion_ids.begin() + start);
    std::vector<long> hole(item.motion_ids.begin() + start, item.motion_ids.begin() + start + span_len);
    std::vector<long> post(item.motion_ids.begin() + start + span_len, item.motion_ids.end());

    // The hole marker sits between two complete </som>..</eom> segments so
    // the source decodes without repair.
    std::vector<long> segment = wrap_motion(pre, vocab).ids;
    segment.push_back(vocab.extra_id(0));
    const std::vector<long> post_wrapped = wrap_motion(post, vocab).ids;
    segment.insert(segment.end(), post_wrapped.begin(), post_wrapped.end());

    PromptBindings b;
    b.motion_segment = std::move(segment);
    InstructionSample s;
    s.task = TaskKind::MotionInBetween;
    s.source = render_prompt(tmpl.input_pattern, b, vocab);
    s.target = motion_target(hole, vocab);
    s.provenance = {item.id, tmpl.id, seed};
    return s;
}

InstructionSample make_completion_free(const CorpusItemTokens& item, const UnifiedVocab& vocab, std::uint64_t seed) {
    check_item(item);
    long n = static_cast<long>(item.motion_ids.size());
    if (n < kMinPredictionIds)
        throw ContractError("free completion needs at least 5 motion ids, got " + std::to_string(n));
    Rng rng(seed);
    const PromptTemplate& tmpl = draw_template(TaskKind::MotionCompletionFree, rng);
    double f = 0.1 + 0.5 * rng.next_double();
    long keep = std::clamp<long>(round_half_up(f * static_cast<double>(n)), 1, n - 1);
    PromptBindings b;
    b.motion_ids = std::vector<long>(item.motion_ids.begin(), item.motion_ids.begin() + keep);
    InstructionSample s;
    s.task = TaskKind::MotionCompletionFree;
    s.source = render_prompt(tmpl.input_pattern, b, vocab);
    s.target = motion_target({item.motion_ids.begin() + keep, item.motion_ids.end()}, vocab);
    s.provenance = {item.id, tmpl.id, seed};
    return s;
}

}  // namespace

const std::vector<TaskKind>& all_task_kinds() {
    static const std::vector<TaskKind> kinds = [] {
        std::vector<TaskKind> v;
        for (int i = 0; i < kTaskKindCount; ++i) v.push_back(static_cast<TaskKind>(i));
        return v;
    }();
    return kinds;
}

std::string task_name(TaskKind task) { return kTaskNames[static_cast<int>(task)]; }

TaskKind task_from_name(const std::string& name) {
    for (int i = 0; i < kTaskKindCount; ++i)
        if (name == kTaskNames[i]) return static_cast<TaskKind>(i);
    throw ConfigError("unknown task name: '" + name + "'");
}

InstructionSample build_prediction_sample(const CorpusItemTokens& item, const UnifiedVocab& vocab,
                                          std::uint64_t seed) {
    return make_prediction(item, vocab, seed);
}

InstructionSample build_inbetween_sample(const CorpusItemTokens& item, InbetweenMode mode, const UnifiedVocab& vocab,
                                         std::uint64_t seed) {
    return make_inbetween(item, mode, vocab, seed);
}

long prediction_prefix_tokens(long token_count) { return prediction_prefix_len(token_count); }

InbetweenLayout fixed_inbetween_layout(long token_count) {
    long keep = token_count / 4;
    return {keep, token_count - 2 * keep};
}

InstructionDataset build_instruction_dataset(const std::vector<CorpusItemTokens>& corpus, const UnifiedVocab& vocab,
                                             std::uint64_t seed) {
    InstructionDataset out;
    for (std::size_t item_idx = 0; item_idx < corpus.size(); ++item_idx) {
        const CorpusItemTokens& item = corpus[item_idx];
        check_item(item);
        long n = static_cast<long>(item.motion_ids.size());
        double seconds = static_cast<double>(item.frames) / item.fps;

        for (std::size_t task_idx = 0; task_idx < all_task_kinds().size(); ++task_idx) {
            TaskKind task = all_task_kinds()[task_idx];
            std::uint64_t sample_seed = hash_combine(hash_combine(seed, item_idx), task_idx);

            // The split tasks draw template + split point from the sample
            // seed themselves, so standalone builds reproduce dataset rows.
            if (task == TaskKind::MotionPrediction || task == TaskKind::MotionCompletionFree) {
                if (n < kMinPredictionIds) {
                    ++out.skipped;
                    continue;
                }
                out.samples.push_back(task == TaskKind::MotionPrediction
                                          ? make_prediction(item, vocab, sample_seed)
                                          : make_completion_free(item, vocab, sample_seed));
                continue;
            }
            if (task == TaskKind::MotionInBetween) {
                if (n < kMinInbetweenIds) {
                    ++out.skipped;
                    continue;
                }
                out.samples.push_back(make_inbetween(item, InbetweenMode::Random50, vocab, sample_seed));
                continue;
            }

            Rng rng(sample_seed);
            const PromptTemplate& tmpl = draw_template(task, rng);

            PromptBindings src;
            PromptBindings tgt;
            InstructionSample s;
            s.task = task;
            s.provenance = {item.id, tmpl.id, sample_seed};

            switch (task) {
                case TaskKind::TextToMotion:
                    src.caption = draw_caption(item, rng);
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = motion_target(item.motion_ids, vocab);
                    break;
                case TaskKind::TextToMotionWithLength:
                    src.caption = draw_caption(item, rng);
                    src.frames = item.frames;
                    src.seconds = seconds;
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = motion_target(item.motion_ids, vocab);
                    break;
                case TaskKind::LengthToMotion:
                    src.frames = item.frames;
                    src.seconds = seconds;
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = motion_target(item.motion_ids, vocab);
                    break;
                case TaskKind::RandomMotion:
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = motion_target(item.motion_ids, vocab);
                    break;
                case TaskKind::MotionToText:
                    src.motion_ids = item.motion_ids;
                    tgt.caption = draw_caption(item, rng);
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = text_target(tmpl.output_pattern, tgt, vocab);
                    break;
                case TaskKind::MotionToTextWithLength:
                    src.motion_ids = item.motion_ids;
                    src.frames = item.frames;
                    src.seconds = seconds;
                    tgt.caption = draw_caption(item, rng);
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = text_target(tmpl.output_pattern, tgt, vocab);
                    break;
                case TaskKind::MotionToLength:
                    src.motion_ids = item.motion_ids;
                    tgt.frames = item.frames;
                    tgt.seconds = seconds;
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = text_target(tmpl.output_pattern, tgt, vocab);
                    break;
                case TaskKind::CaptionToLength:
                    src.caption = draw_caption(item, rng);
                    tgt.frames = item.frames;
                    tgt.seconds = seconds;
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = text_target(tmpl.output_pattern, tgt, vocab);
                    break;
                case TaskKind::LengthToCaption:
                    src.frames = item.frames;
                    src.seconds = seconds;
                    tgt.caption = draw_caption(item, rng);
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = text_target(tmpl.output_pattern, tgt, vocab);
                    break;
                case TaskKind::RandomCaption:
                    tgt.caption = draw_caption(item, rng);
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = text_target(tmpl.output_pattern, tgt, vocab);
                    break;
                case TaskKind::LengthQA:
                    src.frames = item.frames;
                    src.seconds = seconds;
                    tgt.frames = item.frames;
                    tgt.seconds = seconds;
                    s.source = render_prompt(tmpl.input_pattern, src, vocab);
                    s.target = text_target(tmpl.output_pattern, tgt, vocab);
                    break;
                default:
                    throw ContractError("unhandled task kind");
            }
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

void save_instruction_dataset(const std::string& path, const std::vector<InstructionSample>& samples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError(0, "cannot open " + path + " for writing");
    for (const InstructionSample& s : samples) {
        nlohmann::json j;
        j["task"] = task_name(s.task);
        j["source_ids"] = s.source.ids;
        j["target_ids"] = s.target.ids;
        j["provenance"] = {{"corpus_id", s.provenance.corpus_id},
                           {"template_id", s.provenance.template_id},
                           {"seed", s.provenance.seed}};
        f << j.dump() << '\n';
    }
    if (!f) throw FormatError(0, "short write to " + path);
}

std::vector<InstructionSample> load_instruction_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(0, "cannot open " + path);
    std::vector<InstructionSample> out;
    std::string line;
    std::size_t pos = 0;
    while (std::getline(f, line)) {
        std::size_t line_pos = pos;
        pos += line.size() + 1;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw FormatError(line_pos, "malformed sample line in " + path);
        if (!j.contains("task") || !j["task"].is_string())
            throw FormatError(line_pos, "missing task in " + path);
        if (!j.contains("source_ids") || !j["source_ids"].is_array())
            throw FormatError(line_pos, "missing source_ids in " + path);
        if (!j.contains("target_ids") || !j["target_ids"].is_array())
            throw FormatError(line_pos, "missing target_ids in " + path);
        InstructionSample s;
        try {
            s.task = task_from_name(j["task"].get<std::string>());
        } catch (const ConfigError& e) {
            throw FormatError(line_pos, std::string(e.what()) + " in " + path);
        }
        auto read_ids = [&](const nlohmann::json& arr, const char* field) {
            std::vector<long> ids;
            for (const auto& v : arr) {
                if (!v.is_number_integer())
                    throw FormatError(line_pos, std::string("non-integer id in ") + field + " in " + path);
                ids.push_back(v.get<long>());
            }
            return ids;
        };
        s.source.ids = read_ids(j["source_ids"], "source_ids");
        s.source.role = Role::Source;
        s.target.ids = read_ids(j["target_ids"], "target_ids");
        s.target.role = Role::Target;
        if (j.contains("provenance") && j["provenance"].is_object()) {
            const auto& p = j["provenance"];
            if (p.contains("corpus_id") && p["corpus_id"].is_string())
                s.provenance.corpus_id = p["corpus_id"].get<std::string>();
            if (p.contains("template_id") && p["template_id"].is_number_integer())
                s.provenance.template_id = p["template_id"].get<long>();
            if (p.contains("seed") && p["seed"].is_number())
                s.provenance.seed = p["seed"].get<std::uint64_t>();
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string fill_template_text(const PromptTemplate& tmpl, const CorpusItemTokens& item, const UnifiedVocab& vocab,
                               const std::string& caption) {
    const std::string motion_text = [&] {
        TokenSequence seq = wrap_motion(item.motion_ids, vocab);
        std::string s;
        for (std::size_t i = 0; i < seq.ids.size(); ++i) {
            if (i) s += ' ';
            s += vocab.token(seq.ids[i]);
        }
        return s;
    }();
    const std::pair<std::string, std::string> subs[] = {
        {"[caption]", caption},
        {"[frames]", std::to_string(item.frames)},
        {"[seconds]", format_seconds(static_cast<double>(item.frames) / item.fps)},
        {"[motion]", motion_text},
        {"<motion_tokens>", motion_text},
    };
    std::string text = tmpl.input_pattern;
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t best = std::string::npos;
        const std::pair<std::string, std::string>* hit = nullptr;
        for (const auto& sub : subs) {
            std::size_t at = text.find(sub.first, pos);
            if (at < best) {
                best = at;
                hit = &sub;
            }
        }
        if (!hit) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, best - pos);
        out += hit->second;
        pos = best + hit->first.size();
    }
    return out;
}

}  // namespace molang
