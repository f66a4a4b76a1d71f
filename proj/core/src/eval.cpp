#include "molang/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <string>

#include "molang/error.hpp"
#include "molang/metrics.hpp"
#include "molang/rng.hpp"
#include "molang/tasks.hpp"
#include "json.hpp"

namespace molang {

using nlohmann::json;

namespace {

struct Clock {
    bool enabled = false;
    double seconds = 0.0;
    long frames = 0;

    template <typename F>
    GenerationResult time_generate(F&& call) {
        if (!enabled) return call();
        auto t0 = std::chrono::steady_clock::now();
        GenerationResult r = call();
        auto t1 = std::chrono::steady_clock::now();
        seconds += std::chrono::duration<double>(t1 - t0).count();
        return r;
    }
};

// First motion segment of a generated sequence, or empty when the model
// produced none.
std::vector<long> first_motion_segment(const std::vector<long>& ids, const UnifiedVocab& vocab,
                                       long* repairs) {
    long r = 0;
    auto segments = decode_mixed(ids, vocab, &r);
    if (repairs) *repairs += r;
    for (const auto& seg : segments)
        if (seg.kind == Segment::Kind::Motion && !seg.motion_ids.empty()) return seg.motion_ids;
    return {};
}

std::string generated_text(const std::vector<long>& ids, const UnifiedVocab& vocab, long* repairs) {
    long r = 0;
    auto segments = decode_mixed(ids, vocab, &r);
    if (repairs) *repairs += r;
    std::string out;
    for (const auto& seg : segments) {
        if (seg.kind != Segment::Kind::Text) continue;
        if (!out.empty() && !seg.text.empty()) out += " ";
        out += seg.text;
    }
    return out;
}

PromptTemplate eval_template(TaskKind task) {
    return templates_for(task).front();  // fixed template isolates task skill from phrasing
}

CorpusItemTokens item_tokens(const CaptionedMotion& sample, const Tokenizer& tok) {
    CorpusItemTokens item;
    item.id = sample.id;
    item.captions = sample.captions;
    item.motion_ids = tokenize_motion(tok, sample.motion);
    item.frames = sample.motion.frame_count();
    item.fps = sample.motion.fps;
    return item;
}

// Positions cropped to the first `frames` frames.
Tensor crop_positions(const Tensor& positions, long frames) {
    const long j = positions.dim(1);
    Tensor out({frames, j, 3});
    for (long t = 0; t < frames; ++t)
        for (long q = 0; q < j; ++q)
            for (long k = 0; k < 3; ++k) out.at(t, q, k) = positions.at(t, q, k);
    return out;
}

// Family prefix of a synthetic sample id ("walk_003" -> "walk"); the whole
// id when there is no underscore.
std::string group_key(const std::string& id) {
    auto pos = id.rfind('_');
    return pos == std::string::npos ? id : id.substr(0, pos);
}

GenerationConfig per_item_config(const GenerationConfig& base, std::uint64_t seed) {
    GenerationConfig c = base;
    if (c.mode == DecodeMode::Sample) c.seed = seed;
    return c;
}

double parse_first_number(const std::string& text, bool* ok) {
    // decode_text splits "3.2" into "3 . 2"; stitch digit runs around a dot
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (ch == ' ') {
            if (!cur.empty()) words.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) words.push_back(cur);
    auto is_digits = [](const std::string& w) {
        if (w.empty()) return false;
        for (char c : w)
            if (c < '0' || c > '9') return false;
        return true;
    };
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!is_digits(words[i])) continue;
        double value = std::stod(words[i]);
        if (i + 2 < words.size() && words[i + 1] == "." && is_digits(words[i + 2]))
            value += std::stod(words[i + 2]) / std::pow(10.0, (double)words[i + 2].size());
        *ok = true;
        return value;
    }
    *ok = false;
    return 0.0;
}

struct Accumulator {
    double sum = 0.0;
    long n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    double mean() const { return n ? sum / (double)n : 0.0; }
};

void eval_text_to_motion(const EvalInputs& in, const std::vector<const CaptionedMotion*>& items,
                         const GenerationConfig& gen, std::uint64_t seed, Clock& clock, EvalTaskResult& out) {
    const PromptTemplate tmpl = eval_template(TaskKind::TextToMotion);
    std::vector<MotionSequence> real, generated;
    std::vector<std::string> gen_groups;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const CaptionedMotion& sample = *items[i];
        PromptBindings b;
        b.caption = sample.captions.front();
        TokenSequence source = render_prompt(tmpl.input_pattern, b, *in.vocab);
        std::uint64_t item_seed = hash_combine(seed, (std::uint64_t)i);
        GenerationResult r =
            clock.time_generate([&] { return generate(*in.lm, source.ids, per_item_config(gen, item_seed)); });
        std::vector<long> codes = first_motion_segment(r.ids, *in.vocab, &out.decode_repairs);
        if (codes.empty()) {
            ++out.failures;
            continue;
        }
        MotionSequence motion = detokenize_motion(*in.tokenizer, codes, sample.motion.fps);
        clock.frames += motion.frame_count();
        real.push_back(sample.motion);
        generated.push_back(std::move(motion));
        gen_groups.push_back(group_key(sample.id));
        ++out.samples;
    }
    if (generated.size() < 2 || real.size() < 2) return;  // distribution metrics need >= 2 rows

    FeatureSource source = statistics_feature_source(items.front()->motion.skeleton);
    Tensor real_f = feature_matrix(source, real);
    Tensor gen_f = feature_matrix(source, generated);

    // within-family groups of generated motions, size >= 2
    std::vector<Tensor> groups;
    std::vector<std::string> names;
    for (const auto& g : gen_groups)
        if (std::find(names.begin(), names.end(), g) == names.end()) names.push_back(g);
    for (const auto& name : names) {
        std::vector<MotionSequence> members;
        for (std::size_t i = 0; i < generated.size(); ++i)
            if (gen_groups[i] == name) members.push_back(generated[i]);
        if (members.size() >= 2) groups.push_back(feature_matrix(source, members));
    }

    DistributionMetrics dm = distribution_metrics(real_f, gen_f, groups, seed);
    out.metrics["fid"] = dm.fid;
    out.metrics["fid_ridge"] = dm.ridge_applied ? 1.0 : 0.0;
    out.metrics["div_gen"] = dm.div;
    out.metrics["div_real"] = diversity(real_f, kDiversityPairs, seed);
    out.metrics["mm"] = dm.mm;
}

void eval_motion_to_text(const EvalInputs& in, const std::vector<const CaptionedMotion*>& items,
                         const GenerationConfig& gen, std::uint64_t seed, Clock& clock, EvalTaskResult& out) {
    const PromptTemplate tmpl = eval_template(TaskKind::MotionToText);
    std::vector<std::vector<std::string>> references;
    std::vector<std::string> hypotheses;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const CaptionedMotion& sample = *items[i];
        PromptBindings b;
        b.motion_ids = tokenize_motion(*in.tokenizer, sample.motion);
        TokenSequence source = render_prompt(tmpl.input_pattern, b, *in.vocab);
        std::uint64_t item_seed = hash_combine(seed, (std::uint64_t)i);
        GenerationResult r =
            clock.time_generate([&] { return generate(*in.lm, source.ids, per_item_config(gen, item_seed)); });
        std::string text = generated_text(r.ids, *in.vocab, &out.decode_repairs);
        if (text.empty()) {
            ++out.failures;
            continue;
        }
        references.push_back(sample.captions);
        hypotheses.push_back(std::move(text));
        ++out.samples;
    }
    if (hypotheses.empty()) return;
    CaptionMetrics cm = caption_metrics(references, hypotheses, *in.vocab);
    out.metrics["bleu1"] = cm.bleu[0];
    out.metrics["bleu2"] = cm.bleu[1];
    out.metrics["bleu3"] = cm.bleu[2];
    out.metrics["bleu4"] = cm.bleu[3];
    out.metrics["rouge_l"] = cm.rouge_l;
    out.metrics["cider"] = cm.cider;
    out.metrics["exact_match"] = cm.exact_match;
    out.metrics["length_avg"] = cm.length_avg;
}

void eval_prediction(const EvalInputs& in, const std::vector<const CaptionedMotion*>& items,
                     const GenerationConfig& gen, std::uint64_t seed, Clock& clock, EvalTaskResult& out) {
    const long l = in.tokenizer->config.l;
    Accumulator ade, fde;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const CaptionedMotion& sample = *items[i];
        CorpusItemTokens item = item_tokens(sample, *in.tokenizer);
        const long n = (long)item.motion_ids.size();
        if (n < 5) continue;  // too short for the protocol, same rule as the dataset builder
        std::uint64_t item_seed = hash_combine(seed, (std::uint64_t)i);
        InstructionSample task = build_prediction_sample(item, *in.vocab, item_seed);
        GenerationResult r = clock.time_generate(
            [&] { return generate(*in.lm, task.source.ids, per_item_config(gen, item_seed)); });
        std::vector<long> codes = first_motion_segment(r.ids, *in.vocab, &out.decode_repairs);
        if (codes.empty()) {
            ++out.failures;
            continue;
        }
        const long prefix = prediction_prefix_tokens(n);
        const long k = std::min<long>((long)codes.size(), n - prefix);
        std::vector<long> full(item.motion_ids.begin(), item.motion_ids.begin() + prefix);
        full.insert(full.end(), codes.begin(), codes.begin() + k);
        MotionSequence pred = detokenize_motion(*in.tokenizer, full, sample.motion.fps);
        clock.frames += k * l;

        const long frames = (prefix + k) * l;
        MotionSequence gt = sample.motion;
        gt.positions = crop_positions(sample.motion.positions, frames);
        MotionSequence pred_crop = pred;
        pred_crop.positions = crop_positions(pred.positions, frames);
        DisplacementErrors e = displacement_errors(gt, pred_crop, prefix * l, k * l);
        ade.add(e.ade);
        fde.add(e.fde);
        ++out.samples;
    }
    if (ade.n == 0) return;
    out.metrics["ade"] = ade.mean();
    out.metrics["fde"] = fde.mean();
}

void eval_inbetween(const EvalInputs& in, const std::vector<const CaptionedMotion*>& items,
                    const GenerationConfig& gen, std::uint64_t seed, Clock& clock, EvalTaskResult& out) {
    const long l = in.tokenizer->config.l;
    Accumulator ade, fde;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const CaptionedMotion& sample = *items[i];
        CorpusItemTokens item = item_tokens(sample, *in.tokenizer);
        const long n = (long)item.motion_ids.size();
        if (n < 8) continue;
        std::uint64_t item_seed = hash_combine(seed, (std::uint64_t)i);
        InstructionSample task = build_inbetween_sample(item, InbetweenMode::Fixed252525, *in.vocab, item_seed);
        GenerationResult r = clock.time_generate(
            [&] { return generate(*in.lm, task.source.ids, per_item_config(gen, item_seed)); });
        std::vector<long> codes = first_motion_segment(r.ids, *in.vocab, &out.decode_repairs);
        InbetweenLayout layout = fixed_inbetween_layout(n);
        if ((long)codes.size() < layout.span) {  // hole must be filled exactly; longer output truncates
            ++out.failures;
            continue;
        }
        std::vector<long> full(item.motion_ids.begin(), item.motion_ids.begin() + layout.keep);
        full.insert(full.end(), codes.begin(), codes.begin() + layout.span);
        full.insert(full.end(), item.motion_ids.begin() + layout.keep + layout.span, item.motion_ids.end());
        MotionSequence pred = detokenize_motion(*in.tokenizer, full, sample.motion.fps);
        clock.frames += layout.span * l;

        const long frames = n * l;
        MotionSequence gt = sample.motion;
        gt.positions = crop_positions(sample.motion.positions, frames);
        DisplacementErrors e = displacement_errors(gt, pred, layout.keep * l, layout.span * l);
        ade.add(e.ade);
        fde.add(e.fde);
        ++out.samples;
    }
    if (ade.n == 0) return;
    out.metrics["ade"] = ade.mean();
    out.metrics["fde"] = fde.mean();
}

void eval_length_qa(const EvalInputs& in, const std::vector<const CaptionedMotion*>& items,
                    const GenerationConfig& gen, std::uint64_t seed, Clock& clock, EvalTaskResult& out) {
    const PromptTemplate tmpl = eval_template(TaskKind::LengthQA);
    Accumulator mae;
    long exact = 0, value_ok = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const CaptionedMotion& sample = *items[i];
        const double seconds = (double)sample.motion.frame_count() / sample.motion.fps;
        PromptBindings b;
        b.frames = sample.motion.frame_count();
        b.seconds = seconds;
        TokenSequence source = render_prompt(tmpl.input_pattern, b, *in.vocab);
        TokenSequence reference = render_prompt(tmpl.output_pattern, b, *in.vocab);
        std::uint64_t item_seed = hash_combine(seed, (std::uint64_t)i);
        GenerationResult r =
            clock.time_generate([&] { return generate(*in.lm, source.ids, per_item_config(gen, item_seed)); });
        std::string text = generated_text(r.ids, *in.vocab, &out.decode_repairs);
        ++out.samples;
        if (text == in.vocab->decode_text(reference.ids)) ++exact;
        bool ok = false;
        double value = parse_first_number(text, &ok);
        if (!ok) {
            ++out.failures;
            continue;
        }
        mae.add(std::fabs(value - seconds));
        if (std::fabs(value - seconds) < 0.05) ++value_ok;  // one-decimal answer granularity
    }
    if (out.samples == 0) return;
    out.metrics["exact_match"] = (double)exact / (double)out.samples;
    out.metrics["value_match"] = (double)value_ok / (double)out.samples;
    if (mae.n > 0) out.metrics["mae_seconds"] = mae.mean();
}

}  // namespace

EvalTask eval_task_from_name(const std::string& name) {
    if (name == "t2m") return EvalTask::TextToMotion;
    if (name == "m2t") return EvalTask::MotionToText;
    if (name == "pred") return EvalTask::Prediction;
    if (name == "inbetween") return EvalTask::InBetween;
    if (name == "lengthqa") return EvalTask::LengthQA;
    throw ConfigError("unknown eval task '" + name + "' (t2m, m2t, pred, inbetween, lengthqa)");
}

const char* eval_task_name(EvalTask task) {
    switch (task) {
        case EvalTask::TextToMotion: return "t2m";
        case EvalTask::MotionToText: return "m2t";
        case EvalTask::Prediction: return "pred";
        case EvalTask::InBetween: return "inbetween";
        case EvalTask::LengthQA: return "lengthqa";
    }
    return "t2m";
}

std::string eval_report_to_json(const EvalReport& report) {
    json tasks = json::array();
    for (const auto& t : report.tasks) {
        json entry{{"task", t.task},       {"skipped", t.skipped},
                   {"samples", t.samples}, {"failures", t.failures},
                   {"decode_repairs", t.decode_repairs}};
        if (t.skipped) entry["skip_reason"] = t.skip_reason;
        json metrics = json::object();
        for (const auto& [k, v] : t.metrics) metrics[k] = v;
        entry["metrics"] = metrics;
        tasks.push_back(entry);
    }
    json j{{"feature_source", report.feature_source}, {"seed", report.seed}, {"tasks", tasks}};
    if (report.timing) {
        j["timing"] = {{"fps", report.fps},
                       {"generated_frames", report.generated_frames},
                       {"generation_seconds", report.generation_seconds}};
    }
    return j.dump(2);
}

void save_eval_report(const std::string& path, const EvalReport& report) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError(0, "cannot open report file: " + path);
    std::string text = eval_report_to_json(report);
    f.write(text.data(), (std::streamsize)text.size());
    f << "\n";
    if (!f) throw FormatError(0, "failed writing report file: " + path);
}

EvalReport evaluate_model(const EvalInputs& inputs, const std::vector<CaptionedMotion>& test_split,
                          const std::vector<std::string>& task_names, const GenerationConfig& genconfig,
                          bool timing, long max_samples, std::uint64_t seed) {
    genconfig.validate();
    EvalReport report;
    report.seed = seed;
    report.timing = timing;

    std::vector<const CaptionedMotion*> items;
    for (const auto& s : test_split) {
        items.push_back(&s);
        if (max_samples > 0 && (long)items.size() >= max_samples) break;
    }
    if (!items.empty())
        report.feature_source = statistics_feature_source(items.front()->motion.skeleton).name;

    Clock clock;
    clock.enabled = timing;

    for (std::size_t t = 0; t < task_names.size(); ++t) {
        EvalTask task = eval_task_from_name(task_names[t]);  // reject unknown names up front
        EvalTaskResult result;
        result.task = task_names[t];

        const bool needs_tokenizer = task != EvalTask::LengthQA;
        std::string missing;
        if (!inputs.vocab) missing = "vocab missing";
        else if (!inputs.lm) missing = "lm checkpoint missing";
        else if (needs_tokenizer && !inputs.tokenizer) missing = "tokenizer checkpoint missing";
        else if (items.empty()) missing = "test split is empty";
        if (!missing.empty()) {
            result.skipped = true;
            result.skip_reason = missing;
            report.tasks.push_back(std::move(result));
            continue;
        }

        std::uint64_t task_seed = hash_combine(seed, (std::uint64_t)t);
        switch (task) {
            case EvalTask::TextToMotion:
                eval_text_to_motion(inputs, items, genconfig, task_seed, clock, result);
                break;
            case EvalTask::MotionToText:
                eval_motion_to_text(inputs, items, genconfig, task_seed, clock, result);
                break;
            case EvalTask::Prediction:
                eval_prediction(inputs, items, genconfig, task_seed, clock, result);
                break;
            case EvalTask::InBetween:
                eval_inbetween(inputs, items, genconfig, task_seed, clock, result);
                break;
            case EvalTask::LengthQA:
                eval_length_qa(inputs, items, genconfig, task_seed, clock, result);
                break;
        }
        report.tasks.push_back(std::move(result));
    }

    if (timing) {
        report.generated_frames = clock.frames;
        report.generation_seconds = clock.seconds;
        report.fps = clock.seconds > 0.0 ? (double)clock.frames / clock.seconds : 0.0;
    }
    return report;
}

}  // namespace molang
