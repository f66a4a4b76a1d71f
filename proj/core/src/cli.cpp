#include "molang/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "molang/checkpoint.hpp"
#include "molang/config.hpp"
#include "molang/dataset.hpp"
#include "molang/error.hpp"
#include "molang/eval.hpp"
#include "molang/generate.hpp"
#include "molang/lm_train.hpp"
#include "molang/metrics.hpp"
#include "molang/motion_io.hpp"
#include "molang/skeleton.hpp"
#include "molang/svg.hpp"
#include "molang/synthetic.hpp"
#include "molang/tasks.hpp"
#include "molang/vq_train.hpp"

namespace molang {

namespace {

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Per-subcommand base options. Flags beat --config, which beats defaults;
// --paper-scale swaps the default bundle before --config applies.
struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    bool paper_scale = false;
    CLI::Option* seed_opt = nullptr;

    void attach(CLI::App* cmd, bool with_paper_scale = false) {
        cmd->add_option("--config", config_path, "JSON config file overriding the built-in defaults");
        seed_opt = cmd->add_option("--seed", seed, "Seed controlling all randomness (default 0)");
        if (with_paper_scale)
            cmd->add_flag("--paper-scale", paper_scale,
                          "Start from full-scale iteration counts and batch sizes instead of desk scale");
    }

    RunConfig resolve() const {
        RunConfig base = paper_scale ? paper_scale_config() : desk_run_config();
        RunConfig cfg = config_path.empty() ? base : load_run_config(config_path, base);
        if (config_path.empty()) {
            apply_seed(cfg, cfg.seed);
            cfg.validate();
        }
        if (seed_opt != nullptr && seed_opt->count() > 0) apply_seed(cfg, seed);
        return cfg;
    }
};

// Optional flag override of a config field.
template <typename T>
struct Override {
    T value{};
    CLI::Option* opt = nullptr;

    CLI::Option* attach(CLI::App* cmd, const std::string& name, const std::string& help) {
        opt = cmd->add_option(name, value, help);
        return opt;
    }
    void apply(T& target) const {
        if (opt != nullptr && opt->count() > 0) target = value;
    }
};

std::vector<CaptionedMotion> load_data(const std::string& index_path) {
    return load_corpus(index_path, humanoid13());
}

// The text side of the unified vocabulary: corpus captions, every template
// pattern, and the numerals length prompts and answers can mention.
UnifiedVocab assemble_vocab(const std::vector<CaptionedMotion>& train, long motion_count) {
    std::vector<std::string> text;
    for (const auto& s : train)
        for (const auto& c : s.captions) text.push_back(c);
    for (const auto& t : template_bank()) {
        text.push_back(t.input_pattern);
        text.push_back(t.output_pattern);
    }
    for (int i = 0; i <= 512; ++i) text.push_back(std::to_string(i));
    return build_unified_vocab(text, motion_count);
}

std::vector<CorpusItemTokens> tokenize_split(const std::vector<CaptionedMotion>& split, const Tokenizer& tok) {
    std::vector<CorpusItemTokens> items;
    for (const auto& s : split) {
        CorpusItemTokens it;
        it.id = s.id;
        it.captions = s.captions;
        it.motion_ids = tokenize_motion(tok, s.motion);
        it.frames = s.motion.frame_count();
        it.fps = s.motion.fps;
        items.push_back(std::move(it));
    }
    return items;
}

std::vector<long> wrapped_with_eos(const std::vector<long>& codes, const UnifiedVocab& vocab) {
    std::vector<long> ids = wrap_motion(codes, vocab).ids;
    ids.push_back(UnifiedVocab::kEos);
    return ids;
}

std::vector<long> first_motion_segment(const std::vector<long>& ids, const UnifiedVocab& vocab) {
    for (const auto& seg : decode_mixed(ids, vocab))
        if (seg.kind == Segment::Kind::Motion && !seg.motion_ids.empty()) return seg.motion_ids;
    return {};
}

std::string text_segments(const std::vector<long>& ids, const UnifiedVocab& vocab) {
    std::string out;
    for (const auto& seg : decode_mixed(ids, vocab)) {
        if (seg.kind != Segment::Kind::Text || seg.text.empty()) continue;
        if (!out.empty()) out += " ";
        out += seg.text;
    }
    return out;
}

double reconstruction_mpjpe_mm(const Tokenizer& tok, const std::vector<CaptionedMotion>& split) {
    double sum = 0.0;
    long n = 0;
    for (const auto& s : split) {
        std::vector<long> codes = tokenize_motion(tok, s.motion);
        if (codes.empty()) continue;
        MotionSequence rec = detokenize_motion(tok, codes, s.motion.fps);
        MotionSequence gt = s.motion;
        const long frames = rec.frame_count();
        Tensor crop({frames, gt.joint_count(), 3});
        for (long t = 0; t < frames; ++t)
            for (long j = 0; j < gt.joint_count(); ++j)
                for (long k = 0; k < 3; ++k) crop.at(t, j, k) = gt.positions.at(t, j, k);
        gt.positions = std::move(crop);
        sum += joint_errors(gt, rec).mpjpe_mm;
        ++n;
    }
    return n > 0 ? sum / (double)n : 0.0;
}

// ---------------------------------------------------------------- gen-data

struct GenDataOpts {
    Common common;
    std::string out_dir;
    std::string families_csv;
    Override<long> count, frame_min, frame_max;
    Override<double> fps;
};

void run_gen_data(const GenDataOpts& o) {
    RunConfig cfg = o.common.resolve();
    SyntheticSpec spec = cfg.data;
    spec.seed = cfg.seed;
    if (!o.families_csv.empty()) {
        spec.families.clear();
        for (const auto& name : split_csv(o.families_csv)) spec.families.push_back(family_from_name(name));
    }
    o.count.apply(spec.count_per_family);
    o.frame_min.apply(spec.frame_min);
    o.frame_max.apply(spec.frame_max);
    o.fps.apply(spec.fps);

    auto corpus = generate_corpus(spec);
    std::string index = save_corpus(o.out_dir, corpus);
    std::printf("wrote %zu samples to %s\n", corpus.size(), index.c_str());
}

// Codes-per-usage-magnitude buckets; comparable across codebook sizes.
nlohmann::json usage_histogram_json(const std::vector<long>& counts) {
    const char* labels[] = {"0", "1-9", "10-99", "100-999", "1000+"};
    std::vector<long> buckets(5, 0);
    for (long c : counts) {
        int b = c == 0 ? 0 : c < 10 ? 1 : c < 100 ? 2 : c < 1000 ? 3 : 4;
        ++buckets[(std::size_t)b];
    }
    return nlohmann::json{{"buckets", labels}, {"codes", buckets}};
}

// --------------------------------------------------------- train-tokenizer

struct TrainTokenizerOpts {
    Common common;
    std::string data, out, report, sweep_csv;
    Override<long> steps, batch, crop, codebook_size;
    Override<double> lr;
};

void run_train_tokenizer(const TrainTokenizerOpts& o) {
    RunConfig cfg = o.common.resolve();
    TokenizerTrainConfig tt = cfg.tokenizer_train;
    o.steps.apply(tt.steps);
    o.batch.apply(tt.batch_size);
    o.crop.apply(tt.crop_frames);
    o.lr.apply(tt.lr);

    auto corpus = load_data(o.data);
    DatasetSplit split = split_dataset(corpus, cfg.split, cfg.seed);
    std::vector<MotionFeatures> feats;
    for (const auto& s : split.train) feats.push_back(features_from_positions(s.motion));

    if (!o.sweep_csv.empty()) {
        const std::vector<CaptionedMotion>& held_out = split.val.empty() ? split.train : split.val;
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& k_text : split_csv(o.sweep_csv)) {
            TokenizerConfig tc = cfg.tokenizer;
            tc.K = std::stol(k_text);
            TokenizerTrainResult r = train_tokenizer(feats, tc, tt);
            std::vector<std::vector<long>> streams;
            for (const auto& s : held_out) streams.push_back(tokenize_motion(r.tokenizer, s.motion));
            UtilizationReport u = codebook_utilization(streams, tc.K);
            double mpjpe = reconstruction_mpjpe_mm(r.tokenizer, held_out);
            entries.push_back({{"codebook_size", tc.K},
                               {"recon_loss", r.log.back().loss.total},
                               {"mpjpe_mm", mpjpe},
                               {"usage_fraction", u.usage_fraction},
                               {"usage_histogram", usage_histogram_json(u.counts)},
                               {"tokens", u.total},
                               {"held_out_motions", (long)held_out.size()}});
            std::printf("K=%ld mpjpe=%.2fmm usage=%.3f\n", tc.K, mpjpe, u.usage_fraction);
        }
        std::ofstream f(o.report, std::ios::binary | std::ios::trunc);
        if (!f) throw FormatError(0, "cannot open report file: " + o.report);
        f << entries.dump(2) << "\n";
        std::printf("wrote sweep report to %s\n", o.report.c_str());
        return;
    }

    TokenizerConfig tc = cfg.tokenizer;
    o.codebook_size.apply(tc.K);
    TokenizerTrainResult r = train_tokenizer(feats, tc, tt);
    save_tokenizer_checkpoint(o.out, r.tokenizer, run_config_to_json(cfg));
    std::printf("trained %ld steps (%ld epochs, %ld codes reset), final loss %.6f\n", tt.steps, r.epochs,
                r.codes_reset, r.log.back().loss.total);
    std::printf("wrote tokenizer checkpoint to %s\n", o.out.c_str());
}

// ------------------------------------------------------------------ stages

struct PretrainOpts {
    Common common;
    std::string data, vq, out, vocab_out;
    Override<long> steps, batch;
    Override<double> lr;
};

void run_pretrain(const PretrainOpts& o) {
    RunConfig cfg = o.common.resolve();
    StageConfig st = cfg.pretrain;
    o.steps.apply(st.steps);
    o.batch.apply(st.batch_size);
    o.lr.apply(st.lr);

    auto corpus = load_data(o.data);
    DatasetSplit split = split_dataset(corpus, cfg.split, cfg.seed);
    Tokenizer tok = load_tokenizer_checkpoint(o.vq);
    UnifiedVocab vocab = assemble_vocab(split.train, tok.config.K);
    save_vocab(o.vocab_out, vocab);

    std::vector<CorpusItemTokens> items = tokenize_split(split.train, tok);
    PretrainData data;
    for (const auto& it : items) {
        std::vector<long> words;
        for (long code : it.motion_ids) words.push_back(vocab.motion_word(code));
        data.motion_streams.push_back(std::move(words));
        for (const auto& caption : it.captions) {
            data.text_streams.push_back(vocab.encode_text(caption).ids);
            data.t2m_pairs.push_back({vocab.encode_text(caption).ids, wrapped_with_eos(it.motion_ids, vocab)});
            std::vector<long> cap_target = vocab.encode_text(caption).ids;
            cap_target.push_back(UnifiedVocab::kEos);
            data.m2t_pairs.push_back({wrap_motion(it.motion_ids, vocab).ids, std::move(cap_target)});
        }
    }

    LMWeights w = init_lm(cfg.lm, vocab.size(), cfg.seed);
    TrainLog log = train_pretrain(w, data, cfg.mixture, st, vocab);
    save_lm_checkpoint(o.out, w, vocab, run_config_to_json(cfg));
    std::printf("pretrained %ld steps, final loss %.6f\n", st.steps, log.final_loss);
    std::printf("wrote vocab to %s and checkpoint to %s\n", o.vocab_out.c_str(), o.out.c_str());
}

struct InstructOpts {
    Common common;
    std::string data, vq, lm, vocab, out, dataset_out;
    Override<long> steps, batch;
    Override<double> lr;
};

void run_instruct(const InstructOpts& o) {
    RunConfig cfg = o.common.resolve();
    StageConfig st = cfg.instruct;
    o.steps.apply(st.steps);
    o.batch.apply(st.batch_size);
    o.lr.apply(st.lr);

    auto corpus = load_data(o.data);
    DatasetSplit split = split_dataset(corpus, cfg.split, cfg.seed);
    Tokenizer tok = load_tokenizer_checkpoint(o.vq);
    UnifiedVocab vocab = load_vocab(o.vocab);
    LMWeights w = load_lm_checkpoint(o.lm, vocab);

    std::vector<CorpusItemTokens> items = tokenize_split(split.train, tok);
    InstructionDataset ds = build_instruction_dataset(items, vocab, cfg.seed);
    if (!o.dataset_out.empty()) {
        save_instruction_dataset(o.dataset_out, ds.samples);
        std::printf("wrote %zu instruction samples to %s (%ld items skipped as too short)\n", ds.samples.size(),
                    o.dataset_out.c_str(), ds.skipped);
    }
    std::vector<SeqPair> pairs;
    for (const auto& s : ds.samples) pairs.push_back({s.source.ids, s.target.ids});

    TrainLog log = train_pairs(w, pairs, st);
    save_lm_checkpoint(o.out, w, vocab, run_config_to_json(cfg));
    std::printf("instruction-tuned %ld steps over %zu samples, final loss %.6f\n", st.steps, pairs.size(),
                log.final_loss);
    std::printf("wrote checkpoint to %s\n", o.out.c_str());
}

// -------------------------------------------------------------- inference

GenerationConfig generation_config(const RunConfig& cfg, const std::string& mode, const Override<double>& temp,
                                   const Override<long>& beam, const Override<long>& max_new) {
    GenerationConfig gc = cfg.generation;
    if (!mode.empty()) {
        if (mode == "greedy") gc.mode = DecodeMode::Greedy;
        else if (mode == "sample") gc.mode = DecodeMode::Sample;
        else if (mode == "beam") gc.mode = DecodeMode::Beam;
        else throw ConfigError("unknown decode mode '" + mode + "' (greedy, sample, beam)");
    }
    temp.apply(gc.temperature);
    beam.apply(gc.beam_width);
    max_new.apply(gc.max_new_tokens);
    gc.validate();
    return gc;
}

struct GenerateOpts {
    Common common;
    std::string ckpt, vq, vocab, prompt, motion_out, svg_out, mode;
    Override<double> temperature;
    Override<long> beam_width, max_new, columns;
};

void run_generate(const GenerateOpts& o) {
    RunConfig cfg = o.common.resolve();
    UnifiedVocab vocab = load_vocab(o.vocab);
    LMWeights w = load_lm_checkpoint(o.ckpt, vocab);
    Tokenizer tok = load_tokenizer_checkpoint(o.vq);
    GenerationConfig gc = generation_config(cfg, o.mode, o.temperature, o.beam_width, o.max_new);

    TokenSequence source = vocab.encode_text(o.prompt);
    GenerationResult r = generate(w, source.ids, gc);
    std::vector<long> codes = first_motion_segment(r.ids, vocab);
    if (codes.empty())
        throw ContractError("the model produced no motion tokens for this prompt; try more training steps");
    MotionSequence motion = detokenize_motion(tok, codes, cfg.data.fps);
    save_motion(o.motion_out, motion);
    std::printf("generated %zu motion tokens -> %ld frames, wrote %s\n", codes.size(), motion.frame_count(),
                o.motion_out.c_str());
    if (!o.svg_out.empty()) {
        long cols = 8;
        o.columns.apply(cols);
        save_svg(o.svg_out, render_svg(motion, cols));
        std::printf("wrote %s\n", o.svg_out.c_str());
    }
}

struct CaptionOpts {
    Common common;
    std::string ckpt, vq, vocab, motion_in, out, mode;
    Override<double> temperature;
    Override<long> beam_width, max_new, template_id;
};

void run_caption(const CaptionOpts& o) {
    RunConfig cfg = o.common.resolve();
    UnifiedVocab vocab = load_vocab(o.vocab);
    LMWeights w = load_lm_checkpoint(o.ckpt, vocab);
    Tokenizer tok = load_tokenizer_checkpoint(o.vq);
    GenerationConfig gc = generation_config(cfg, o.mode, o.temperature, o.beam_width, o.max_new);

    MotionSequence motion = load_motion(o.motion_in, humanoid13());
    long tid = 0;
    o.template_id.apply(tid);
    auto pool = templates_for(TaskKind::MotionToText);
    if (tid < 0 || tid >= (long)pool.size())
        throw ConfigError("caption template id out of range [0, " + std::to_string(pool.size()) + ")");
    PromptBindings b;
    b.motion_ids = tokenize_motion(tok, motion);
    TokenSequence source = render_prompt(pool[(std::size_t)tid].input_pattern, b, vocab);
    GenerationResult r = generate(w, source.ids, gc);
    std::string text = text_segments(r.ids, vocab);
    if (text.empty()) throw ContractError("the model produced no text for this motion");
    std::printf("%s\n", text.c_str());
    if (!o.out.empty()) {
        std::ofstream f(o.out, std::ios::binary | std::ios::trunc);
        if (!f) throw FormatError(0, "cannot open output file: " + o.out);
        f << text << "\n";
    }
}

struct CompleteOpts {
    Common common;
    std::string ckpt, vq, vocab, motion_in, motion_out, svg_out, task, mode;
    Override<double> temperature;
    Override<long> beam_width, max_new, columns;
};

void run_complete(const CompleteOpts& o) {
    RunConfig cfg = o.common.resolve();
    UnifiedVocab vocab = load_vocab(o.vocab);
    LMWeights w = load_lm_checkpoint(o.ckpt, vocab);
    Tokenizer tok = load_tokenizer_checkpoint(o.vq);
    GenerationConfig gc = generation_config(cfg, o.mode, o.temperature, o.beam_width, o.max_new);

    MotionSequence motion = load_motion(o.motion_in, humanoid13());
    CorpusItemTokens item;
    item.id = "input";
    item.captions = {"input motion"};
    item.motion_ids = tokenize_motion(tok, motion);
    item.frames = motion.frame_count();
    item.fps = motion.fps;
    const long n = (long)item.motion_ids.size();

    std::vector<long> full;
    if (o.task == "pred") {
        InstructionSample s = build_prediction_sample(item, vocab, cfg.seed);
        GenerationResult r = generate(w, s.source.ids, gc);
        std::vector<long> codes = first_motion_segment(r.ids, vocab);
        if (codes.empty()) throw ContractError("the model produced no motion tokens for the prediction");
        const long prefix = prediction_prefix_tokens(n);
        full.assign(item.motion_ids.begin(), item.motion_ids.begin() + prefix);
        full.insert(full.end(), codes.begin(), codes.end());
    } else if (o.task == "inbetween") {
        InstructionSample s = build_inbetween_sample(item, InbetweenMode::Fixed252525, vocab, cfg.seed);
        GenerationResult r = generate(w, s.source.ids, gc);
        std::vector<long> codes = first_motion_segment(r.ids, vocab);
        InbetweenLayout layout = fixed_inbetween_layout(n);
        if ((long)codes.size() < layout.span)
            throw ContractError("the model generated " + std::to_string(codes.size()) +
                                " motion tokens for a hole of " + std::to_string(layout.span));
        full.assign(item.motion_ids.begin(), item.motion_ids.begin() + layout.keep);
        full.insert(full.end(), codes.begin(), codes.begin() + layout.span);
        full.insert(full.end(), item.motion_ids.begin() + layout.keep + layout.span, item.motion_ids.end());
    } else {
        throw ConfigError("unknown completion task '" + o.task + "' (pred, inbetween)");
    }

    MotionSequence out_motion = detokenize_motion(tok, full, motion.fps);
    save_motion(o.motion_out, out_motion);
    std::printf("completed %s: %ld input tokens -> %ld frames, wrote %s\n", o.task.c_str(), n,
                out_motion.frame_count(), o.motion_out.c_str());
    if (!o.svg_out.empty()) {
        long cols = 8;
        o.columns.apply(cols);
        save_svg(o.svg_out, render_svg(out_motion, cols));
        std::printf("wrote %s\n", o.svg_out.c_str());
    }
}

// ------------------------------------------------------------------- eval

struct EvalOpts {
    Common common;
    std::string data, ckpt, vq, vocab, tasks_csv, report, timing, mode;
    Override<double> temperature;
    Override<long> beam_width, max_new, max_samples;
};

void run_eval(const EvalOpts& o) {
    RunConfig cfg = o.common.resolve();
    GenerationConfig gc = generation_config(cfg, o.mode, o.temperature, o.beam_width, o.max_new);

    auto corpus = load_data(o.data);
    DatasetSplit split = split_dataset(corpus, cfg.split, cfg.seed);

    UnifiedVocab vocab;
    Tokenizer tok;
    LMWeights w;
    EvalInputs inputs;
    if (!o.vocab.empty()) {
        vocab = load_vocab(o.vocab);
        inputs.vocab = &vocab;
    }
    if (!o.vq.empty()) {
        tok = load_tokenizer_checkpoint(o.vq);
        inputs.tokenizer = &tok;
    }
    if (!o.ckpt.empty()) {
        if (o.vocab.empty()) throw ConfigError("--ckpt requires --vocab to verify checkpoint compatibility");
        w = load_lm_checkpoint(o.ckpt, vocab);
        inputs.lm = &w;
    }

    std::vector<std::string> tasks = o.tasks_csv.empty() ? cfg.eval.tasks : split_csv(o.tasks_csv);
    bool timing = cfg.eval.timing;
    if (!o.timing.empty()) timing = (o.timing == "on");
    long cap = cfg.eval.max_samples;
    o.max_samples.apply(cap);

    EvalReport rep = evaluate_model(inputs, split.test, tasks, gc, timing, cap, cfg.seed);
    if (o.report.empty()) {
        std::printf("%s\n", eval_report_to_json(rep).c_str());
    } else {
        save_eval_report(o.report, rep);
        std::printf("wrote eval report to %s\n", o.report.c_str());
    }
}

// -------------------------------------------------------- inspect-codebook

struct InspectOpts {
    Common common;
    std::string vq, data, split_name = "all", out;
};

void run_inspect_codebook(const InspectOpts& o) {
    RunConfig cfg = o.common.resolve();
    Tokenizer tok = load_tokenizer_checkpoint(o.vq);

    UtilizationReport report;
    std::string source;
    if (o.data.empty()) {
        // counts recorded while training
        report.counts = tok.codebook.usage;
        report.total = 0;
        long used = 0;
        for (long c : report.counts) {
            report.total += c;
            used += (c > 0);
        }
        report.usage_fraction = tok.config.K > 0 ? (double)used / (double)tok.config.K : 0.0;
        source = "training";
    } else {
        auto corpus = load_data(o.data);
        DatasetSplit split = split_dataset(corpus, cfg.split, cfg.seed);
        const std::vector<CaptionedMotion>* subset = nullptr;
        std::vector<CaptionedMotion> all;
        if (o.split_name == "train") subset = &split.train;
        else if (o.split_name == "val") subset = &split.val;
        else if (o.split_name == "test") subset = &split.test;
        else if (o.split_name == "all") {
            all = corpus;
            subset = &all;
        } else {
            throw ConfigError("unknown split '" + o.split_name + "' (train, val, test, all)");
        }
        std::vector<std::vector<long>> streams;
        for (const auto& s : *subset) streams.push_back(tokenize_motion(tok, s.motion));
        report = codebook_utilization(streams, tok.config.K);
        source = o.split_name + " split";
    }

    nlohmann::json j{{"codebook_size", tok.config.K},
                     {"source", source},
                     {"total_tokens", report.total},
                     {"usage_fraction", report.usage_fraction},
                     {"counts", report.counts}};
    if (o.out.empty()) {
        std::printf("%s\n", j.dump(2).c_str());
    } else {
        std::ofstream f(o.out, std::ios::binary | std::ios::trunc);
        if (!f) throw FormatError(0, "cannot open output file: " + o.out);
        f << j.dump(2) << "\n";
        std::printf("codebook usage %.3f over %ld tokens (%s), wrote %s\n", report.usage_fraction, report.total,
                    source.c_str(), o.out.c_str());
    }
}

// ----------------------------------------------------------------- render

struct RenderOpts {
    std::string motion_in, out;
    long columns = 8;
};

void run_render(const RenderOpts& o) {
    MotionSequence motion = load_motion(o.motion_in, humanoid13());
    save_svg(o.out, render_svg(motion, o.columns));
    std::printf("rendered %ld frames into %s\n", motion.frame_count(), o.out.c_str());
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Unified motion-language model: tokenize motion, train, generate, evaluate"};
    app.require_subcommand(1);

    GenDataOpts gen_data;
    {
        CLI::App* cmd = app.add_subcommand("gen-data", "Write a synthetic captioned-motion corpus");
        gen_data.common.attach(cmd);
        cmd->add_option("--out", gen_data.out_dir, "Output directory for motions/ and index.ndjson")->required();
        cmd->add_option("--families", gen_data.families_csv, "Comma-separated motion families (default: all)");
        gen_data.count.attach(cmd, "--count", "Samples per family (default 8)");
        gen_data.frame_min.attach(cmd, "--frame-min", "Minimum frames per sample (default 48)");
        gen_data.frame_max.attach(cmd, "--frame-max", "Maximum frames per sample (default 128)");
        gen_data.fps.attach(cmd, "--fps", "Frames per second (default 20)");
        cmd->callback([&] { run_gen_data(gen_data); });
    }

    TrainTokenizerOpts train_tok;
    {
        CLI::App* cmd = app.add_subcommand("train-tokenizer", "Train the motion tokenizer on the train split");
        train_tok.common.attach(cmd, true);
        cmd->add_option("--data", train_tok.data, "Corpus index.ndjson")->required();
        CLI::Option* out = cmd->add_option("--out", train_tok.out, "Tokenizer checkpoint path");
        CLI::Option* sweep =
            cmd->add_option("--sweep-k", train_tok.sweep_csv, "Comma-separated codebook sizes to compare");
        CLI::Option* report = cmd->add_option("--report", train_tok.report, "Sweep report JSON path");
        sweep->needs(report);
        sweep->excludes(out);
        out->excludes(sweep);
        train_tok.steps.attach(cmd, "--steps", "Training steps (default 2000, desk scale)");
        train_tok.batch.attach(cmd, "--batch", "Batch size (default 32)");
        train_tok.crop.attach(cmd, "--crop", "Training crop length in frames (default 64)");
        train_tok.lr.attach(cmd, "--lr", "Learning rate (default 1e-4)");
        train_tok.codebook_size.attach(cmd, "--codebook-size", "Codebook size K (default 512)");
        cmd->callback([&] {
            if (train_tok.sweep_csv.empty() && train_tok.out.empty())
                throw CLI::RequiredError("--out (or --sweep-k with --report)");
            run_train_tokenizer(train_tok);
        });
    }

    PretrainOpts pretrain;
    {
        CLI::App* cmd = app.add_subcommand(
            "pretrain", "Stage 1+2: span-corruption and paired-translation pretraining of the language model");
        pretrain.common.attach(cmd, true);
        cmd->add_option("--data", pretrain.data, "Corpus index.ndjson")->required();
        cmd->add_option("--vq", pretrain.vq, "Tokenizer checkpoint")->required();
        cmd->add_option("--out", pretrain.out, "LM checkpoint path")->required();
        cmd->add_option("--vocab-out", pretrain.vocab_out, "Unified vocabulary output path")->required();
        pretrain.steps.attach(cmd, "--steps", "Training steps (default 3000, desk scale)");
        pretrain.batch.attach(cmd, "--batch", "Batch size (default 8)");
        pretrain.lr.attach(cmd, "--lr", "Learning rate (default 2e-4)");
        cmd->callback([&] { run_pretrain(pretrain); });
    }

    InstructOpts instruct;
    {
        CLI::App* cmd = app.add_subcommand("instruct", "Stage 3: instruction tuning over the task-template corpus");
        instruct.common.attach(cmd, true);
        cmd->add_option("--data", instruct.data, "Corpus index.ndjson")->required();
        cmd->add_option("--vq", instruct.vq, "Tokenizer checkpoint")->required();
        cmd->add_option("--lm", instruct.lm, "Pretrained LM checkpoint")->required();
        cmd->add_option("--vocab", instruct.vocab, "Unified vocabulary file")->required();
        cmd->add_option("--out", instruct.out, "Tuned LM checkpoint path")->required();
        cmd->add_option("--dataset-out", instruct.dataset_out, "Also write the instruction dataset as NDJSON");
        instruct.steps.attach(cmd, "--steps", "Training steps (default 3000, desk scale)");
        instruct.batch.attach(cmd, "--batch", "Batch size (default 8)");
        instruct.lr.attach(cmd, "--lr", "Learning rate (default 1e-4)");
        cmd->callback([&] { run_instruct(instruct); });
    }

    auto attach_decode = [](CLI::App* cmd, std::string& mode, Override<double>& temp, Override<long>& beam,
                            Override<long>& max_new) {
        cmd->add_option("--mode", mode, "Decoding mode: greedy, sample, beam (default greedy)");
        temp.attach(cmd, "--temperature", "Sampling temperature (default 1.0)");
        beam.attach(cmd, "--beam-width", "Beam width (default 1)");
        max_new.attach(cmd, "--max-new-tokens", "Generation cap (default 64)");
    };

    GenerateOpts gen;
    {
        CLI::App* cmd = app.add_subcommand("generate", "Text prompt -> motion file (and optional SVG strip)");
        gen.common.attach(cmd);
        cmd->add_option("--ckpt", gen.ckpt, "LM checkpoint")->required();
        cmd->add_option("--vq", gen.vq, "Tokenizer checkpoint")->required();
        cmd->add_option("--vocab", gen.vocab, "Unified vocabulary file")->required();
        cmd->add_option("--prompt", gen.prompt, "Full instruction prompt text")->required();
        cmd->add_option("--motion-out", gen.motion_out, "Output .mgm motion file")->required();
        cmd->add_option("--svg", gen.svg_out, "Also render an SVG strip here");
        gen.columns.attach(cmd, "--columns", "SVG strip panels (default 8)");
        attach_decode(cmd, gen.mode, gen.temperature, gen.beam_width, gen.max_new);
        cmd->callback([&] { run_generate(gen); });
    }

    CaptionOpts caption;
    {
        CLI::App* cmd = app.add_subcommand("caption", "Motion file -> caption text");
        caption.common.attach(cmd);
        cmd->add_option("--ckpt", caption.ckpt, "LM checkpoint")->required();
        cmd->add_option("--vq", caption.vq, "Tokenizer checkpoint")->required();
        cmd->add_option("--vocab", caption.vocab, "Unified vocabulary file")->required();
        cmd->add_option("--motion", caption.motion_in, "Input .mgm motion file")->required();
        cmd->add_option("--out", caption.out, "Also write the caption to this file");
        caption.template_id.attach(cmd, "--template-id", "Captioning prompt template index (default 0)");
        attach_decode(cmd, caption.mode, caption.temperature, caption.beam_width, caption.max_new);
        cmd->callback([&] { run_caption(caption); });
    }

    CompleteOpts complete;
    {
        CLI::App* cmd = app.add_subcommand("complete", "Predict a motion's future or fill its interior");
        complete.common.attach(cmd);
        cmd->add_option("--ckpt", complete.ckpt, "LM checkpoint")->required();
        cmd->add_option("--vq", complete.vq, "Tokenizer checkpoint")->required();
        cmd->add_option("--vocab", complete.vocab, "Unified vocabulary file")->required();
        cmd->add_option("--motion", complete.motion_in, "Input .mgm motion file")->required();
        cmd->add_option("--task", complete.task, "pred (20% prefix -> rest) or inbetween (25/50/25 fill)")
            ->required();
        cmd->add_option("--motion-out", complete.motion_out, "Output .mgm motion file")->required();
        cmd->add_option("--svg", complete.svg_out, "Also render an SVG strip here");
        complete.columns.attach(cmd, "--columns", "SVG strip panels (default 8)");
        attach_decode(cmd, complete.mode, complete.temperature, complete.beam_width, complete.max_new);
        cmd->callback([&] { run_complete(complete); });
    }

    EvalOpts eval;
    {
        CLI::App* cmd = app.add_subcommand("eval", "Run the evaluation protocol over the test split");
        eval.common.attach(cmd);
        cmd->add_option("--data", eval.data, "Corpus index.ndjson")->required();
        cmd->add_option("--ckpt", eval.ckpt, "LM checkpoint (tasks needing it are skipped when absent)");
        cmd->add_option("--vq", eval.vq, "Tokenizer checkpoint (tasks needing it are skipped when absent)");
        cmd->add_option("--vocab", eval.vocab, "Unified vocabulary file");
        cmd->add_option("--tasks", eval.tasks_csv, "Comma-separated tasks: t2m,m2t,pred,inbetween,lengthqa");
        cmd->add_option("--report", eval.report, "Report JSON path (default: print to stdout)");
        cmd->add_option("--timing", eval.timing, "FPS measurement: on or off (default on)")
            ->check(CLI::IsMember({"on", "off"}));
        eval.max_samples.attach(cmd, "--max-samples", "Cap evaluated samples per task (default 0 = all)");
        attach_decode(cmd, eval.mode, eval.temperature, eval.beam_width, eval.max_new);
        cmd->callback([&] { run_eval(eval); });
    }

    InspectOpts inspect;
    {
        CLI::App* cmd = app.add_subcommand("inspect-codebook", "Codebook utilization histogram");
        inspect.common.attach(cmd);
        cmd->add_option("--vq", inspect.vq, "Tokenizer checkpoint")->required();
        cmd->add_option("--data", inspect.data, "Recount over this corpus (default: training-time counts)");
        cmd->add_option("--split", inspect.split_name, "Split to count: train, val, test, all (default all)");
        cmd->add_option("--out", inspect.out, "Histogram JSON path (default: print to stdout)");
        cmd->callback([&] { run_inspect_codebook(inspect); });
    }

    RenderOpts render;
    {
        CLI::App* cmd = app.add_subcommand("render", "Motion file -> SVG stick-figure strip");
        cmd->add_option("--motion", render.motion_in, "Input .mgm motion file")->required();
        cmd->add_option("--out", render.out, "Output SVG path")->required();
        cmd->add_option("--columns", render.columns, "Strip panels (default 8)");
        cmd->callback([&] { run_render(render); });
    }

    std::vector<std::string> argv_storage = args;
    std::vector<const char*> argv;
    argv.push_back("molang");
    for (const auto& a : argv_storage) argv.push_back(a.c_str());

    try {
        app.parse((int)argv.size(), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n";
        CLI::App* scope = &app;
        auto parsed = app.get_subcommands();
        if (!parsed.empty()) scope = parsed.front();
        std::cerr << scope->help();  // lists the valid flags
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace molang
