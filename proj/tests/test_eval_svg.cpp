#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/error.hpp"
#include "molang/eval.hpp"
#include "molang/lm_train.hpp"
#include "molang/svg.hpp"
#include "molang/synthetic.hpp"
#include "molang/tasks.hpp"
#include "molang/vq_train.hpp"

#include <filesystem>
#include <string>
#include <vector>

using namespace molang;

namespace {

long count_sub(const std::string& s, const std::string& sub) {
    long n = 0;
    for (std::size_t p = s.find(sub); p != std::string::npos; p = s.find(sub, p + sub.size())) ++n;
    return n;
}

// minimal well-formedness scan: tags balance, attribute quotes pair up
bool well_formed(const std::string& s) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '<') {
            if (s[i] == '>') return false;
            ++i;
            continue;
        }
        std::size_t end = s.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = s.substr(i + 1, end - i - 1);
        if (tag.empty()) return false;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
        } else if (tag.back() != '/') {
            std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
            stack.push_back(name);
        }
        if (count_sub(tag, "\"") % 2 != 0) return false;
        i = end + 1;
    }
    return stack.empty();
}

// One trained tokenizer + LM + vocab shared by the eval cases; training them
// once keeps the suite inside the CI budget.
struct EvalFixture {
    std::vector<CaptionedMotion> corpus;
    Tokenizer tok;
    UnifiedVocab vocab;
    LMWeights lm;

    EvalFixture() {
        SyntheticSpec spec;
        spec.families = {all_families()[0], all_families()[1]};
        spec.count_per_family = 4;
        spec.frame_min = 48;
        spec.frame_max = 64;
        spec.seed = 3;
        corpus = generate_corpus(spec);

        TokenizerConfig tc = desk_tokenizer_config();
        tc.K = 64;
        std::vector<MotionFeatures> feats;
        for (const auto& s : corpus) feats.push_back(features_from_positions(s.motion));
        TokenizerTrainConfig tt;
        tt.steps = 120;
        tt.batch_size = 8;
        tt.crop_frames = 48;
        tt.seed = 3;
        tt.log_every = 1000;
        tok = train_tokenizer(feats, tc, tt).tokenizer;

        std::vector<std::string> text;
        for (const auto& s : corpus)
            for (const auto& c : s.captions) text.push_back(c);
        for (const auto& t : template_bank()) {
            text.push_back(t.input_pattern);
            text.push_back(t.output_pattern);
        }
        for (int i = 0; i <= 512; ++i) text.push_back(std::to_string(i));
        vocab = build_unified_vocab(text, tc.K);

        std::vector<CorpusItemTokens> items;
        for (const auto& s : corpus) {
            CorpusItemTokens it;
            it.id = s.id;
            it.captions = s.captions;
            it.motion_ids = tokenize_motion(tok, s.motion);
            it.frames = s.motion.frame_count();
            it.fps = s.motion.fps;
            items.push_back(std::move(it));
        }
        InstructionDataset ds = build_instruction_dataset(items, vocab, 3);
        std::vector<SeqPair> pairs;
        for (const auto& s : ds.samples) pairs.push_back({s.source.ids, s.target.ids});

        LMConfig lc;
        lc.d_model = 64;
        lc.n_layers = 2;
        lc.n_heads = 2;
        lc.d_kv = 32;
        lc.d_ff = 256;
        lc.dropout = 0.0;
        lm = init_lm(lc, vocab.size(), 3);
        StageConfig st;
        st.steps = 500;
        st.batch_size = 4;
        st.lr = 5e-4;
        st.dropout = 0.0;
        st.seed = 3;
        st.log_every = 1000;
        train_pairs(lm, pairs, st);
    }
};

EvalFixture& fixture() {
    static EvalFixture f;
    return f;
}

const std::vector<std::string> kTasks = {"t2m", "m2t", "pred", "inbetween", "lengthqa"};

}  // namespace

TEST_CASE("a trained desk model evaluates every task without skips and deterministically") {
    EvalFixture& f = fixture();
    EvalInputs in;
    in.tokenizer = &f.tok;
    in.lm = &f.lm;
    in.vocab = &f.vocab;
    GenerationConfig gen;
    gen.max_new_tokens = 48;

    EvalReport rep = evaluate_model(in, f.corpus, kTasks, gen, false, 0, 7);
    REQUIRE(rep.tasks.size() == 5);
    for (std::size_t i = 0; i < kTasks.size(); ++i) {
        CHECK(rep.tasks[i].task == kTasks[i]);
        CHECK(!rep.tasks[i].skipped);
    }

    const auto& t2m = rep.tasks[0];
    if (t2m.samples >= 2) {
        CHECK(t2m.metrics.count("fid"));
        CHECK(t2m.metrics.count("div_gen"));
        CHECK(t2m.metrics.count("mm"));
        CHECK(t2m.metrics.at("fid") >= 0.0);
    }
    const auto& pred = rep.tasks[2];
    if (pred.samples > 0) {
        CHECK(pred.metrics.count("ade"));
        CHECK(pred.metrics.count("fde"));
        CHECK(pred.metrics.at("ade") >= 0.0);
    }
    CHECK(rep.tasks[4].samples == 8);

    EvalReport rep2 = evaluate_model(in, f.corpus, kTasks, gen, false, 0, 7);
    CHECK(eval_report_to_json(rep) == eval_report_to_json(rep2));

    // the timing block appears only when requested and never moves metrics
    EvalReport rep3 = evaluate_model(in, f.corpus, kTasks, gen, true, 0, 7);
    CHECK(rep3.timing);
    CHECK(eval_report_to_json(rep3).find("\"timing\"") != std::string::npos);
    CHECK(eval_report_to_json(rep).find("\"timing\"") == std::string::npos);
    for (std::size_t i = 0; i < rep.tasks.size(); ++i) CHECK(rep.tasks[i].metrics == rep3.tasks[i].metrics);
    if (rep3.generated_frames > 0) CHECK(rep3.fps > 0.0);

    auto path = std::filesystem::temp_directory_path() / "molang_test_eval_report.json";
    save_eval_report(path.string(), rep);
    CHECK(std::filesystem::file_size(path) > 0);
}

TEST_CASE("motion tasks are skipped with a reason when the tokenizer is absent") {
    EvalFixture& f = fixture();
    EvalInputs in;
    in.tokenizer = nullptr;
    in.lm = &f.lm;
    in.vocab = &f.vocab;
    GenerationConfig gen;
    gen.max_new_tokens = 48;

    EvalReport rep = evaluate_model(in, f.corpus, kTasks, gen, false, 0, 7);
    for (int i = 0; i < 4; ++i) {
        CHECK(rep.tasks[(std::size_t)i].skipped);
        CHECK(rep.tasks[(std::size_t)i].skip_reason == "tokenizer checkpoint missing");
    }
    CHECK(!rep.tasks[4].skipped);  // length QA is text-only
}

TEST_CASE("max_samples caps the per-task workload and unknown aliases are rejected") {
    EvalFixture& f = fixture();
    EvalInputs in;
    in.tokenizer = &f.tok;
    in.lm = &f.lm;
    in.vocab = &f.vocab;
    GenerationConfig gen;
    gen.max_new_tokens = 48;

    EvalReport rep = evaluate_model(in, f.corpus, {"lengthqa"}, gen, false, 2, 7);
    CHECK(rep.tasks[0].samples == 2);

    CHECK_THROWS_AS(evaluate_model(in, f.corpus, {"t2m", "bogus"}, gen, false, 0, 7), ConfigError);
}

TEST_CASE("svg strips have one panel per sampled frame and stay well formed") {
    SyntheticSpec spec;
    spec.count_per_family = 1;
    spec.frame_min = 64;
    spec.frame_max = 64;
    spec.seed = 11;
    auto corpus = generate_corpus(spec);
    const MotionSequence& m = corpus[0].motion;
    REQUIRE(m.frame_count() == 64);

    std::string svg = render_svg(m, 8);
    CHECK(count_sub(svg, "<g>") == 8);
    CHECK(count_sub(svg, "</g>") == 8);
    CHECK(well_formed(svg));
    CHECK(svg == render_svg(m, 8));

    long bones = 0;
    for (long p : m.skeleton.parent) bones += (p >= 0);
    CHECK(count_sub(svg, "<line ") == 8 * bones);
    CHECK(count_sub(svg, "<circle ") == 8 * m.joint_count());

    MotionSequence single = m;
    single.positions = Tensor({1, m.joint_count(), 3});
    for (long j = 0; j < m.joint_count(); ++j)
        for (long k = 0; k < 3; ++k) single.positions.at(0, j, k) = m.positions.at(0, j, k);
    std::string s1 = render_svg(single, 1);
    CHECK(count_sub(s1, "<g>") == 1);
    CHECK(well_formed(s1));

    // more columns than frames: stride clamps to 1
    MotionSequence five = m;
    five.positions = Tensor({5, m.joint_count(), 3});
    for (long t = 0; t < 5; ++t)
        for (long j = 0; j < m.joint_count(); ++j)
            for (long k = 0; k < 3; ++k) five.positions.at(t, j, k) = m.positions.at(t, j, k);
    CHECK(count_sub(render_svg(five, 8), "<g>") == 5);

    CHECK_THROWS_AS(render_svg(m, 0), ContractError);

    auto path = std::filesystem::temp_directory_path() / "molang_test_strip.svg";
    save_svg(path.string(), svg);
    CHECK(std::filesystem::file_size(path) == svg.size());
}
