#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/tasks.hpp"

#include "molang/error.hpp"
#include "molang/rng.hpp"
#include "molang/vocab.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace molang;

namespace {

std::vector<std::string> caption_pool() {
    const char* subjects[] = {"a person", "someone", "the man", "the woman", "a figure"};
    const char* verbs[] = {"walks", "runs", "jumps", "waves", "turns", "bends", "kicks", "sits down"};
    const char* mods[] = {"forward",      "backward",    "quickly",      "slowly",
                          "in a circle",  "to the left", "to the right", "and stops"};
    std::vector<std::string> out;
    for (auto s : subjects)
        for (auto v : verbs)
            for (auto m : mods) out.push_back(std::string(s) + " " + v + " " + m + ".");
    return out;
}

UnifiedVocab task_vocab(const std::vector<std::string>& pool) {
    std::vector<std::string> corpus = pool;
    for (const auto& t : template_bank()) {
        corpus.push_back(t.input_pattern);
        corpus.push_back(t.output_pattern);
    }
    for (int i = 0; i <= 512; ++i) corpus.push_back(std::to_string(i));
    return build_unified_vocab(corpus, 512);
}

std::vector<CorpusItemTokens> token_corpus(const std::vector<std::string>& pool) {
    Rng crng(99);
    std::vector<CorpusItemTokens> corpus;
    for (int i = 0; i < 64; ++i) {
        CorpusItemTokens it;
        it.id = "item" + std::to_string(i);
        it.captions = {pool[crng.next_below(pool.size())], pool[crng.next_below(pool.size())]};
        long L = (i == 0) ? 5 : (i == 1) ? 7 : (long)(8 + crng.next_below(33));
        for (long t = 0; t < L; ++t) it.motion_ids.push_back((long)crng.next_below(512));
        it.frames = 4 * L;
        it.fps = 20.0;
        corpus.push_back(it);
    }
    return corpus;
}

}  // namespace

TEST_CASE("template bank carries at least ten templates per task") {
    std::map<int, int> per_task;
    for (const auto& t : template_bank()) per_task[(int)t.task]++;
    CHECK((int)per_task.size() == kTaskKindCount);
    for (const auto& [k, c] : per_task) {
        CAPTURE(k);
        CHECK(c >= 10);
    }
}

TEST_CASE("template bank keeps the published prompt wordings verbatim") {
    auto has_input = [&](const char* s) {
        for (const auto& t : template_bank())
            if (t.input_pattern == s) return true;
        return false;
    };
    CHECK(has_input("Give me a motion that corresponds to [caption]."));
    CHECK(has_input("Describe the movement portrayed in [motion]that lasts [frames] frames."));
    CHECK(has_input("What is the total duration of  [motion]'s body movements in seconds?"));
    CHECK(has_input("Provide an accurate caption describing the motion of <motion_tokens>"));
}

TEST_CASE("task names roundtrip and unknown names are rejected") {
    for (TaskKind k : all_task_kinds()) CHECK(task_from_name(task_name(k)) == k);
    CHECK_THROWS_AS(task_from_name("nope"), ConfigError);
}

TEST_CASE("split helpers give the documented prefix and hole sizes") {
    CHECK(prediction_prefix_tokens(20) == 4);
    CHECK(prediction_prefix_tokens(5) == 1);
    CHECK(prediction_prefix_tokens(2) == 1);  // floor of the max(1, ...) clamp
    InbetweenLayout lay = fixed_inbetween_layout(20);
    CHECK(lay.keep == 5);
    CHECK(lay.span == 10);
    InbetweenLayout odd = fixed_inbetween_layout(19);
    CHECK(odd.keep == 4);
    CHECK(odd.span == 11);
    CHECK(2 * odd.keep + odd.span == 19);
}

TEST_CASE("instruction dataset skips short items and keeps every sample clean") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    auto corpus = token_corpus(pool);
    InstructionDataset ds = build_instruction_dataset(corpus, vocab, 7);
    CHECK(ds.skipped == 2);  // two items too short for in-between only
    CHECK((long)ds.samples.size() == 64 * kTaskKindCount - 2);

    for (const auto& s : ds.samples) {
        REQUIRE(!s.source.ids.empty());
        REQUIRE(!s.target.ids.empty());
        REQUIRE(s.target.ids.back() == UnifiedVocab::kEos);
        long rc = -1;
        decode_mixed(s.source.ids, vocab, &rc);
        REQUIRE(rc == 0);
        rc = -1;
        decode_mixed(s.target.ids, vocab, &rc);
        REQUIRE(rc == 0);
        for (long id : s.source.ids) REQUIRE(id != UnifiedVocab::kUnk);
        for (long id : s.target.ids) REQUIRE(id != UnifiedVocab::kUnk);
        REQUIRE(s.source.role == Role::Source);
        REQUIRE(s.target.role == Role::Target);
    }
}

TEST_CASE("prediction samples split at twenty percent and splice back exactly") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    auto corpus = token_corpus(pool);
    InstructionDataset ds = build_instruction_dataset(corpus, vocab, 7);
    int checked = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& item = corpus[i];
        std::uint64_t sseed = hash_combine(hash_combine(7, (std::uint64_t)i), (std::uint64_t)10);
        InstructionSample alone = build_prediction_sample(item, vocab, sseed);
        const InstructionSample* row = nullptr;
        for (const auto& s : ds.samples)
            if (s.task == TaskKind::MotionPrediction && s.provenance.corpus_id == item.id) row = &s;
        REQUIRE(row);
        REQUIRE(row->source.ids == alone.source.ids);
        REQUIRE(row->target.ids == alone.target.ids);

        auto segs = decode_mixed(alone.source.ids, vocab);
        std::vector<long> pre;
        for (const auto& g : segs)
            if (g.kind == Segment::Kind::Motion) pre = g.motion_ids;
        std::vector<long> rest = unwrap_motion(
            {std::vector<long>(alone.target.ids.begin(), alone.target.ids.end() - 1), Role::Target}, vocab);
        REQUIRE((long)pre.size() == prediction_prefix_tokens((long)item.motion_ids.size()));
        std::vector<long> joined = pre;
        joined.insert(joined.end(), rest.begin(), rest.end());
        REQUIRE(joined == item.motion_ids);
        ++checked;
    }
    CHECK(checked == 64);
}

TEST_CASE("fixed in-between masks the middle half with the hole as target") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    CorpusItemTokens item;
    item.id = "fixed";
    item.captions = {"a person walks forward."};
    for (long t = 0; t < 20; ++t) item.motion_ids.push_back(100 + t);
    item.frames = 80;
    InstructionSample s = build_inbetween_sample(item, InbetweenMode::Fixed252525, vocab, 3);
    long rc = -1;
    auto segs = decode_mixed(s.source.ids, vocab, &rc);
    REQUIRE(rc == 0);
    std::vector<std::vector<long>> motions;
    bool saw_sentinel = false;
    for (const auto& g : segs) {
        if (g.kind == Segment::Kind::Motion) motions.push_back(g.motion_ids);
        else if (g.text.find("<extra_id_0>") != std::string::npos) saw_sentinel = true;
    }
    CHECK(saw_sentinel);
    REQUIRE(motions.size() == 2);
    CHECK(motions[0] == std::vector<long>(item.motion_ids.begin(), item.motion_ids.begin() + 5));
    CHECK(motions[1] == std::vector<long>(item.motion_ids.begin() + 15, item.motion_ids.end()));
    std::vector<long> hole =
        unwrap_motion({std::vector<long>(s.target.ids.begin(), s.target.ids.end() - 1), Role::Target}, vocab);
    CHECK(hole == std::vector<long>(item.motion_ids.begin() + 5, item.motion_ids.begin() + 15));
}

TEST_CASE("random in-between holes stay near half the sequence and splice back") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    auto corpus = token_corpus(pool);
    InstructionDataset ds = build_instruction_dataset(corpus, vocab, 7);
    for (std::size_t i = 2; i < corpus.size(); ++i) {
        const auto& item = corpus[i];
        std::uint64_t sseed = hash_combine(hash_combine(7, (std::uint64_t)i), (std::uint64_t)11);
        InstructionSample alone = build_inbetween_sample(item, InbetweenMode::Random50, vocab, sseed);
        const InstructionSample* row = nullptr;
        for (const auto& s : ds.samples)
            if (s.task == TaskKind::MotionInBetween && s.provenance.corpus_id == item.id) row = &s;
        REQUIRE(row);
        REQUIRE(row->source.ids == alone.source.ids);
        REQUIRE(row->target.ids == alone.target.ids);

        auto segs = decode_mixed(alone.source.ids, vocab);
        std::vector<std::vector<long>> motions;
        for (const auto& g : segs)
            if (g.kind == Segment::Kind::Motion) motions.push_back(g.motion_ids);
        REQUIRE(motions.size() == 2);
        std::vector<long> hole = unwrap_motion(
            {std::vector<long>(alone.target.ids.begin(), alone.target.ids.end() - 1), Role::Target}, vocab);
        long L = (long)item.motion_ids.size();
        double frac = (double)hole.size() / (double)L;
        REQUIRE(frac >= 0.4 - 1e-12);
        REQUIRE(frac <= 0.6 + 1e-12);
        REQUIRE(motions[0].size() >= 1);
        REQUIRE(motions[1].size() >= 1);
        std::vector<long> joined = motions[0];
        joined.insert(joined.end(), hole.begin(), hole.end());
        joined.insert(joined.end(), motions[1].begin(), motions[1].end());
        REQUIRE(joined == item.motion_ids);
    }
}

TEST_CASE("duration answers carry the right frame and second values") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    CorpusItemTokens item;
    item.id = "dur";
    item.captions = {"someone runs quickly."};
    for (long t = 0; t < 16; ++t) item.motion_ids.push_back(t);
    item.frames = 64;  // 3.2 s at 20 fps
    item.fps = 20.0;
    InstructionDataset d1 = build_instruction_dataset({item}, vocab, 21);
    int seen = 0;
    for (const auto& s : d1.samples) {
        if (s.task != TaskKind::MotionToLength && s.task != TaskKind::CaptionToLength && s.task != TaskKind::LengthQA)
            continue;
        std::string txt = vocab.decode_text(s.target.ids);
        CAPTURE(txt);
        bool ok = txt.find("64") != std::string::npos || txt.find("3 . 2") != std::string::npos;
        CHECK(ok);
        ++seen;
    }
    CHECK(seen == 3);
}

TEST_CASE("dataset builds are deterministic per seed and differ across seeds") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    auto corpus = token_corpus(pool);
    InstructionDataset ds = build_instruction_dataset(corpus, vocab, 7);
    InstructionDataset again = build_instruction_dataset(corpus, vocab, 7);
    REQUIRE(again.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        REQUIRE(again.samples[i].source.ids == ds.samples[i].source.ids);
        REQUIRE(again.samples[i].target.ids == ds.samples[i].target.ids);
        REQUIRE(again.samples[i].provenance.seed == ds.samples[i].provenance.seed);
    }
    InstructionDataset other = build_instruction_dataset(corpus, vocab, 8);
    bool differs = false;
    for (std::size_t i = 0; i < ds.samples.size() && !differs; ++i)
        differs = other.samples[i].source.ids != ds.samples[i].source.ids;
    CHECK(differs);
}

TEST_CASE("the filled prompt space exceeds one thousand distinct strings") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    auto corpus = token_corpus(pool);
    std::set<std::string> prompts;
    for (const auto& t : template_bank())
        for (const auto& item : corpus) prompts.insert(fill_template_text(t, item, vocab, item.captions[0]));
    CHECK(prompts.size() >= 1000);
}

TEST_CASE("instruction samples roundtrip through ndjson") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    auto corpus = token_corpus(pool);
    InstructionDataset ds = build_instruction_dataset(corpus, vocab, 7);
    auto path = (std::filesystem::temp_directory_path() / "molang_test_tasks.ndjson").string();
    save_instruction_dataset(path, ds.samples);
    auto back = load_instruction_dataset(path);
    REQUIRE(back.size() == ds.samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].task == ds.samples[i].task);
        REQUIRE(back[i].source.ids == ds.samples[i].source.ids);
        REQUIRE(back[i].target.ids == ds.samples[i].target.ids);
        REQUIRE(back[i].provenance.corpus_id == ds.samples[i].provenance.corpus_id);
        REQUIRE(back[i].provenance.template_id == ds.samples[i].provenance.template_id);
        REQUIRE(back[i].provenance.seed == ds.samples[i].provenance.seed);
    }

    auto bad_path = (std::filesystem::temp_directory_path() / "molang_test_tasks_bad.ndjson").string();
    FILE* bad = fopen(bad_path.c_str(), "w");
    fputs("{\"task\": \"text_to_motion\", \"source_ids\": [1], \"target_ids\": [1]}\nnot json\n", bad);
    fclose(bad);
    CHECK_THROWS_AS(load_instruction_dataset(bad_path), FormatError);
}

TEST_CASE("builders reject sequences too short for their protocol") {
    auto pool = caption_pool();
    UnifiedVocab vocab = task_vocab(pool);
    CorpusItemTokens tiny;
    tiny.id = "tiny";
    tiny.captions = {"x"};
    tiny.motion_ids = {1, 2, 3, 4};
    CHECK_THROWS_AS(build_prediction_sample(tiny, vocab, 1), ContractError);
    tiny.motion_ids = {1, 2, 3, 4, 5, 6, 7};
    CHECK_THROWS_AS(build_inbetween_sample(tiny, InbetweenMode::Random50, vocab, 1), ContractError);
}
