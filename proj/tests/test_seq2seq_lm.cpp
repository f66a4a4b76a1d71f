#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/generate.hpp"
#include "molang/lm.hpp"
#include "molang/lm_train.hpp"

#include "molang/vocab.hpp"

#include <cmath>

using namespace molang;

namespace {

LMConfig tiny_lm_config() {
    LMConfig c = desk_lm_config();
    c.n_layers = 2;
    c.d_model = 32;
    c.n_heads = 2;
    c.d_kv = 16;
    c.d_ff = 64;
    return c;
}

}  // namespace

TEST_CASE("zero embeddings give the uniform-distribution loss ln V") {
    LMConfig cfg = desk_lm_config();
    cfg.n_layers = 1;
    LMWeights w = init_lm(cfg, 100, 1);
    w.params.get("embed").fill(0.0);
    double loss = lm_forward_loss(w, {5, 6, 7}, {8, 9});
    CHECK(std::fabs(loss - std::log(100.0)) < 1e-12);
}

TEST_CASE("relative position buckets are monotone and split by direction") {
    // causal: rel >= 0 (future) collapses to bucket 0
    CHECK(relative_bucket(0, false, 32, 128) == 0);
    CHECK(relative_bucket(3, false, 32, 128) == 0);
    CHECK(relative_bucket(-1, false, 32, 128) == 1);
    long prev = 0;
    for (long d = 0; d < 300; ++d) {
        long b = relative_bucket(-d, false, 32, 128);
        REQUIRE(b >= prev);
        REQUIRE(b < 32);
        prev = b;
    }
    // bidirectional: signs occupy disjoint halves
    CHECK(relative_bucket(-2, true, 32, 128) < 16);
    CHECK(relative_bucket(2, true, 32, 128) >= 16);
    CHECK(relative_bucket(250, true, 32, 128) == 31);
}

TEST_CASE("decoder is causal: later target tokens cannot influence earlier logits") {
    LMWeights w = init_lm(tiny_lm_config(), 50, 7);
    std::vector<long> src = {5, 6, 7, 8};
    std::vector<long> tgt_a = {10, 11, 12, 13, 1};
    std::vector<long> tgt_b = {10, 11, 12, 40, 1};  // differs at position 3
    auto logits_for = [&](const std::vector<long>& tgt) {
        Graph g;
        LMBound b = bind_lm(g, w, false);
        Var enc = encoder_forward(g, w, b, src, 0.0, nullptr);
        std::vector<long> dec_in = {0};
        dec_in.insert(dec_in.end(), tgt.begin(), tgt.end() - 1);
        return g.value(decoder_forward(g, w, b, dec_in, enc, src, 0.0, nullptr));
    };
    Tensor la = logits_for(tgt_a), lb = logits_for(tgt_b);
    // dec_in differs at row 4, so rows 0..3 must match bitwise
    for (long i = 0; i < 4; ++i)
        for (long j = 0; j < 50; ++j) REQUIRE(la.at(i, j) == lb.at(i, j));
}

TEST_CASE("appending pad tokens to the source leaves the loss unchanged") {
    LMWeights w = init_lm(tiny_lm_config(), 50, 7);
    double a = lm_forward_loss(w, {5, 6, 7, 8}, {10, 11, 12, 1});
    double b = lm_forward_loss(w, {5, 6, 7, 8, 0, 0, 0}, {10, 11, 12, 1});
    CHECK(std::fabs(a - b) < 1e-6);
}

TEST_CASE("stepwise log-probabilities factorize the sequence score") {
    LMWeights w = init_lm(tiny_lm_config(), 50, 7);
    std::vector<long> src = {5, 6, 7};
    GenerationConfig gc;
    gc.max_new_tokens = 6;
    GenerationResult r = generate(w, src, gc);
    REQUIRE(!r.ids.empty());
    REQUIRE((long)r.ids.size() <= 6);
    double s = 0;
    for (double v : r.step_logprobs) s += v;
    CHECK(std::fabs(s - r.sequence_logprob) < 1e-12);
    // teacher-forcing the generated tokens reproduces the same total
    double forced = lm_forward_loss(w, src, r.ids);
    CHECK(std::fabs(forced - (-r.sequence_logprob / (double)r.ids.size())) < 1e-9);
}

TEST_CASE("beam width one equals greedy decoding exactly") {
    LMWeights w = init_lm(tiny_lm_config(), 50, 7);
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::vector<long> src = {(long)(5 + s % 17), (long)(6 + s % 11), (long)(7 + s % 5)};
        GenerationConfig gg;
        gg.max_new_tokens = 8;
        GenerationConfig bb = gg;
        bb.mode = DecodeMode::Beam;
        bb.beam_width = 1;
        GenerationResult a = generate(w, src, gg), b = generate(w, src, bb);
        REQUIRE(a.ids == b.ids);
        for (std::size_t i = 0; i < a.step_logprobs.size(); ++i) REQUIRE(a.step_logprobs[i] == b.step_logprobs[i]);
    }
    GenerationConfig bad;
    bad.mode = DecodeMode::Beam;
    bad.beam_width = 0;
    CHECK_THROWS_AS(generate(w, {5}, bad), ConfigError);
}

TEST_CASE("sampling is reproducible per seed") {
    LMWeights w = init_lm(tiny_lm_config(), 50, 7);
    GenerationConfig sc;
    sc.mode = DecodeMode::Sample;
    sc.temperature = 1.3;
    sc.seed = 9;
    sc.max_new_tokens = 10;
    GenerationResult a = generate(w, {5, 6}, sc), b = generate(w, {5, 6}, sc);
    CHECK(a.ids == b.ids);
}

TEST_CASE("out-of-vocab ids are rejected on both sides") {
    LMWeights w = init_lm(tiny_lm_config(), 50, 7);
    CHECK_THROWS_AS(lm_forward_loss(w, {5, 99}, {10, 1}), RangeError);
    CHECK_THROWS_AS(lm_forward_loss(w, {5}, {50, 1}), RangeError);
}

TEST_CASE("a tiny model memorizes four pairs and retraining is bit-identical") {
    std::vector<SeqPair> pairs = {
        {{5, 6}, {10, 11, 1}},
        {{7, 8}, {12, 13, 1}},
        {{9, 14}, {15, 16, 1}},
        {{17, 18}, {19, 20, 1}},
    };
    StageConfig tc;
    tc.steps = 300;
    tc.batch_size = 4;
    tc.lr = 3e-3;
    tc.dropout = 0.0;
    tc.seed = 3;
    LMWeights w = init_lm(tiny_lm_config(), 50, 11);
    TrainLog log = train_pairs(w, pairs, tc);
    CHECK(log.final_loss < 0.05);
    int exact = 0;
    for (const SeqPair& p : pairs) {
        GenerationConfig gc;
        gc.max_new_tokens = 8;
        if (generate(w, p.source, gc).ids == p.target) ++exact;
    }
    CHECK(exact == 4);

    LMWeights w2 = init_lm(tiny_lm_config(), 50, 11);
    TrainLog log2 = train_pairs(w2, pairs, tc);
    CHECK(log2.final_loss == log.final_loss);
}

TEST_CASE("pretraining mixes components and rejects an empty positive-weight component") {
    UnifiedVocab v = build_unified_vocab({"walk run jump", "wave hop"}, 8);
    PretrainData d;
    d.text_streams = {{10, 11, 12, 13, 14, 15}, {11, 13, 15, 10, 12, 16}};
    long mb = v.motion_base();
    d.motion_streams = {{mb, mb + 1, mb + 2, mb + 3, mb + 4, mb + 5, mb + 6, mb + 7}};
    d.t2m_pairs = {{{10, 11}, {mb, mb + 1, 1}}};
    d.m2t_pairs = {{{mb, mb + 1}, {10, 11, 1}}};
    StageConfig tc;
    tc.steps = 12;
    tc.batch_size = 4;
    tc.lr = 1e-3;
    tc.dropout = 0.1;
    tc.seed = 5;
    LMWeights w = init_lm(tiny_lm_config(), v.size() > 50 ? v.size() : 50, 13);
    TrainLog log = train_pretrain(w, d, PretrainMixture{}, tc, v);
    CHECK(log.entries.size() >= 2);
    CHECK(std::isfinite(log.final_loss));

    PretrainData empty = d;
    empty.m2t_pairs.clear();
    CHECK_THROWS_AS(train_pretrain(w, empty, PretrainMixture{}, tc, v), ConfigError);
}
