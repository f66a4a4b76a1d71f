#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/checkpoint.hpp"
#include "molang/config.hpp"
#include "molang/error.hpp"
#include "molang/lm.hpp"
#include "molang/vocab.hpp"
#include "molang/vq.hpp"

#include <filesystem>
#include <fstream>
#include <string>

using namespace molang;

namespace {

std::filesystem::path scratch_dir() {
    auto p = std::filesystem::temp_directory_path() / "molang_test_ckpt";
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f.write(s.data(), (std::streamsize)s.size());
}

}  // namespace

TEST_CASE("tokenizer checkpoints roundtrip byte-for-byte through f32 payloads") {
    auto dir = scratch_dir();
    TokenizerConfig cfg = desk_tokenizer_config();
    cfg.K = 32;
    Tokenizer tok = init_tokenizer(cfg, 76, 5);
    tok.codebook_ready = true;
    for (long k = 0; k < cfg.K; ++k) tok.codebook.usage[k] = k * 3;
    save_tokenizer_checkpoint((dir / "tok.mgck").string(), tok, "{\"seed\": 5}");
    Tokenizer back = load_tokenizer_checkpoint((dir / "tok.mgck").string());
    CHECK(back.config.K == cfg.K);
    CHECK(back.config.d == cfg.d);
    CHECK(back.config.hidden == cfg.hidden);
    CHECK(back.feature_dim == 76);
    CHECK(back.codebook_ready);
    CHECK(back.codebook.usage == tok.codebook.usage);
    // the payload is f32; equality holds at the file level after a re-save
    save_tokenizer_checkpoint((dir / "tok2.mgck").string(), back, "{\"seed\": 5}");
    CHECK(slurp(dir / "tok.mgck") == slurp(dir / "tok2.mgck"));
}

TEST_CASE("lm checkpoints roundtrip and reject a vocabulary with a different hash") {
    auto dir = scratch_dir();
    UnifiedVocab vocab = build_unified_vocab({"a person walks", "someone waves"}, 8);
    LMConfig lc = desk_lm_config();
    LMWeights w = init_lm(lc, vocab.size(), 3);
    save_lm_checkpoint((dir / "lm.mgck").string(), w, vocab);
    LMWeights wb = load_lm_checkpoint((dir / "lm.mgck").string(), vocab);
    CHECK(wb.vocab_size == vocab.size());
    save_lm_checkpoint((dir / "lm2.mgck").string(), wb, vocab);
    CHECK(slurp(dir / "lm.mgck") == slurp(dir / "lm2.mgck"));

    UnifiedVocab other = build_unified_vocab({"a person walks", "someone waves", "extra words here"}, 8);
    CHECK_THROWS_AS(load_lm_checkpoint((dir / "lm.mgck").string(), other), CompatibilityError);
}

TEST_CASE("corrupt checkpoint files throw format errors instead of crashing") {
    auto dir = scratch_dir();
    TokenizerConfig cfg = desk_tokenizer_config();
    cfg.K = 32;
    Tokenizer tok = init_tokenizer(cfg, 76, 5);
    tok.codebook_ready = true;
    save_tokenizer_checkpoint((dir / "good.mgck").string(), tok, "{\"seed\": 5}");
    std::string good = slurp(dir / "good.mgck");

    spit(dir / "badmagic.mgck", "XXXX" + good.substr(4));
    bool threw = false;
    try {
        load_checkpoint((dir / "badmagic.mgck").string());
    } catch (const FormatError& e) {
        threw = (e.offset() == 0);
    }
    CHECK(threw);

    spit(dir / "trunc.mgck", good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(load_checkpoint((dir / "trunc.mgck").string()), FormatError);

    // a tensor offset pointing into another tensor's bytes must be rejected
    std::string hacked = good;
    auto pos = hacked.find("\"offset\":0");
    REQUIRE(pos != std::string::npos);
    hacked.replace(pos, 10, "\"offset\":9");
    spit(dir / "hack.mgck", hacked);
    CHECK_THROWS_AS(load_checkpoint((dir / "hack.mgck").string()), FormatError);

    // single-byte flips across the header region: throw or load, never crash
    long rejected = 0, accepted = 0;
    for (int t = 0; t < 200; ++t) {
        std::string fz = good;
        std::size_t at = 4 + (std::size_t)(t * 131) % (fz.size() / 2);
        fz[at] = (char)(fz[at] ^ (1 + t % 255));
        spit(dir / "fuzz.mgck", fz);
        try {
            (void)load_checkpoint((dir / "fuzz.mgck").string());
            ++accepted;  // benign flip inside the meta string
        } catch (const Error&) {
            ++rejected;
        }
    }
    CHECK(rejected + accepted == 200);
    CHECK(rejected > 0);
}

TEST_CASE("run config serialization is a fixed point and overrides keep desk defaults") {
    RunConfig d = desk_run_config();
    d.validate();
    std::string js = run_config_to_json(d);
    RunConfig back = run_config_from_json(js);
    CHECK(run_config_to_json(back) == js);

    RunConfig o = run_config_from_json("{\"seed\": 9, \"lm\": {\"d_model\": 64, \"n_heads\": 2}}");
    CHECK(o.seed == 9);
    CHECK(o.lm.d_model == 64);
    CHECK(o.lm.n_heads == 2);
    CHECK(o.lm.n_layers == desk_lm_config().n_layers);
    // the top-level seed propagates into every stage
    CHECK(o.pretrain.seed == 9);
    CHECK(o.generation.seed == 9);
    CHECK(o.data.seed == 9);
}

TEST_CASE("unknown config keys are reported with their dotted path") {
    bool threw = false;
    try {
        run_config_from_json("{\"training\": {\"pretrain\": {\"stepz\": 10}}}");
    } catch (const ConfigError& e) {
        threw = std::string(e.what()).find("training.pretrain.stepz") != std::string::npos;
    }
    CHECK(threw);

    CHECK_THROWS_AS(run_config_from_json("{\"data\": {\"split\": [0.5, 0.5, 0.5]}}"), ConfigError);
}

TEST_CASE("the large-scale preset carries the published stage sizes") {
    RunConfig p = paper_scale_config();
    CHECK(p.tokenizer_train.steps == 150000);
    CHECK(p.tokenizer_train.batch_size == 256);
    CHECK(p.pretrain.steps == 300000);
    CHECK(p.pretrain.lr == 2e-4);
    CHECK(p.instruct.steps == 300000);
    CHECK(p.instruct.lr == 1e-4);
    p.validate();
}

TEST_CASE("an lm preset key applies before explicit field overrides") {
    RunConfig q = run_config_from_json("{\"lm\": {\"preset\": \"small\", \"n_layers\": 3}}");
    CHECK(q.lm.d_model == 512);
    CHECK(q.lm.n_layers == 3);
}
