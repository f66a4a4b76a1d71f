#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/rng.hpp"
#include "molang/span_corrupt.hpp"
#include "molang/vocab.hpp"

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

using namespace molang;

namespace {

UnifiedVocab test_vocab() {
    std::vector<std::string> corpus = {"A person walks forward.", "someone waves the left hand",
                                       "the man runs quickly", "a person walks slowly."};
    return build_unified_vocab(corpus, 16);
}

}  // namespace

TEST_CASE("unified vocab layout places text, motion words and specials in one id space") {
    auto v = test_vocab();
    CHECK(v.size() == UnifiedVocab::kSpecialCount + v.text_piece_count() + 16);
    CHECK(v.motion_base() == UnifiedVocab::kSpecialCount + v.text_piece_count());
    CHECK(v.motion_word(5) - v.motion_word(0) == 5);
}

TEST_CASE("text encoding lowercases, isolates punctuation and roundtrips") {
    auto v = test_vocab();
    auto seq = v.encode_text("A person walks.");
    CHECK(v.decode_text(seq.ids) == "a person walks .");
    auto unk = v.encode_text("xylophone");
    CHECK(unk.ids[0] == UnifiedVocab::kUnk);
}

TEST_CASE("motion segments wrap with boundary tokens and unwrap to the same ids") {
    auto v = test_vocab();
    auto w = wrap_motion({5, 9}, v);
    REQUIRE(w.ids.size() == 4);
    CHECK(v.token(w.ids[0]) == "</som>");
    CHECK(v.token(w.ids[1]) == "<motion_id_5>");
    CHECK(v.token(w.ids[2]) == "<motion_id_9>");
    CHECK(v.token(w.ids[3]) == "</eom>");
    CHECK(unwrap_motion(w, v) == std::vector<long>({5, 9}));
}

TEST_CASE("prompt rendering fills placeholders and flags the missing ones") {
    auto v = test_vocab();
    PromptBindings b;
    b.caption = "a person walks forward";
    auto p = render_prompt("Give me a motion that corresponds to [caption].", b, v);
    CHECK(v.decode_text(p.ids).find("a person walks forward") != std::string::npos);

    PromptBindings b2;
    b2.motion_ids = std::vector<long>{1, 2, 3};
    auto p2 = render_prompt("Provide an accurate caption describing the motion of <motion_tokens>", b2, v);
    auto segs = decode_mixed(p2.ids, v);
    REQUIRE(segs.size() == 2);
    CHECK(segs[1].kind == Segment::Kind::Motion);
    CHECK(segs[1].motion_ids == std::vector<long>({1, 2, 3}));

    try {
        render_prompt("motion lasting [frames] frames", PromptBindings{}, v);
        FAIL("no throw");
    } catch (const TemplateError& e) {
        CHECK(e.placeholder() == "frames");
    }
}

TEST_CASE("mixed decoding repairs an unclosed motion segment") {
    auto v = test_vocab();
    std::vector<long> unclosed = {UnifiedVocab::kSom, v.motion_word(1)};
    auto rseg = decode_mixed(unclosed, v);
    REQUIRE(rseg.size() == 1);
    CHECK(rseg[0].motion_ids == std::vector<long>({1}));
}

TEST_CASE("vocab files reload with the same hash and layout") {
    auto v = test_vocab();
    auto path = (std::filesystem::temp_directory_path() / "molang_test_vocab.txt").string();
    save_vocab(path, v);
    auto v2 = load_vocab(path);
    CHECK(vocab_hash(v2) == vocab_hash(v));
    CHECK(v2.size() == v.size());
    CHECK(v2.motion_base() == v.motion_base());
}

TEST_CASE("span corruption conserves tokens and removes the rounded fraction") {
    auto v = test_vocab();
    Rng mk(99);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<long> ids;
        long n = 1 + (long)mk.next_below(100);
        for (long i = 0; i < n; ++i)
            ids.push_back(UnifiedVocab::kSpecialCount + (long)mk.next_below((std::uint64_t)v.text_piece_count()));
        auto r = span_corrupt(ids, 0.15, 3.0, 1000 + trial, v);

        std::multiset<long> orig(ids.begin(), ids.end()), recon;
        long removed = 0;
        for (long id : r.source)
            if (!v.is_sentinel(id)) recon.insert(id);
        for (long id : r.target)
            if (!v.is_sentinel(id)) {
                recon.insert(id);
                ++removed;
            }
        REQUIRE(orig == recon);
        REQUIRE(removed == std::llround(0.15 * (double)n));

        // sentinels appear in order, never adjacent, and close the target
        long next_sent = 0, last_sent_pos = -5, pos = 0;
        for (long id : r.source) {
            if (v.is_sentinel(id)) {
                REQUIRE(id - UnifiedVocab::kSentinelBase == next_sent);
                REQUIRE(pos != last_sent_pos + 1);
                last_sent_pos = pos;
                ++next_sent;
            }
            ++pos;
        }
        REQUIRE(v.is_sentinel(r.target.back()));
    }
}

TEST_CASE("span corruption at ratio zero passes the sequence through") {
    auto v = test_vocab();
    auto r0 = span_corrupt({200, 201}, 0.0, 3.0, 1, v);
    CHECK(r0.source == std::vector<long>({200, 201}));
    CHECK(r0.target == std::vector<long>({v.extra_id(0)}));
}
