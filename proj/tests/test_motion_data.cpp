#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/dataset.hpp"
#include "molang/motion_io.hpp"
#include "molang/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

using namespace molang;

namespace {

std::filesystem::path scratch_dir() {
    auto p = std::filesystem::temp_directory_path() / "molang_test_motion";
    std::filesystem::create_directories(p);
    return p;
}

std::vector<CaptionedMotion> small_corpus() {
    SyntheticSpec spec;
    spec.count_per_family = 4;
    spec.seed = 42;
    return generate_corpus(spec);
}

}  // namespace

TEST_CASE("synthetic corpus is deterministic per seed") {
    auto corpus = small_corpus();
    auto corpus2 = small_corpus();
    REQUIRE(corpus.size() == corpus2.size());
    REQUIRE(corpus.size() == all_families().size() * 4);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(corpus[i].id == corpus2[i].id);
        CHECK(corpus[i].motion.positions.storage() == corpus2[i].motion.positions.storage());
        CHECK(corpus[i].captions == corpus2[i].captions);
    }
}

TEST_CASE("feature codec roundtrips positions and keeps the fixed layout") {
    auto corpus = small_corpus();
    double worst = 0.0;
    for (const auto& cm : corpus) {
        auto f = features_from_positions(cm.motion);
        CHECK(f.width() == 76);
        CHECK(cm.motion.frame_count() % 4 == 0);
        auto back = positions_from_features(cm.motion.skeleton, f);
        for (long i = 0; i < cm.motion.positions.size(); ++i)
            worst = std::max(worst, std::fabs(cm.motion.positions[i] - back.positions[i]));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("every caption mentions its motion family") {
    for (const auto& cm : small_corpus()) {
        std::string fam = cm.id.substr(0, cm.id.find('_'));
        for (const auto& c : cm.captions) {
            CAPTURE(cm.id);
            CAPTURE(c);
            CHECK(c.find(fam) != std::string::npos);
        }
    }
}

TEST_CASE("motion files roundtrip at f32 with the documented size") {
    auto dir = scratch_dir();
    SyntheticSpec spec;
    spec.count_per_family = 1;
    spec.frame_min = 64;
    spec.frame_max = 64;
    spec.seed = 42;
    auto c64 = generate_corpus(spec);
    auto path = (dir / "a.mgm").string();
    save_motion(path, c64[0].motion);
    // header 20 bytes + 64*13*3 f32 payload
    CHECK(std::filesystem::file_size(path) == 10004);
    auto loaded = load_motion(path, humanoid13());
    for (long i = 0; i < loaded.positions.size(); ++i)
        CHECK((float)c64[0].motion.positions[i] == (float)loaded.positions[i]);
}

TEST_CASE("motion loader rejects a bad magic with offset zero") {
    auto dir = scratch_dir();
    auto path = (dir / "bad.mgm").string();
    {
        std::ofstream bad(path, std::ios::binary);
        bad << "XXXX1234";
    }
    try {
        load_motion(path, humanoid13());
        FAIL("no throw");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 0);
    }
}

TEST_CASE("corpus index save and load preserves every sample") {
    auto dir = scratch_dir();
    auto corpus = small_corpus();
    auto idx = save_corpus((dir / "corpus").string(), corpus);
    auto reloaded = load_corpus(idx, humanoid13());
    REQUIRE(reloaded.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(reloaded[i].id == corpus[i].id);
        CHECK(reloaded[i].captions == corpus[i].captions);
        CHECK(reloaded[i].motion.frame_count() == corpus[i].motion.frame_count());
    }
}

TEST_CASE("dataset split matches the requested fractions and is disjoint") {
    auto corpus = small_corpus();
    std::vector<CaptionedMotion> hundred;
    for (int i = 0; i < 100; ++i) {
        CaptionedMotion c = corpus[i % corpus.size()];
        c.id = "s" + std::to_string(i);
        hundred.push_back(c);
    }
    auto split = split_dataset(hundred, {0.8, 0.1, 0.1}, 3);
    CHECK(split.train.size() == 80);
    CHECK(split.val.size() == 10);
    CHECK(split.test.size() == 10);
    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.val, &split.test})
        for (const auto& s : *part) CHECK(seen.insert(s.id).second);
    CHECK(seen.size() == 100);
    // same seed, same assignment
    auto again = split_dataset(hundred, {0.8, 0.1, 0.1}, 3);
    for (std::size_t i = 0; i < split.test.size(); ++i) CHECK(split.test[i].id == again.test[i].id);
}
