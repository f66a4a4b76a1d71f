#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/vq.hpp"
#include "molang/vq_train.hpp"

#include "molang/motion.hpp"
#include "molang/skeleton.hpp"
#include "molang/synthetic.hpp"

#include <cmath>
#include <cstring>

using namespace molang;

namespace {

bool tensors_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

Codebook random_codebook(long K, long d, Rng& rng) {
    Codebook cb;
    cb.entries = Tensor::randn({K, d}, rng);
    cb.ema_cluster_size = Tensor::full({K}, 1.0);
    cb.ema_embed_sum = cb.entries;
    cb.usage.assign((std::size_t)K, 0);
    return cb;
}

}  // namespace

TEST_CASE("quantize matches an exhaustive nearest-neighbor oracle") {
    Rng rng(7);
    long L = 200, K = 64, d = 16;
    Tensor lat = Tensor::randn({L, d}, rng);
    Codebook cb = random_codebook(K, d, rng);
    QuantizeResult qr = quantize(lat, cb);
    for (long i = 0; i < L; ++i) {
        long best = -1;
        double bd = 0;
        for (long k = 0; k < K; ++k) {
            double dist = 0;
            for (long j = 0; j < d; ++j) {
                double t = lat.at(i, j) - cb.entries.at(k, j);
                dist += t * t;
            }
            if (best < 0 || dist < bd) {
                bd = dist;
                best = k;
            }
        }
        REQUIRE(qr.ids[(std::size_t)i] == best);
        for (long j = 0; j < d; ++j) REQUIRE(qr.quantized.at(i, j) == cb.entries.at(best, j));
    }
}

TEST_CASE("quantize breaks exact ties toward the lowest index") {
    Codebook tie;
    tie.entries = Tensor::zeros({4, 2});
    tie.entries.at(0, 0) = 1;
    tie.entries.at(1, 0) = 1;  // duplicate of 0
    tie.entries.at(2, 0) = 5;
    tie.entries.at(2, 1) = 5;
    tie.entries.at(3, 0) = 1;  // duplicate of 0
    tie.ema_cluster_size = Tensor::full({4}, 1.0);
    tie.ema_embed_sum = tie.entries;
    tie.usage.assign(4, 0);
    Tensor z({1, 2}, {1.0, 0.0});
    CHECK(quantize(z, tie).ids[0] == 0);
}

TEST_CASE("EMA update reproduces the hand-computed example") {
    Codebook cb;
    cb.entries = Tensor::zeros({2, 1});
    cb.ema_cluster_size = Tensor::full({2}, 1.0);
    cb.ema_embed_sum = Tensor::zeros({2, 1});
    cb.usage.assign(2, 0);
    Tensor lat({3, 1}, {2.0, 4.0, 6.0});
    std::vector<std::vector<long>> ids = {{0, 0, 0}};
    ema_update(cb, {lat}, ids, 0.99);
    // N_0 = 0.99*1 + 0.01*3 = 1.02; S_0 = 0.99*0 + 0.01*12 = 0.12
    CHECK(std::fabs(cb.ema_cluster_size[0] - 1.02) < 1e-12);
    CHECK(std::fabs(cb.ema_embed_sum.at(0, 0) - 0.12) < 1e-12);
    CHECK(std::fabs(cb.entries.at(0, 0) - 0.12 / 1.02) < 1e-12);
    // untouched code decays toward zero mass
    CHECK(std::fabs(cb.ema_cluster_size[1] - 0.99) < 1e-12);
    CHECK(cb.usage[0] == 3);
    CHECK(cb.usage[1] == 0);
}

TEST_CASE("EMA cluster mass is conserved across an update") {
    Rng rng(11);
    long K = 8, d = 4;
    Codebook cb = random_codebook(K, d, rng);
    std::vector<Tensor> lats;
    std::vector<std::vector<long>> ids;
    for (int b = 0; b < 5; ++b) {
        Tensor lat = Tensor::randn({6, d}, rng);
        ids.push_back(quantize(lat, cb).ids);
        lats.push_back(lat);
    }
    double before = 0, after = 0;
    for (long k = 0; k < K; ++k) before += cb.ema_cluster_size[k];
    ema_update(cb, lats, ids, 0.99);
    for (long k = 0; k < K; ++k) after += cb.ema_cluster_size[k];
    CHECK(std::fabs(after - (0.99 * before + 0.01 * 30.0)) < 1e-9);
    long used = 0;
    for (long c : cb.usage) used += c;
    CHECK(used == 30);
}

TEST_CASE("tokenizer loss decomposes and the STE keeps the encoder trainable") {
    TokenizerConfig cfg = desk_tokenizer_config();
    cfg.K = 16;
    cfg.d = 8;
    cfg.hidden = 12;
    Tokenizer tok = init_tokenizer(cfg, 10, 3);
    Rng rng(5);
    tok.codebook.entries = Tensor::randn({cfg.K, cfg.d}, rng);
    tok.codebook.ema_embed_sum = tok.codebook.entries;
    tok.codebook_ready = true;

    Graph g;
    BoundParams p = bind_params(g, tok, true);
    Tensor window = Tensor::randn({16, 10}, rng);
    Var x = g.constant(window);
    Var lat = encode_pass(g, tok, p, x);
    CHECK(g.value(lat).dim(0) == 4);
    CHECK(g.value(lat).dim(1) == 8);
    QuantizeResult qr = quantize_st(g, lat, tok.codebook);
    CHECK(tensors_equal(g.value(qr.ste_out), qr.quantized));  // STE forward identity
    Var rec = decode_pass(g, tok, p, qr.ste_out);
    CHECK(g.value(rec).dim(0) == 16);
    CHECK(g.value(rec).dim(1) == 10);

    TokenizerLossVars lv = tokenizer_loss(g, tok, p, {window, window});
    CHECK(std::isfinite(lv.values.total));
    CHECK(std::fabs(lv.values.total -
                    (lv.values.recon + cfg.lambda_v * lv.values.velocity + lv.values.embed + lv.values.commit)) <
          1e-12);
    CHECK(std::fabs(lv.values.embed * cfg.beta - lv.values.commit) < 1e-12);
    g.backward(lv.train_loss);
    // gradient reaches the first encoder conv THROUGH the quantizer
    const Tensor& gw = g.grad(p.at("enc.s0.conv.w"));
    double norm = 0;
    for (long i = 0; i < gw.size(); ++i) norm += gw[i] * gw[i];
    CHECK(norm > 0);
}

TEST_CASE("encoding truncates stray frames and enforces the contracts") {
    TokenizerConfig cfg = desk_tokenizer_config();
    cfg.K = 8;
    cfg.d = 4;
    cfg.hidden = 8;
    Tokenizer tok = init_tokenizer(cfg, feature_width(13), 1);
    Rng rng(9);
    tok.codebook.entries = Tensor::randn({cfg.K, cfg.d}, rng);
    tok.codebook_ready = true;

    MotionFeatures f;
    f.fps = 20;
    f.frames = Tensor::randn({19, feature_width(13)}, rng);  // 19 -> 16 frames -> L = 4
    CHECK(encode_features(tok, f).dim(0) == 4);

    MotionFeatures s;
    s.fps = 20;
    s.frames = Tensor::randn({3, feature_width(13)}, rng);
    CHECK_THROWS_AS(encode_features(tok, s), InsufficientFramesError);
    CHECK_THROWS_AS(detokenize_motion(tok, {0, 99}, 20.0), RangeError);
    CHECK_THROWS_AS(detokenize_motion(tok, {}, 20.0), ContractError);
}

TEST_CASE("dead codes are reseeded from the reservoir") {
    Codebook cb;
    cb.entries = Tensor::zeros({3, 2});
    cb.ema_cluster_size = Tensor({3}, {0.5, 2.0, 0.1});
    cb.ema_embed_sum = Tensor::zeros({3, 2});
    cb.usage.assign(3, 0);
    std::vector<Tensor> res;
    res.push_back(Tensor({2}, {7.0, 8.0}));
    Rng rng(1);
    CHECK(reset_dead_codes(cb, res, 1.0, rng) == 2);
    CHECK(cb.entries.at(0, 0) == 7.0);
    CHECK(cb.entries.at(2, 1) == 8.0);
    CHECK(cb.ema_cluster_size[0] == 1.0);
    CHECK(cb.ema_cluster_size[2] == 1.0);
    CHECK(cb.ema_cluster_size[1] == 2.0);  // live code untouched
    CHECK(cb.entries.at(1, 0) == 0.0);
}

TEST_CASE("short training runs reduce the loss and are bit-deterministic") {
    SyntheticSpec spec;
    spec.families = {MotionFamily::Walk, MotionFamily::Wave};
    spec.count_per_family = 4;
    spec.frame_min = 48;
    spec.frame_max = 64;
    spec.seed = 42;
    auto corpus = generate_corpus(spec);
    std::vector<MotionFeatures> feats;
    for (const auto& cm : corpus) feats.push_back(features_from_positions(cm.motion));

    TokenizerConfig cfg = desk_tokenizer_config();
    cfg.K = 32;
    cfg.d = 16;
    cfg.hidden = 24;
    TokenizerTrainConfig tc;
    tc.steps = 60;
    tc.batch_size = 8;
    tc.crop_frames = 32;
    tc.lr = 3e-4;
    tc.seed = 5;
    tc.log_every = 10;
    auto r1 = train_tokenizer(feats, cfg, tc);
    auto r2 = train_tokenizer(feats, cfg, tc);
    CHECK(r1.log.back().loss.total < r1.log.front().loss.total);
    for (const auto& [name, t] : r1.tokenizer.params.items()) {
        CAPTURE(name);
        CHECK(tensors_equal(t, r2.tokenizer.params.get(name)));
    }
    CHECK(tensors_equal(r1.tokenizer.codebook.entries, r2.tokenizer.codebook.entries));
    CHECK(r1.codes_reset == r2.codes_reset);

    // token codec roundtrip on a trained model
    auto ids = tokenize_motion(r1.tokenizer, corpus.front().motion);
    CHECK((long)ids.size() == corpus.front().motion.positions.dim(0) / cfg.l);
    MotionSequence rec = detokenize_motion(r1.tokenizer, ids, 20.0);
    CHECK(rec.positions.dim(0) == (long)ids.size() * cfg.l);
    CHECK(rec.positions.all_finite());
}
