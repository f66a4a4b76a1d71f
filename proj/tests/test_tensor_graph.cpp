#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/error.hpp"
#include "molang/graph.hpp"

#include <cmath>

using namespace molang;

namespace {

// Shared composite: conv -> relu -> transpose -> layer_norm -> matmul -> CE.
Var conv_norm_ce(Graph& g, const std::vector<Var>& p) {
    Var y = g.conv1d(p[0], p[1], p[2], 2, 1);  // [4,4]
    y = g.relu(y);
    y = g.transpose(y);  // rows become time
    y = g.layer_norm(y, p[3], p[4]);
    Var logits = g.matmul(y, p[5]);  // [4,5]
    return g.scale(g.cross_entropy_sum(logits, {1, 4, -1, 2}), 1.0 / 3.0);
}

std::vector<Tensor> conv_norm_ce_params(Rng& r) {
    return {Tensor::randn({3, 8}, r, 0.7), Tensor::randn({4, 3, 3}, r, 0.4), Tensor::randn({4}, r, 0.2),
            Tensor::randn({4}, r, 0.3),    Tensor::randn({4}, r, 0.3),       Tensor::randn({4, 5}, r, 0.5)};
}

}  // namespace

TEST_CASE("tensor indexing is row-major and shape-checked") {
    Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
    CHECK(t.at(0, 2) == 2.0);
    CHECK(t.at(1, 0) == 3.0);
    CHECK(t.size() == 6);
    CHECK(t.dim(0) == 2);
    CHECK(t.same_shape(Tensor::zeros({2, 3})));
    CHECK_FALSE(t.same_shape(Tensor::zeros({3, 2})));
    CHECK(t.all_finite());
    t[4] = std::nan("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("randn streams are reproducible per seed") {
    Rng a(7), b(7), c(8);
    Tensor ta = Tensor::randn({4, 4}, a);
    Tensor tb = Tensor::randn({4, 4}, b);
    Tensor tc = Tensor::randn({4, 4}, c);
    bool same = true, differs = false;
    for (long i = 0; i < ta.size(); ++i) {
        same = same && ta[i] == tb[i];
        differs = differs || ta[i] != tc[i];
    }
    CHECK(same);
    CHECK(differs);
}

TEST_CASE("composite conv, layer norm and cross-entropy graph passes central-difference gradcheck") {
    Rng r(7);
    std::vector<Tensor> params = conv_norm_ce_params(r);
    double e = grad_check(conv_norm_ce, params);
    CHECK(e < 5e-5);
}

TEST_CASE("attention block with embedding, sdpa, gelu and slicing passes gradcheck") {
    Rng r(17);
    Tensor tab = Tensor::randn({6, 4}, r, 0.6);
    Tensor wq = Tensor::randn({4, 4}, r, 0.5);
    Tensor wk = Tensor::randn({4, 4}, r, 0.5);
    Tensor wv = Tensor::randn({4, 4}, r, 0.5);
    Tensor bias = Tensor::randn({3, 3}, r, 0.3);
    double e = grad_check(
        [](Graph& g, const std::vector<Var>& p) {
            Var h = g.embedding(p[0], {2, 0, 5});  // [3,4]
            Var q = g.matmul(h, p[1]);
            Var k = g.matmul(h, p[2]);
            Var v = g.matmul(h, p[3]);
            Var att = sdpa(g, q, k, v, p[4]);  // [3,4]
            Var left = g.slice_cols(att, 0, 2);
            Var right = g.gelu(g.slice_cols(att, 2, 2));
            Var cat = g.concat_cols({left, right});
            Var d = g.sub(cat, g.mul(h, h));
            return g.mean(g.smooth_l1(d));
        },
        {tab, wq, wk, wv, bias});
    CHECK(e < 5e-5);
}

TEST_CASE("reshape, softmax and seeded dropout pass gradcheck") {
    Rng r(23);
    Tensor x = Tensor::randn({3, 4}, r, 0.8);
    Tensor colw = Tensor::randn({6}, r, 0.5);
    Tensor shift({1}, {0.3});
    double e = grad_check(
        [](Graph& g, const std::vector<Var>& p) {
            Var y = g.reshape(p[0], {2, 6});
            y = g.softmax(y);
            Rng drop(13);  // fresh per build: identical mask on every evaluation
            y = g.dropout(y, 0.25, drop);
            y = g.mul(y, p[1]);
            y = g.add(y, p[2]);
            return g.mean(g.square(y));
        },
        {x, colw, shift});
    CHECK(e < 5e-5);
}

TEST_CASE("gradcheck error stays small across finite-difference step sizes") {
    Rng r(7);
    std::vector<Tensor> params = conv_norm_ce_params(r);
    for (double eps : {2e-4, 1e-4, 5e-5}) {
        double e = grad_check(conv_norm_ce, params, eps, 48);
        CAPTURE(eps);
        CHECK(e < 1e-4);
    }
}

TEST_CASE("straight-through estimator copies gradients to the latent exactly") {
    Rng r2(11);
    // fully differentiable control: same wiring minus the quantizer
    Tensor x = Tensor::randn({2, 4}, r2, 0.8);
    Tensor rowb = Tensor::randn({8}, r2, 0.4);
    double e = grad_check(
        [](Graph& g, const std::vector<Var>& p) {
            Var u = g.upsample_nn(p[0], 2);
            Var a = g.add(u, p[1]);
            Var sr = g.slice_rows(a, 1, 1);
            return g.sum(g.square(g.scale(sr, 0.5)));
        },
        {x, rowb});
    CHECK(e < 5e-5);

    // loss = sum(ste(u,q)^2) forces dL/du == 2q, bit-for-bit
    Graph g;
    Var u = g.param(Tensor::randn({2, 4}, r2, 1.0));
    Tensor q = g.value(u);
    for (long i = 0; i < q.size(); ++i) q[i] = q[i] > 0 ? 1.0 : -1.0;
    Var s = g.ste(u, q);
    g.backward(g.sum(g.square(s)));
    const Tensor& gu = g.grad(u);
    for (long i = 0; i < q.size(); ++i) CHECK(gu[i] == 2.0 * q[i]);
}

TEST_CASE("backward rejects non-scalar losses and softmax rows sum to one") {
    Graph g;
    Var x = g.param(Tensor({2, 2}, {1, 2, 3, 4}));
    CHECK_THROWS_AS(g.backward(x), ContractError);
    Var sm = g.softmax(x);
    const Tensor& v = g.value(sm);
    CHECK(std::fabs(v.at(0, 0) + v.at(0, 1) - 1.0) < 1e-12);
    CHECK(std::fabs(v.at(1, 0) + v.at(1, 1) - 1.0) < 1e-12);
}
