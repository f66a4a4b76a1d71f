#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "molang/metrics.hpp"

#include "molang/error.hpp"
#include "molang/rng.hpp"
#include "molang/skeleton.hpp"
#include "molang/synthetic.hpp"
#include "molang/vocab.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

using namespace molang;

namespace {

// Independent Procrustes oracle: Umeyama 1991 via an explicit 3x3 SVD built
// on Jacobi eigenrotation. Deliberately a different algorithm from the
// quaternion path used by the library.

void jacobi3(double a[3][3], double v[3][3]) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v[i][j] = (i == j) ? 1.0 : 0.0;
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-28) break;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                double th = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                double t = (th >= 0 ? 1.0 : -1.0) / (std::abs(th) + std::sqrt(th * th + 1));
                double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (int k = 0; k < 3; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 3; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
    }
}

double det3(const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// mean distance after the optimal similarity alignment of x onto y
double umeyama_mean_distance(const std::vector<double>& x, const std::vector<double>& y, int n) {
    double xc[3] = {0, 0, 0}, yc[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) {
            xc[a] += x[3 * i + a] / n;
            yc[a] += y[3 * i + a] / n;
        }
    double cov[3][3] = {}, sx2 = 0;  // cov = (1/n) sum (y-yc)(x-xc)^T
    for (int i = 0; i < n; ++i) {
        double dx[3], dy[3];
        for (int a = 0; a < 3; ++a) {
            dx[a] = x[3 * i + a] - xc[a];
            dy[a] = y[3 * i + a] - yc[a];
            sx2 += dx[a] * dx[a] / n;
        }
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) cov[a][b] += dy[a] * dx[b] / n;
    }
    double ctc[3][3] = {};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int k = 0; k < 3; ++k) ctc[a][b] += cov[k][a] * cov[k][b];
    double vmat[3][3];
    jacobi3(ctc, vmat);
    double ev[3] = {ctc[0][0], ctc[1][1], ctc[2][2]};
    int ord[3] = {0, 1, 2};
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (ev[ord[j]] > ev[ord[i]]) std::swap(ord[i], ord[j]);
    double V[3][3], sig[3];
    for (int c = 0; c < 3; ++c) {
        sig[c] = std::sqrt(std::max(ev[ord[c]], 0.0));
        for (int r = 0; r < 3; ++r) V[r][c] = vmat[r][ord[c]];
    }
    double U[3][3] = {};
    for (int c = 0; c < 3; ++c) {
        if (sig[c] > 1e-12) {
            for (int r = 0; r < 3; ++r) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += cov[r][k] * V[k][c];
                U[r][c] = s / sig[c];
            }
        } else {
            int a = (c + 1) % 3, b = (c + 2) % 3;
            U[0][c] = U[1][a] * U[2][b] - U[2][a] * U[1][b];
            U[1][c] = U[2][a] * U[0][b] - U[0][a] * U[2][b];
            U[2][c] = U[0][a] * U[1][b] - U[1][a] * U[0][b];
        }
    }
    double d_sign = det3(U) * det3(V) < 0 ? -1.0 : 1.0;
    double R[3][3], trDS = sig[0] + sig[1] + d_sign * sig[2];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += U[r][k] * (k == 2 ? d_sign : 1.0) * V[c][k];
            R[r][c] = s;
        }
    double scale = trDS / sx2;

    double total = 0;
    for (int i = 0; i < n; ++i) {
        double dx[3], rx[3], d2 = 0;
        for (int a = 0; a < 3; ++a) dx[a] = x[3 * i + a] - xc[a];
        for (int a = 0; a < 3; ++a) rx[a] = R[a][0] * dx[0] + R[a][1] * dx[1] + R[a][2] * dx[2];
        for (int a = 0; a < 3; ++a) {
            double d = scale * rx[a] - (y[3 * i + a] - yc[a]);
            d2 += d * d;
        }
        total += std::sqrt(d2);
    }
    return total / n;
}

MotionSequence random_motion(const Skeleton& sk, long m, Rng& rng, double amp = 1.0) {
    MotionSequence ms;
    ms.skeleton = sk;
    ms.fps = 20.0;
    ms.positions = Tensor::zeros({m, (long)sk.joint_count(), 3});
    for (long i = 0; i < ms.positions.size(); ++i) ms.positions[i] = amp * rng.next_normal();
    return ms;
}

}  // namespace

TEST_CASE("displacement errors match the brute-force stacked-L2 definition") {
    Skeleton sk = humanoid13();
    Rng rng(11);

    MotionSequence gt;
    gt.skeleton = sk;
    gt.positions = Tensor::zeros({4, 13, 3});
    DisplacementErrors z = displacement_errors(gt, gt);
    CHECK(z.ade == 0);
    CHECK(z.fde == 0);

    // every joint offset by (3,4)/sqrt(13) makes the stacked distance exactly 5
    MotionSequence g1 = gt, p1 = gt;
    g1.positions = Tensor::zeros({3, 13, 3});
    p1.positions = Tensor::zeros({3, 13, 3});
    for (long t = 0; t < 3; ++t)
        for (long j = 0; j < 13; ++j) {
            p1.positions.at(t, j, 0) = 3.0 / std::sqrt(13.0);
            p1.positions.at(t, j, 1) = 4.0 / std::sqrt(13.0);
        }
    DisplacementErrors d1 = displacement_errors(g1, p1);
    CHECK(std::abs(d1.ade - 5.0) < 1e-12);
    CHECK(std::abs(d1.fde - 5.0) < 1e-12);

    for (int c = 0; c < 100; ++c) {
        long m = 2 + (long)rng.next_below(6);
        MotionSequence a = random_motion(sk, m, rng), b = random_motion(sk, m, rng);
        DisplacementErrors de = displacement_errors(a, b);
        double acc = 0, last = 0;
        for (long t = 0; t < m; ++t) {
            double s = 0;
            for (long j = 0; j < 13; ++j)
                for (int k = 0; k < 3; ++k) {
                    double d = a.positions.at(t, j, k) - b.positions.at(t, j, k);
                    s += d * d;
                }
            last = std::sqrt(s);
            acc += last;
        }
        REQUIRE(std::abs(de.ade - acc / m) < 1e-9);
        REQUIRE(std::abs(de.fde - last) < 1e-9);
    }
}

TEST_CASE("displacement errors over a region equal the sliced computation") {
    Skeleton sk = humanoid13();
    Rng rng(12);
    MotionSequence a = random_motion(sk, 10, rng), b = random_motion(sk, 10, rng);
    DisplacementErrors full = displacement_errors(a, b, 6, 4);
    MotionSequence a2 = a, b2 = b;
    a2.positions = Tensor::zeros({4, 13, 3});
    b2.positions = Tensor::zeros({4, 13, 3});
    for (long t = 0; t < 4; ++t)
        for (long j = 0; j < 13; ++j)
            for (int k = 0; k < 3; ++k) {
                a2.positions.at(t, j, k) = a.positions.at(t + 6, j, k);
                b2.positions.at(t, j, k) = b.positions.at(t + 6, j, k);
            }
    DisplacementErrors sliced = displacement_errors(a2, b2);
    CHECK(std::abs(full.ade - sliced.ade) < 1e-12);
    CHECK(std::abs(full.fde - sliced.fde) < 1e-12);
    CHECK_THROWS_AS(displacement_errors(a, b, 8, 5), ShapeError);
}

TEST_CASE("procrustes alignment removes similarity transforms and matches the SVD oracle") {
    Skeleton sk = humanoid13();
    Rng rng(13);

    MotionSequence a = random_motion(sk, 6, rng);
    JointErrors je = joint_errors(a, a);
    CHECK(je.mpjpe_mm < 1e-9);
    CHECK(je.pampjpe_mm < 1e-9);

    // right-angle rotation: large raw error, zero after alignment
    MotionSequence b = a;
    for (long t = 0; t < 6; ++t)
        for (long j = 0; j < 13; ++j) {
            double x = a.positions.at(t, j, 0), y = a.positions.at(t, j, 1);
            b.positions.at(t, j, 0) = -y;
            b.positions.at(t, j, 1) = x;
        }
    JointErrors jr = joint_errors(a, b);
    CHECK(jr.mpjpe_mm > 100.0);
    CHECK(jr.pampjpe_mm < 1e-6);

    for (int c = 0; c < 20; ++c) {
        MotionSequence g = random_motion(sk, 4, rng);
        double ang = rng.next_double() * 6.28318, s = 0.5 + rng.next_double();
        double tx = rng.next_normal(), ty = rng.next_normal(), tz = rng.next_normal();
        MotionSequence p = g;
        for (long t = 0; t < 4; ++t)
            for (long j = 0; j < 13; ++j) {
                double x = g.positions.at(t, j, 0), y = g.positions.at(t, j, 1), z2 = g.positions.at(t, j, 2);
                p.positions.at(t, j, 0) = s * (std::cos(ang) * x - std::sin(ang) * y) + tx;
                p.positions.at(t, j, 1) = s * (std::sin(ang) * x + std::cos(ang) * y) + ty;
                p.positions.at(t, j, 2) = s * z2 + tz;
            }
        REQUIRE(joint_errors(g, p).pampjpe_mm < 1e-6);
    }

    double max_gap = 0;
    for (int c = 0; c < 100; ++c) {
        MotionSequence g = random_motion(sk, 3, rng), p = random_motion(sk, 3, rng);
        JointErrors e = joint_errors(g, p);
        REQUIRE(e.pampjpe_mm <= e.mpjpe_mm + 1e-9);
        double oracle = 0;
        for (long t = 0; t < 3; ++t) {
            std::vector<double> x(13 * 3), y(13 * 3);
            for (long j = 0; j < 13; ++j)
                for (int k = 0; k < 3; ++k) {
                    x[3 * j + k] = p.positions.at(t, j, k);
                    y[3 * j + k] = g.positions.at(t, j, k);
                }
            oracle += umeyama_mean_distance(x, y, 13);
        }
        oracle = 1000.0 * oracle / 3.0;
        max_gap = std::max(max_gap, std::abs(oracle - e.pampjpe_mm));
    }
    CHECK(max_gap < 1e-6);

    // degenerate prediction collapses to a point: finite, still bounded by MPJPE
    MotionSequence g = random_motion(sk, 2, rng);
    MotionSequence p = g;
    p.positions.fill(0.0);
    JointErrors e = joint_errors(g, p);
    CHECK(std::isfinite(e.mpjpe_mm));
    CHECK(std::isfinite(e.pampjpe_mm));
    CHECK(e.pampjpe_mm <= e.mpjpe_mm + 1e-9);
}

TEST_CASE("caption metrics hit the closed-form identity and zero-overlap cases") {
    std::vector<std::string> caps = {"a person walks forward", "someone waves the left hand",
                                     "the man jumps in place"};
    UnifiedVocab vocab = build_unified_vocab(caps, 8);

    std::vector<std::vector<std::string>> refs = {{caps[0]}, {caps[1]}, {caps[2]}};
    CaptionMetrics id = caption_metrics(refs, caps, vocab);
    CHECK(std::abs(id.bleu[3] - 1.0) < 1e-12);
    CHECK(std::abs(id.rouge_l - 1.0) < 1e-12);
    CHECK(std::abs(id.cider - 1.0) < 1e-12);
    CHECK(std::abs(id.exact_match - 1.0) < 1e-12);

    std::vector<std::string> bad = {"x y z q", "x y z q", "x y z q"};
    CaptionMetrics z = caption_metrics(refs, bad, vocab);
    CHECK(z.bleu[0] == 0.0);
    CHECK(z.bleu[3] == 0.0);
    CHECK(z.rouge_l == 0.0);

    // brevity penalty hand case: hyp 3 tokens vs ref 6 tokens, all matched
    std::vector<std::vector<std::string>> r1 = {{"the cat sat on the mat"}};
    std::vector<std::string> h1 = {"the cat sat"};
    CaptionMetrics hm = caption_metrics(r1, h1, vocab);
    CHECK(std::abs(hm.bleu[0] - std::exp(1.0 - 6.0 / 3.0)) < 1e-12);
    CHECK(std::abs(hm.length_avg - 3.0) < 1e-12);
}

TEST_CASE("BLEU-1 and ROUGE-L agree with independent oracles on random corpora") {
    std::vector<std::string> caps = {"a person walks forward"};
    UnifiedVocab vocab = build_unified_vocab(caps, 8);
    Rng crng(5);
    const char* words[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
    // vocab for oracle tokenization only; metric tokenizes the same way
    for (int c = 0; c < 100; ++c) {
        auto sentence = [&](int len) {
            std::string s;
            for (int i = 0; i < len; ++i) {
                if (i) s += ' ';
                s += words[crng.next_below(8)];
            }
            return s;
        };
        std::vector<std::vector<std::string>> rr;
        std::vector<std::string> hh;
        int n = 2 + (int)crng.next_below(3);
        for (int i = 0; i < n; ++i) {
            rr.push_back({sentence(3 + (int)crng.next_below(5)), sentence(3 + (int)crng.next_below(5))});
            hh.push_back(sentence(3 + (int)crng.next_below(5)));
        }
        CaptionMetrics got = caption_metrics(rr, hh, vocab);

        long matched = 0, total = 0, hyplen = 0, reflen = 0;
        double rouge = 0;
        for (int i = 0; i < n; ++i) {
            auto ht = vocab.tokenize(hh[i]);
            hyplen += (long)ht.size();
            std::map<std::string, long> hc, best;
            for (const auto& w : ht) hc[w]++;
            long bl = -1;
            for (const auto& rs : rr[i]) {
                auto rt = vocab.tokenize(rs);
                std::map<std::string, long> rc;
                for (const auto& w : rt) rc[w]++;
                for (const auto& [k, v] : rc) best[k] = std::max(best[k], v);
                long rl = (long)rt.size();
                long cl = (long)ht.size();
                if (bl < 0 || std::abs(rl - cl) < std::abs(bl - cl) ||
                    (std::abs(rl - cl) == std::abs(bl - cl) && rl < bl))
                    bl = rl;
            }
            reflen += bl;
            for (const auto& [k, v] : hc) {
                total += v;
                if (best.count(k)) matched += std::min(v, best[k]);
            }
            double bf = 0;
            for (const auto& rs : rr[i]) {
                auto rt = vocab.tokenize(rs);
                std::vector<std::vector<long>> dp(ht.size() + 1, std::vector<long>(rt.size() + 1, 0));
                for (std::size_t ii = 1; ii <= ht.size(); ++ii)
                    for (std::size_t jj = 1; jj <= rt.size(); ++jj)
                        dp[ii][jj] = (ht[ii - 1] == rt[jj - 1]) ? dp[ii - 1][jj - 1] + 1
                                                                : std::max(dp[ii - 1][jj], dp[ii][jj - 1]);
                long l = dp[ht.size()][rt.size()];
                if (l > 0) {
                    double pr = (double)l / ht.size(), rc2 = (double)l / rt.size();
                    double f = (1 + 1.44) * pr * rc2 / (rc2 + 1.44 * pr);
                    bf = std::max(bf, f);
                }
            }
            rouge += bf;
        }
        double p1 = total ? (double)matched / total : 0;
        double bp = hyplen >= reflen ? 1.0 : std::exp(1.0 - (double)reflen / hyplen);
        double b1 = (matched == 0) ? 0.0 : bp * p1;
        REQUIRE(std::abs(got.bleu[0] - b1) < 1e-9);
        REQUIRE(std::abs(got.rouge_l - rouge / n) < 1e-9);
    }
}

TEST_CASE("frechet distance hits the closed forms and stays symmetric") {
    Rng rng(21);
    Tensor x = Tensor::randn({24, 6}, rng, 1.0);
    GaussianStats s = gaussian_fit(x);
    CHECK(frechet_distance(s, s) < 1e-6);

    GaussianStats a, b;
    a.mean = Tensor::zeros({1});
    a.cov = Tensor::zeros({1, 1});
    a.cov.at(0, 0) = 1.0;
    b.mean = Tensor::zeros({1});
    b.mean[0] = 1.0;
    b.cov = a.cov;
    CHECK(std::abs(frechet_distance(a, b) - 1.0) < 1e-9);

    // diagonal closed form: sum (mu1-mu2)^2 + (sd1-sd2)^2
    GaussianStats da, db;
    long d = 5;
    da.mean = Tensor::zeros({d});
    db.mean = Tensor::zeros({d});
    da.cov = Tensor::zeros({d, d});
    db.cov = Tensor::zeros({d, d});
    double expect = 0;
    Rng frng(3);
    for (long i = 0; i < d; ++i) {
        double m1 = frng.next_normal(), m2 = frng.next_normal();
        double s1 = 0.5 + frng.next_double(), s2 = 0.5 + frng.next_double();
        da.mean[i] = m1;
        db.mean[i] = m2;
        da.cov.at(i, i) = s1 * s1;
        db.cov.at(i, i) = s2 * s2;
        expect += (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
    }
    CHECK(std::abs(frechet_distance(da, db) - expect) < 1e-9);

    Tensor y = Tensor::randn({30, 6}, rng, 1.3);
    GaussianStats sy = gaussian_fit(y);
    double f1 = frechet_distance(s, sy), f2 = frechet_distance(sy, s);
    CHECK(std::abs(f1 - f2) < 1e-6);
    CHECK(f1 >= 0);

    // constant column makes the fit singular; the ridge must kick in
    Tensor zz = Tensor::randn({10, 3}, rng, 1.0);
    for (long i = 0; i < 10; ++i) zz.at(i, 2) = 7.0;
    bool ridged = false;
    double fz = frechet_distance(gaussian_fit(zz), gaussian_fit(zz), &ridged);
    CHECK(ridged);
    CHECK(fz < 1e-6);
}

TEST_CASE("diversity and multimodality follow their pairwise-distance definitions") {
    long n = 8;
    double c = 2.5;
    Tensor f = Tensor::zeros({n, n});
    for (long i = 0; i < n; ++i) f.at(i, i) = c;  // orthogonal rows: all distances sqrt(2)c
    double div = diversity(f, 32, 9);
    CHECK(std::abs(div - std::sqrt(2.0) * c) < 1e-12);
    CHECK(std::abs(diversity(f, 32, 10) - div) < 1e-12);

    Tensor same = Tensor::zeros({6, 8});
    CHECK(diversity(same, 32, 1) == 0.0);

    std::vector<Tensor> groups = {f, same};
    DistributionMetrics dm = distribution_metrics(f, f, groups, 4);
    CHECK(dm.fid < 1e-6);
    CHECK(std::abs(dm.mm - (std::sqrt(2.0) * c + 0.0) / 2.0) < 1e-12);
}

TEST_CASE("codebook utilization counts ids and rejects out-of-range ones") {
    UtilizationReport u = codebook_utilization({{0, 0, 1}}, 4);
    CHECK(u.counts == std::vector<long>({2, 1, 0, 0}));
    CHECK(u.total == 3);
    CHECK(std::abs(u.usage_fraction - 0.5) < 1e-12);
    CHECK_THROWS_AS(codebook_utilization({{4}}, 4), RangeError);
}

TEST_CASE("the statistics feature source embeds the synthetic corpus cleanly") {
    Skeleton sk = humanoid13();
    SyntheticSpec spec;
    spec.count_per_family = 2;
    spec.seed = 3;
    auto corpus = generate_corpus(spec);
    FeatureSource src = statistics_feature_source(sk);
    CHECK(src.width == 152);
    std::vector<MotionSequence> motions;
    for (const auto& cm : corpus) motions.push_back(cm.motion);
    Tensor fm = feature_matrix(src, motions);
    CHECK(fm.dim(0) == (long)motions.size());
    CHECK(fm.dim(1) == 152);
    CHECK(fm.all_finite());
    DistributionMetrics dm = distribution_metrics(fm, fm, {}, 7);
    CHECK(dm.fid < 1e-6);
}
