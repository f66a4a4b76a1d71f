#include "molang/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "molang/error.hpp"
#include "molang/rng.hpp"

namespace molang {

namespace {

// ---------- symmetric eigendecomposition (cyclic Jacobi) ----------

struct Eigen {
    std::vector<double> values;  // unordered
    Tensor vectors;              // [n, n], column j pairs with values[j]
};

Eigen jacobi_eigen(const Tensor& sym) {
    long n = sym.dim(0);
    Tensor a = sym;
    Tensor v = Tensor::zeros({n, n});
    for (long i = 0; i < n; ++i) v.at(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (long p = 0; p < n; ++p)
            for (long q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-26 * std::max(1.0, static_cast<double>(n))) break;

        for (long p = 0; p < n; ++p) {
            for (long q = p + 1; q < n; ++q) {
                double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (long k = 0; k < n; ++k) {
                    double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (long k = 0; k < n; ++k) {
                    double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (long k = 0; k < n; ++k) {
                    double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    Eigen e;
    e.values.resize(n);
    for (long i = 0; i < n; ++i) e.values[i] = a.at(i, i);
    e.vectors = std::move(v);
    return e;
}

Tensor symmetrized(const Tensor& m) {
    long n = m.dim(0);
    Tensor out = Tensor::zeros({n, n});
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) out.at(i, j) = 0.5 * (m.at(i, j) + m.at(j, i));
    return out;
}

// V diag(sqrt(max(lambda,0))) V^T; columns scaled by lambda^(1/4) so the
// self-product lands on the square root.
Tensor sqrt_psd(const Eigen& e) {
    long n = e.vectors.dim(0);
    Tensor scaled = Tensor::zeros({n, n});
    for (long j = 0; j < n; ++j) {
        double r = std::pow(std::max(e.values[j], 0.0), 0.25);
        for (long i = 0; i < n; ++i) scaled.at(i, j) = e.vectors.at(i, j) * r;
    }
    Tensor out = Tensor::zeros({n, n});
    kernels::matmul_a_bt_acc(scaled.data(), scaled.data(), out.data(), n, n, n);
    return out;
}

// ---------- per-frame similarity Procrustes (quaternion method) ----------

// Mean distance after the optimal s*R*x + t fit of x onto y; negative return
// signals "no usable alignment" (degenerate cloud or non-positive scale).
double aligned_mean_distance(const double* x, const double* y, long j_count) {
    double xc[3] = {0, 0, 0}, yc[3] = {0, 0, 0};
    for (long j = 0; j < j_count; ++j)
        for (int a = 0; a < 3; ++a) {
            xc[a] += x[3 * j + a];
            yc[a] += y[3 * j + a];
        }
    for (int a = 0; a < 3; ++a) {
        xc[a] /= static_cast<double>(j_count);
        yc[a] /= static_cast<double>(j_count);
    }
    double sx2 = 0.0, sy2 = 0.0, m[3][3] = {};
    for (long j = 0; j < j_count; ++j) {
        double dx[3], dy[3];
        for (int a = 0; a < 3; ++a) {
            dx[a] = x[3 * j + a] - xc[a];
            dy[a] = y[3 * j + a] - yc[a];
            sx2 += dx[a] * dx[a];
            sy2 += dy[a] * dy[a];
        }
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) m[a][b] += dx[a] * dy[b];
    }
    if (sx2 < 1e-24 || sy2 < 1e-24) return -1.0;

    // 4x4 quaternion matrix whose top eigenvector maximizes sum(y . R x).
    Tensor nq = Tensor::zeros({4, 4});
    nq.at(0, 0) = m[0][0] + m[1][1] + m[2][2];
    nq.at(0, 1) = nq.at(1, 0) = m[1][2] - m[2][1];
    nq.at(0, 2) = nq.at(2, 0) = m[2][0] - m[0][2];
    nq.at(0, 3) = nq.at(3, 0) = m[0][1] - m[1][0];
    nq.at(1, 1) = m[0][0] - m[1][1] - m[2][2];
    nq.at(1, 2) = nq.at(2, 1) = m[0][1] + m[1][0];
    nq.at(1, 3) = nq.at(3, 1) = m[2][0] + m[0][2];
    nq.at(2, 2) = -m[0][0] + m[1][1] - m[2][2];
    nq.at(2, 3) = nq.at(3, 2) = m[1][2] + m[2][1];
    nq.at(3, 3) = -m[0][0] - m[1][1] + m[2][2];

    Eigen e = jacobi_eigen(nq);
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (e.values[i] > e.values[best]) best = i;
    double q[4];
    double norm = 0.0;
    for (int i = 0; i < 4; ++i) {
        q[i] = e.vectors.at(i, best);
        norm += q[i] * q[i];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) return -1.0;
    for (double& c : q) c /= norm;

    double w = q[0], qx = q[1], qy = q[2], qz = q[3];
    double r[3][3] = {
        {1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - w * qz), 2 * (qx * qz + w * qy)},
        {2 * (qx * qy + w * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - w * qx)},
        {2 * (qx * qz - w * qy), 2 * (qy * qz + w * qx), 1 - 2 * (qx * qx + qy * qy)},
    };

    double corr = 0.0;  // sum(yc . R xc)
    for (long j = 0; j < j_count; ++j) {
        double dx[3], rx[3];
        for (int a = 0; a < 3; ++a) dx[a] = x[3 * j + a] - xc[a];
        for (int a = 0; a < 3; ++a) rx[a] = r[a][0] * dx[0] + r[a][1] * dx[1] + r[a][2] * dx[2];
        for (int a = 0; a < 3; ++a) corr += (y[3 * j + a] - yc[a]) * rx[a];
    }
    double s = corr / sx2;
    if (!(s > 0.0)) return -1.0;

    double total = 0.0;
    for (long j = 0; j < j_count; ++j) {
        double dx[3], rx[3], d2 = 0.0;
        for (int a = 0; a < 3; ++a) dx[a] = x[3 * j + a] - xc[a];
        for (int a = 0; a < 3; ++a) rx[a] = r[a][0] * dx[0] + r[a][1] * dx[1] + r[a][2] * dx[2];
        for (int a = 0; a < 3; ++a) {
            double d = s * rx[a] - (y[3 * j + a] - yc[a]);
            d2 += d * d;
        }
        total += std::sqrt(d2);
    }
    return total / static_cast<double>(j_count);
}

// ---------- n-gram utilities ----------

using Counts = std::map<std::string, long>;

Counts ngram_counts(const std::vector<std::string>& tokens, int n) {
    Counts out;
    if (static_cast<int>(tokens.size()) < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int k = 1; k < n; ++k) {
            key += '\x1f';
            key += tokens[i + k];
        }
        ++out[key];
    }
    return out;
}

long lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<long> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

void check_rows(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw ShapeError(std::string(what) + " must be [N, D]");
    if (t.dim(0) < 2) throw ContractError(std::string(what) + " needs at least 2 rows");
}

double within_diversity(const Tensor& features, long pair_count, std::uint64_t seed) {
    long n = features.dim(0), d = features.dim(1);
    std::vector<long> idx(n);
    for (long i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    long pairs = std::min(pair_count, n / 2);
    double total = 0.0;
    for (long p = 0; p < pairs; ++p) {
        const double* a = features.data() + idx[2 * p] * d;
        const double* b = features.data() + idx[2 * p + 1] * d;
        double d2 = 0.0;
        for (long k = 0; k < d; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
        total += std::sqrt(d2);
    }
    return total / static_cast<double>(pairs);
}

}  // namespace

DisplacementErrors displacement_errors(const MotionSequence& gt, const MotionSequence& pred, long frame_begin,
                                       long frame_count) {
    if (gt.joint_count() != pred.joint_count()) throw ShapeError("joint counts differ");
    long mg = gt.frame_count(), mp = pred.frame_count();
    if (frame_count < 0) frame_count = mg - frame_begin;
    if (frame_begin < 0 || frame_count < 1 || frame_begin + frame_count > mg || frame_begin + frame_count > mp)
        throw ShapeError("region [" + std::to_string(frame_begin) + ", " + std::to_string(frame_begin + frame_count) +
                         ") does not fit in both sequences");
    long width = static_cast<long>(gt.joint_count()) * 3;
    DisplacementErrors out;
    for (long t = frame_begin; t < frame_begin + frame_count; ++t) {
        const double* a = gt.positions.data() + t * width;
        const double* b = pred.positions.data() + t * width;
        double d2 = 0.0;
        for (long k = 0; k < width; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
        double dist = std::sqrt(d2);
        out.ade += dist;
        if (t == frame_begin + frame_count - 1) out.fde = dist;
    }
    out.ade /= static_cast<double>(frame_count);
    return out;
}

JointErrors joint_errors(const MotionSequence& gt, const MotionSequence& pred, bool root_align) {
    if (!gt.positions.same_shape(pred.positions)) throw ShapeError("joint_errors needs equal position shapes");
    long m = gt.frame_count();
    long j_count = gt.joint_count();
    if (m < 1) throw ShapeError("empty motion");

    std::vector<double> a(j_count * 3), b(j_count * 3);
    double mpjpe = 0.0, pampjpe = 0.0;
    for (long t = 0; t < m; ++t) {
        const double* ga = gt.positions.data() + t * j_count * 3;
        const double* pb = pred.positions.data() + t * j_count * 3;
        for (long j = 0; j < j_count; ++j)
            for (int c = 0; c < 3; ++c) {
                double ra = root_align ? ga[c] : 0.0;
                double rb = root_align ? pb[c] : 0.0;
                a[3 * j + c] = ga[3 * j + c] - ra;
                b[3 * j + c] = pb[3 * j + c] - rb;
            }
        double plain = 0.0;
        for (long j = 0; j < j_count; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                double d = a[3 * j + c] - b[3 * j + c];
                d2 += d * d;
            }
            plain += std::sqrt(d2);
        }
        plain /= static_cast<double>(j_count);
        double aligned = aligned_mean_distance(b.data(), a.data(), j_count);
        mpjpe += plain;
        pampjpe += (aligned >= 0.0 && aligned < plain) ? aligned : plain;
    }
    JointErrors out;
    out.mpjpe_mm = 1000.0 * mpjpe / static_cast<double>(m);
    out.pampjpe_mm = 1000.0 * pampjpe / static_cast<double>(m);
    return out;
}

CaptionMetrics caption_metrics(const std::vector<std::vector<std::string>>& references,
                               const std::vector<std::string>& hypotheses, const UnifiedVocab& vocab) {
    if (hypotheses.empty()) throw ContractError("caption_metrics needs at least one hypothesis");
    if (references.size() != hypotheses.size())
        throw ContractError("reference and hypothesis sample counts differ");

    std::size_t n_samples = hypotheses.size();
    std::vector<std::vector<std::string>> hyp_tok(n_samples);
    std::vector<std::vector<std::vector<std::string>>> ref_tok(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        if (references[i].empty()) throw ContractError("sample " + std::to_string(i) + " has no references");
        hyp_tok[i] = vocab.tokenize(hypotheses[i]);
        for (const auto& r : references[i]) ref_tok[i].push_back(vocab.tokenize(r));
    }

    CaptionMetrics out;

    // BLEU-1..4: corpus-level modified precision with brevity penalty.
    double log_p[4];
    bool zero_p[4];
    long hyp_len_total = 0, ref_len_total = 0;
    for (int n = 1; n <= 4; ++n) {
        long matched = 0, total = 0;
        for (std::size_t i = 0; i < n_samples; ++i) {
            Counts hc = ngram_counts(hyp_tok[i], n);
            Counts best;
            for (const auto& r : ref_tok[i]) {
                Counts rc = ngram_counts(r, n);
                for (const auto& [g, c] : rc) best[g] = std::max(best[g], c);
            }
            for (const auto& [g, c] : hc) {
                total += c;
                auto it = best.find(g);
                if (it != best.end()) matched += std::min(c, it->second);
            }
        }
        zero_p[n - 1] = (matched == 0 || total == 0);
        log_p[n - 1] = zero_p[n - 1] ? 0.0 : std::log(static_cast<double>(matched) / static_cast<double>(total));
    }
    for (std::size_t i = 0; i < n_samples; ++i) {
        long c = static_cast<long>(hyp_tok[i].size());
        hyp_len_total += c;
        long best_len = static_cast<long>(ref_tok[i][0].size());
        for (const auto& r : ref_tok[i]) {
            long rl = static_cast<long>(r.size());
            if (std::abs(rl - c) < std::abs(best_len - c) || (std::abs(rl - c) == std::abs(best_len - c) && rl < best_len))
                best_len = rl;
        }
        ref_len_total += best_len;
    }
    double bp = (hyp_len_total == 0)
                    ? 0.0
                    : (hyp_len_total >= ref_len_total
                           ? 1.0
                           : std::exp(1.0 - static_cast<double>(ref_len_total) / static_cast<double>(hyp_len_total)));
    for (int k = 1; k <= 4; ++k) {
        bool any_zero = false;
        double acc = 0.0;
        for (int n = 1; n <= k; ++n) {
            any_zero = any_zero || zero_p[n - 1];
            acc += log_p[n - 1];
        }
        out.bleu[k - 1] = (any_zero || hyp_len_total == 0) ? 0.0 : bp * std::exp(acc / static_cast<double>(k));
    }

    // ROUGE-L: per sample the best reference F-score, beta = 1.2.
    const double beta2 = 1.2 * 1.2;
    double rouge_total = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        double best_f = 0.0;
        for (const auto& r : ref_tok[i]) {
            long l = lcs_length(hyp_tok[i], r);
            if (l == 0 || hyp_tok[i].empty() || r.empty()) continue;
            double prec = static_cast<double>(l) / static_cast<double>(hyp_tok[i].size());
            double rec = static_cast<double>(l) / static_cast<double>(r.size());
            double f = (1.0 + beta2) * prec * rec / (rec + beta2 * prec);
            best_f = std::max(best_f, f);
        }
        rouge_total += best_f;
    }
    out.rouge_l = rouge_total / static_cast<double>(n_samples);

    // Plain CIDEr: tf-idf cosine per n-gram order, averaged over n = 1..4 and
    // over references; document frequency counts samples whose reference set
    // contains the n-gram.
    double cider_total = 0.0;
    for (int n = 1; n <= 4; ++n) {
        std::map<std::string, long> df;
        for (std::size_t i = 0; i < n_samples; ++i) {
            std::set<std::string> seen;
            for (const auto& r : ref_tok[i])
                for (const auto& [g, c] : ngram_counts(r, n)) seen.insert(g);
            for (const auto& g : seen) ++df[g];
        }
        auto idf = [&](const std::string& g) {
            auto it = df.find(g);
            long f = (it == df.end()) ? 1 : std::max<long>(it->second, 1);
            return std::log(static_cast<double>(n_samples) / static_cast<double>(f));
        };
        for (std::size_t i = 0; i < n_samples; ++i) {
            Counts hc = ngram_counts(hyp_tok[i], n);
            std::map<std::string, double> hv;
            double hnorm = 0.0;
            for (const auto& [g, c] : hc) {
                double w = static_cast<double>(c) * idf(g);
                hv[g] = w;
                hnorm += w * w;
            }
            hnorm = std::sqrt(hnorm);
            double sample_score = 0.0;
            for (const auto& r : ref_tok[i]) {
                Counts rc = ngram_counts(r, n);
                double rnorm = 0.0, dot = 0.0;
                for (const auto& [g, c] : rc) {
                    double w = static_cast<double>(c) * idf(g);
                    rnorm += w * w;
                    auto it = hv.find(g);
                    if (it != hv.end()) dot += w * it->second;
                }
                rnorm = std::sqrt(rnorm);
                if (hnorm > 0.0 && rnorm > 0.0) sample_score += dot / (hnorm * rnorm);
            }
            cider_total += sample_score / static_cast<double>(ref_tok[i].size());
        }
    }
    out.cider = cider_total / (4.0 * static_cast<double>(n_samples));

    long exact = 0;
    for (std::size_t i = 0; i < n_samples; ++i)
        for (const auto& r : ref_tok[i])
            if (hyp_tok[i] == r) {
                ++exact;
                break;
            }
    out.exact_match = static_cast<double>(exact) / static_cast<double>(n_samples);
    out.length_avg = static_cast<double>(hyp_len_total) / static_cast<double>(n_samples);
    return out;
}

GaussianStats gaussian_fit(const Tensor& features) {
    check_rows(features, "features");
    long n = features.dim(0), d = features.dim(1);
    GaussianStats out;
    out.mean = Tensor::zeros({d});
    for (long i = 0; i < n; ++i)
        for (long k = 0; k < d; ++k) out.mean[k] += features.at(i, k);
    for (long k = 0; k < d; ++k) out.mean[k] /= static_cast<double>(n);
    out.cov = Tensor::zeros({d, d});
    for (long i = 0; i < n; ++i) {
        for (long a = 0; a < d; ++a) {
            double da = features.at(i, a) - out.mean[a];
            for (long b = a; b < d; ++b) out.cov.at(a, b) += da * (features.at(i, b) - out.mean[b]);
        }
    }
    for (long a = 0; a < d; ++a)
        for (long b = a; b < d; ++b) {
            out.cov.at(a, b) /= static_cast<double>(n - 1);
            out.cov.at(b, a) = out.cov.at(a, b);
        }
    return out;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b, bool* ridge_applied) {
    if (a.mean.size() != b.mean.size()) throw ShapeError("gaussian dimensions differ");
    long d = a.mean.size();
    Tensor s1 = symmetrized(a.cov);
    Tensor s2 = symmetrized(b.cov);

    Eigen e1 = jacobi_eigen(s1);
    Eigen e2 = jacobi_eigen(s2);
    double min_eig = 1e300;
    for (double v : e1.values) min_eig = std::min(min_eig, v);
    for (double v : e2.values) min_eig = std::min(min_eig, v);
    bool ridged = min_eig < 1e-8;
    if (ridged) {
        for (long i = 0; i < d; ++i) {
            s1.at(i, i) += 1e-6;
            s2.at(i, i) += 1e-6;
        }
        e1 = jacobi_eigen(s1);
    }
    if (ridge_applied) *ridge_applied = ridged;

    Tensor root1 = sqrt_psd(e1);
    Tensor tmp = Tensor::zeros({d, d});
    kernels::matmul(root1.data(), s2.data(), tmp.data(), d, d, d);
    Tensor prod = Tensor::zeros({d, d});
    kernels::matmul(tmp.data(), root1.data(), prod.data(), d, d, d);
    Eigen ep = jacobi_eigen(symmetrized(prod));

    double mean_term = 0.0;
    for (long i = 0; i < d; ++i) {
        double diff = a.mean[i] - b.mean[i];
        mean_term += diff * diff;
    }
    double tr1 = 0.0, tr2 = 0.0, tr_root = 0.0;
    for (long i = 0; i < d; ++i) {
        tr1 += s1.at(i, i);
        tr2 += s2.at(i, i);
        tr_root += std::sqrt(std::max(ep.values[i], 0.0));
    }
    return std::max(0.0, mean_term + tr1 + tr2 - 2.0 * tr_root);
}

double diversity(const Tensor& features, long pair_count, std::uint64_t seed) {
    check_rows(features, "features");
    if (pair_count < 1) throw ConfigError("pair_count must be >= 1");
    return within_diversity(features, pair_count, seed);
}

DistributionMetrics distribution_metrics(const Tensor& real_features, const Tensor& gen_features,
                                         const std::vector<Tensor>& groups, std::uint64_t seed) {
    check_rows(real_features, "real features");
    check_rows(gen_features, "generated features");
    if (real_features.dim(1) != gen_features.dim(1)) throw ShapeError("feature widths differ");

    DistributionMetrics out;
    GaussianStats sr = gaussian_fit(real_features);
    GaussianStats sg = gaussian_fit(gen_features);
    out.fid = frechet_distance(sr, sg, &out.ridge_applied);
    out.div = within_diversity(gen_features, kDiversityPairs, seed);
    if (!groups.empty()) {
        double total = 0.0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (groups[g].rank() != 2 || groups[g].dim(0) < 2)
                throw ConfigError("group " + std::to_string(g) + " needs at least 2 generations");
            if (groups[g].dim(1) != gen_features.dim(1)) throw ShapeError("group feature width differs");
            total += within_diversity(groups[g], kDiversityPairs, hash_combine(seed, g));
        }
        out.mm = total / static_cast<double>(groups.size());
    }
    return out;
}

UtilizationReport codebook_utilization(const std::vector<std::vector<long>>& id_streams, long K) {
    if (K < 1) throw ConfigError("K must be >= 1");
    UtilizationReport out;
    out.counts.assign(K, 0);
    for (const auto& stream : id_streams)
        for (long id : stream) {
            if (id < 0 || id >= K)
                throw RangeError("token id " + std::to_string(id) + " outside [0, " + std::to_string(K) + ")");
            ++out.counts[id];
            ++out.total;
        }
    long used = 0;
    for (long c : out.counts)
        if (c > 0) ++used;
    out.usage_fraction = static_cast<double>(used) / static_cast<double>(K);
    return out;
}

FeatureSource statistics_feature_source(const Skeleton& skeleton) {
    long d = feature_width(skeleton.joint_count());
    FeatureSource src;
    src.name = "feature-statistics";
    src.width = 2 * d;
    src.extract = [d](const MotionSequence& motion) {
        MotionFeatures f = features_from_positions(motion);
        long m = f.frame_count();
        if (f.width() != d) throw ShapeError("feature width mismatch");
        Tensor out = Tensor::zeros({2 * d});
        for (long k = 0; k < d; ++k) {
            double mean = 0.0;
            for (long t = 0; t < m; ++t) mean += f.frames.at(t, k);
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (long t = 0; t < m; ++t) {
                double dv = f.frames.at(t, k) - mean;
                var += dv * dv;
            }
            out[k] = mean;
            out[d + k] = std::sqrt(var / static_cast<double>(m));
        }
        return out;
    };
    return src;
}

Tensor feature_matrix(const FeatureSource& source, const std::vector<MotionSequence>& motions) {
    if (motions.empty()) throw ContractError("feature_matrix needs at least one motion");
    Tensor out = Tensor::zeros({static_cast<long>(motions.size()), source.width});
    for (std::size_t i = 0; i < motions.size(); ++i) {
        Tensor row = source.extract(motions[i]);
        if (row.size() != source.width) throw ShapeError("feature source produced wrong width");
        for (long k = 0; k < source.width; ++k) out.at(static_cast<long>(i), k) = row[k];
    }
    return out;
}

}  // namespace molang
