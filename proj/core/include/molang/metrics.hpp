#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "molang/motion.hpp"
#include "molang/tensor.hpp"
#include "molang/vocab.hpp"

namespace molang {

struct DisplacementErrors {
    double ade = 0.0;  // mean over region frames of the L2 norm of the stacked J*3 difference
    double fde = 0.0;  // that norm at the last region frame
};

// Region [frame_begin, frame_begin + frame_count) applies to both sequences;
// frame_count = -1 means "to the end of gt". ShapeError if the joint counts
// differ or the region does not fit in either sequence. Meters.
DisplacementErrors displacement_errors(const MotionSequence& gt, const MotionSequence& pred, long frame_begin = 0,
                                       long frame_count = -1);

struct JointErrors {
    double mpjpe_mm = 0.0;    // mean per-joint Euclidean error, millimeters
    double pampjpe_mm = 0.0;  // after per-frame similarity Procrustes (rotation+translation+scale)
};

// Equal shapes required. `root_align` subtracts the pelvis (joint 0) position
// from every joint, per frame, in both sequences first. Per frame the
// alignment is kept only when it does not increase that frame's error, so
// pampjpe <= mpjpe always holds; frames with an all-coincident point cloud
// skip alignment entirely.
JointErrors joint_errors(const MotionSequence& gt, const MotionSequence& pred, bool root_align = false);

struct CaptionMetrics {
    double bleu[4] = {0, 0, 0, 0};  // corpus BLEU-1..4, brevity penalty, no smoothing
    double rouge_l = 0.0;           // LCS F-measure, beta = 1.2, best reference per sample
    double cider = 0.0;             // plain CIDEr: mean tf-idf cosine over 1..4-grams (no length penalty)
    double exact_match = 0.0;       // fraction of hypotheses token-equal to some reference
    double length_avg = 0.0;        // mean hypothesis token count
};

// references[i] are the alternatives for hypotheses[i]; tokenization is the
// vocab's text normalization. ContractError when empty or ragged.
CaptionMetrics caption_metrics(const std::vector<std::vector<std::string>>& references,
                               const std::vector<std::string>& hypotheses, const UnifiedVocab& vocab);

struct GaussianStats {
    Tensor mean;  // [D]
    Tensor cov;   // [D, D], symmetrized
};

// Unbiased covariance over rows; ContractError for fewer than 2 rows.
GaussianStats gaussian_fit(const Tensor& features);

// ||mu1-mu2||^2 + Tr(S1 + S2 - 2 sqrt(sqrt(S1) S2 sqrt(S1))), matrix square
// roots via symmetric eigendecomposition with negative eigenvalues clamped.
// Near-singular inputs get a 1e-6 ridge on both diagonals; *ridge_applied
// reports it when given.
double frechet_distance(const GaussianStats& a, const GaussianStats& b, bool* ridge_applied = nullptr);

// Mean Euclidean distance over `pair_count` disjoint random pairs of rows
// (fewer when the set is small); ContractError for fewer than 2 rows.
double diversity(const Tensor& features, long pair_count, std::uint64_t seed);

inline constexpr long kDiversityPairs = 32;

struct DistributionMetrics {
    double fid = 0.0;
    double div = 0.0;  // over the generated set
    double mm = 0.0;   // mean within-group diversity; 0 when no groups are given
    bool ridge_applied = false;
};

// groups = generated features per prompt, each [G_i, D] with G_i >= 2
// (ConfigError otherwise).
DistributionMetrics distribution_metrics(const Tensor& real_features, const Tensor& gen_features,
                                         const std::vector<Tensor>& groups, std::uint64_t seed);

struct UtilizationReport {
    std::vector<long> counts;     // per code id, size K
    long total = 0;               // sum of counts
    double usage_fraction = 0.0;  // codes with count > 0, over K
};

// RangeError if any id falls outside [0, K).
UtilizationReport codebook_utilization(const std::vector<std::vector<long>>& id_streams, long K);

// Pluggable MotionSequence -> fixed-width feature row for the distribution
// metrics; the substitution point for a learned extractor.
struct FeatureSource {
    std::string name;
    long width = 0;
    std::function<Tensor(const MotionSequence&)> extract;  // returns [width]
};

// Default source: per-dimension mean and standard deviation (population) of
// the motion's feature frames, concatenated; width = 2 * feature_width(J).
// Needs M >= 2 frames.
FeatureSource statistics_feature_source(const Skeleton& skeleton);

// Rows = source applied to each motion; [N, width].
Tensor feature_matrix(const FeatureSource& source, const std::vector<MotionSequence>& motions);

}  // namespace molang
