#pragma once

#include <cstdint>
#include <vector>

#include "molang/vocab.hpp"

namespace molang {

struct SpanCorruptResult {
    std::vector<long> source;
    std::vector<long> target;
};

// T5-style denoising pair. n = round(ratio*N) tokens are removed as
// contiguous, non-adjacent spans; the i-th span becomes <extra_id_i> in the
// source, and the target is <extra_id_0> span0 <extra_id_1> span1 ...
// <extra_id_k> with a final fresh sentinel. n = 0 keeps the source unchanged
// and the target is just [<extra_id_0>].
//
// Deterministic draw order from Rng(seed), which the golden tests hand-trace:
//   1. span lengths: while tokens remain to remove, len = next_geometric(
//      mean_span) clamped to the remainder; if the span cap (min(99, kept+1))
//      is reached, the last span takes the whole remainder without a draw.
//   2. gap choice: shuffle [0..kept] with Rng::shuffle, take the first k
//      entries, sort ascending. Gap g places a span before the g-th kept
//      token; distinct gaps keep spans non-adjacent.
//   3. the i-th drawn length pairs with the i-th smallest gap.
SpanCorruptResult span_corrupt(const std::vector<long>& ids, double ratio, double mean_span,
                               std::uint64_t seed, const UnifiedVocab& vocab);

}  // namespace molang
