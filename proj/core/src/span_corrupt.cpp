#include "molang/span_corrupt.hpp"

#include <algorithm>
#include <cmath>

#include "molang/rng.hpp"

namespace molang {

SpanCorruptResult span_corrupt(const std::vector<long>& ids, double ratio, double mean_span,
                               std::uint64_t seed, const UnifiedVocab& vocab) {
    if (ids.empty()) throw ContractError("span_corrupt needs at least one token");
    if (ratio < 0.0 || ratio >= 1.0) throw ContractError("corruption ratio must be in [0, 1)");
    if (mean_span < 1.0) throw ContractError("mean span must be >= 1");

    const long n = static_cast<long>(ids.size());
    const long n_remove = std::llround(ratio * static_cast<double>(n));
    SpanCorruptResult out;
    if (n_remove == 0) {
        out.source = ids;
        out.target = {vocab.extra_id(0)};
        return out;
    }

    Rng rng(seed);
    const long kept = n - n_remove;
    const long max_spans = std::min<long>(99, kept + 1);

    std::vector<long> lengths;
    long need = n_remove;
    while (need > 0) {
        long len;
        if (static_cast<long>(lengths.size()) + 1 == max_spans) {
            len = need;
        } else {
            len = std::min(rng.next_geometric(mean_span), need);
        }
        lengths.push_back(len);
        need -= len;
    }
    const long k = static_cast<long>(lengths.size());

    std::vector<long> gaps(static_cast<std::size_t>(kept + 1));
    for (long i = 0; i <= kept; ++i) gaps[static_cast<std::size_t>(i)] = i;
    rng.shuffle(gaps);
    gaps.resize(static_cast<std::size_t>(k));
    std::sort(gaps.begin(), gaps.end());

    // walk the original sequence: before the g_i-th kept token, remove the
    // i-th span
    std::size_t pos = 0;
    long kept_seen = 0;
    for (long i = 0; i < k; ++i) {
        while (kept_seen < gaps[static_cast<std::size_t>(i)]) {
            out.source.push_back(ids[pos++]);
            ++kept_seen;
        }
        out.source.push_back(vocab.extra_id(i));
        out.target.push_back(vocab.extra_id(i));
        for (long t = 0; t < lengths[static_cast<std::size_t>(i)]; ++t) out.target.push_back(ids[pos++]);
    }
    while (pos < ids.size()) {
        out.source.push_back(ids[pos++]);
        ++kept_seen;
    }
    out.target.push_back(vocab.extra_id(k));
    return out;
}

}  // namespace molang
