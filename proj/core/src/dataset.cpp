#include "molang/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "molang/rng.hpp"

namespace molang {

DatasetSplit split_dataset(const std::vector<CaptionedMotion>& corpus, std::array<double, 3> ratios,
                           std::uint64_t seed) {
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    for (double r : ratios)
        if (r < 0.0) throw ConfigError("split ratios must be non-negative");
    std::size_t active = 0;
    for (double r : ratios) active += r > 0.0 ? 1 : 0;
    if (corpus.size() < active) throw ConfigError("fewer samples than splits");

    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    std::map<std::string, const CaptionedMotion*> by_id;
    for (const CaptionedMotion& cm : corpus) {
        if (!by_id.emplace(cm.id, &cm).second) throw ConfigError("duplicate sample id: " + cm.id);
        ids.push_back(cm.id);
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(seed);
    rng.shuffle(ids);

    const long n = static_cast<long>(ids.size());
    std::array<long, 3> counts{};
    std::array<double, 3> frac{};
    long assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = ratios[static_cast<std::size_t>(i)] * static_cast<double>(n);
        counts[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(exact + 1e-9));
        frac[static_cast<std::size_t>(i)] = exact - static_cast<double>(counts[static_cast<std::size_t>(i)]);
        assigned += counts[static_cast<std::size_t>(i)];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (frac[static_cast<std::size_t>(i)] > frac[static_cast<std::size_t>(best)] + 1e-12) best = i;
        ++counts[static_cast<std::size_t>(best)];
        frac[static_cast<std::size_t>(best)] = -1.0;
        ++assigned;
    }
    // every active split gets at least one sample
    for (int i = 0; i < 3; ++i) {
        if (ratios[static_cast<std::size_t>(i)] > 0.0 && counts[static_cast<std::size_t>(i)] == 0) {
            int donor = 0;
            for (int k = 1; k < 3; ++k)
                if (counts[static_cast<std::size_t>(k)] > counts[static_cast<std::size_t>(donor)]) donor = k;
            --counts[static_cast<std::size_t>(donor)];
            ++counts[static_cast<std::size_t>(i)];
        }
    }

    DatasetSplit out;
    long pos = 0;
    for (int s = 0; s < 3; ++s) {
        std::vector<CaptionedMotion>& dst = s == 0 ? out.train : (s == 1 ? out.val : out.test);
        for (long i = 0; i < counts[static_cast<std::size_t>(s)]; ++i)
            dst.push_back(*by_id.at(ids[static_cast<std::size_t>(pos++)]));
    }
    return out;
}

}  // namespace molang
