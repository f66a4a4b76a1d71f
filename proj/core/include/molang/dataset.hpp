#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "molang/motion.hpp"

namespace molang {

struct DatasetSplit {
    std::vector<CaptionedMotion> train, val, test;
};

// Disjoint, covering, deterministic split by sample id: ids are sorted, then
// shuffled with the seeded generator, then cut into train/val/test. Ratios
// must sum to 1 (1e-9); counts come from floors plus a largest-remainder
// pass, so (0.8, 0.1, 0.1) over 100 samples gives exactly 80/10/10.
DatasetSplit split_dataset(const std::vector<CaptionedMotion>& corpus, std::array<double, 3> ratios,
                           std::uint64_t seed);

}  // namespace molang
