#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molang/motion.hpp"

namespace molang {

enum class MotionFamily { Walk, Run, Wave, Jump, Squat, Turn, Sidestep, Kick };

const std::vector<MotionFamily>& all_families();
std::string family_name(MotionFamily f);
MotionFamily family_from_name(const std::string& name);  // ConfigError on unknown

struct SyntheticSpec {
    std::vector<MotionFamily> families = all_families();
    long count_per_family = 8;
    long frame_min = 48;
    long frame_max = 128;
    double fps = 20.0;
    std::uint64_t seed = 0;
};

// Deterministic parametric corpus. Each sample's RNG stream is derived from
// (seed, family, index), so adding families never perturbs existing samples.
// Frame counts are drawn uniformly from [frame_min, frame_max] and rounded
// down to a multiple of 4; captions are 1-3 variants that always contain the
// family word.
std::vector<CaptionedMotion> generate_corpus(const SyntheticSpec& spec);

}  // namespace molang
