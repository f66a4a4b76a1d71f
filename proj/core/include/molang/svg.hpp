#pragma once

#include <string>

#include "molang/motion.hpp"

namespace molang {

// Small-multiples strip of stick figures: every ceil(M/columns)-th frame,
// drawn left to right in time order via orthographic x/y projection with a
// shared scale across panels. Valid standalone XML; byte-identical output
// for identical input. ContractError when M < 1 or columns < 1.
std::string render_svg(const MotionSequence& motion, long columns = 8);

void save_svg(const std::string& path, const std::string& svg_text);

}  // namespace molang
