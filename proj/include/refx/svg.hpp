#pragma once

#include <string>
#include <vector>

#include "refx/explain.hpp"

namespace refx {

// Fixed canvas so output is byte-stable. Coordinates are SVG user units.
struct SvgLayout {
  static constexpr double kWidth = 720;
  static constexpr double kHeight = 440;
  static constexpr double kLeft = 150;
  static constexpr double kRight = 690;
  static constexpr double kTop = 50;
  static constexpr double kBottom = 380;
};

// Round tick spacing (1, 2 or 5 times a power of ten) for about
// target_ticks intervals over range.
double nice_step(double range, int target_ticks = 5);

// One polyline per profile; legend entries are the reference labels.
std::string emit_svg(const std::vector<Profile>& profiles);

// Horizontal bars sorted by |attribution|, extending right for positive and
// left for negative values from a centered zero line. The axis spans
// [-A, A] where A is max |attribution| rounded up to a multiple of
// nice_step(max |attribution|, 2).
std::string emit_svg(const AttributionSet& attribution);

}  // namespace refx
