#pragma once

#include "ellitrack/raster.hpp"

namespace ellitrack {

/// One located object. `id` stays -1 until tracking assigns an identity.
struct Detection {
  Point2 center;
  Extents half_extents;
  double orientation = 0.0;  ///< radians in [0, pi)
  double fit = 0.0;          ///< fit value in [-1, 1]
  int frame = 0;
  int id = -1;
  int iteration = 0;  ///< detection loop (0-based) that accepted it

  friend bool operator==(const Detection&, const Detection&) = default;
};

}  // namespace ellitrack
