#pragma once

#include <string>
#include <vector>

#include "ellitrack/assign.hpp"
#include "ellitrack/raster.hpp"

namespace ellitrack::cli {

/// SVG 1.1 document: `background` embedded as a PNG (omitted without PNG
/// support), one polyline per trajectory, dashed where a dummy state is involved.
std::string render_svg(const GrayImage& background, const std::vector<Tracklet>& tracks);

}  // namespace ellitrack::cli
