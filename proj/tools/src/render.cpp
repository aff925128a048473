#include "ellitrack_cli/render.hpp"

#include <cmath>
#include <cstdio>

#include <boost/beast/core/detail/base64.hpp>

#include "ellitrack/error.hpp"

namespace ellitrack::cli {

namespace {

std::string colour(int id) {
  // golden-angle hue walk, fixed saturation and value
  const double h = std::fmod(id * 137.508, 360.0) / 60.0;
  const double c = 0.85;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = 0.95 - c;
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround((r + m) * 255)),
                static_cast<int>(std::lround((g + m) * 255)), static_cast<int>(std::lround((b + m) * 255)));
  return buf;
}

std::string point(const Point2& p) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f,%.2f", p.x + 0.5, p.y + 0.5);
  return buf;
}

std::string polyline(const std::vector<Point2>& pts, const std::string& stroke, bool dashed) {
  std::string out = "  <polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"1.2\"";
  if (dashed) out += " stroke-dasharray=\"3,2\"";
  out += " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out += ' ';
    out += point(pts[i]);
  }
  return out + "\"/>\n";
}

}  // namespace

std::string render_svg(const GrayImage& background, const std::vector<Tracklet>& tracks) {
  const int w = background.width();
  const int h = background.height();
  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\"";
  svg += " width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " +
         std::to_string(w) + " " + std::to_string(h) + "\">\n";
  try {
    const std::vector<std::uint8_t> png = encode_png(background);
    std::string b64(boost::beast::detail::base64::encoded_size(png.size()), '\0');
    b64.resize(boost::beast::detail::base64::encode(b64.data(), png.data(), png.size()));
    svg += "  <image x=\"0\" y=\"0\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) +
           "\" xlink:href=\"data:image/png;base64," + b64 + "\"/>\n";
  } catch (const IoError&) {
    svg += "  <rect x=\"0\" y=\"0\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) +
           "\" fill=\"black\"/>\n";
  }
  for (const Tracklet& t : tracks) {
    const std::string stroke = colour(t.id);
    svg += " <g id=\"track-" + std::to_string(t.id) + "\">\n";
    // split into runs of solid (real -> real) and dashed (touching a dummy) segments
    std::vector<Point2> run;
    bool run_dashed = false;
    for (std::size_t k = 1; k < t.states.size(); ++k) {
      const bool dashed = t.states[k - 1].is_dummy || t.states[k].is_dummy;
      if (!run.empty() && dashed != run_dashed) {
        svg += polyline(run, stroke, run_dashed);
        run.clear();
      }
      if (run.empty()) {
        run.push_back(t.states[k - 1].detection.center);
        run_dashed = dashed;
      }
      run.push_back(t.states[k].detection.center);
    }
    if (!run.empty()) svg += polyline(run, stroke, run_dashed);
    if (!t.states.empty()) {
      const Point2 end = t.states.back().detection.center;
      char buf[96];
      std::snprintf(buf, sizeof(buf), "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"1.5\" fill=\"%s\"/>\n", end.x + 0.5,
                    end.y + 0.5, stroke.c_str());
      svg += buf;
    }
    svg += " </g>\n";
  }
  return svg + "</svg>\n";
}

}  // namespace ellitrack::cli
