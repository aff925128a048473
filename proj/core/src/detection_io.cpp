#include "ellitrack/detection_io.hpp"

#include <fstream>

#include <json.hpp>

#include "ellitrack/error.hpp"

namespace ellitrack {

using nlohmann::json;

std::string detection_to_json_line(const DetectionRecord& r) {
  const Detection& d = r.detection;
  json doc = {{"frame", d.frame},          {"cx", d.center.x},   {"cy", d.center.y},
              {"a", d.half_extents.a},     {"b", d.half_extents.b}, {"theta", d.orientation},
              {"fit", d.fit},              {"iteration", d.iteration}};
  json runs = json::array();
  if (r.mask) {
    for (const PixelRun& run : r.mask->pixels.runs()) runs.push_back({run.y, run.x, run.length});
  }
  doc["mask"] = runs;
  return doc.dump();
}

DetectionRecord detection_from_json_line(const std::string& line, const std::string& source) {
  try {
    const json doc = json::parse(line);
    DetectionRecord r;
    Detection& d = r.detection;
    d.frame = doc.at("frame").get<int>();
    d.center = {doc.at("cx").get<double>(), doc.at("cy").get<double>()};
    d.half_extents = {doc.at("a").get<double>(), doc.at("b").get<double>()};
    d.orientation = doc.at("theta").get<double>();
    d.fit = doc.at("fit").get<double>();
    d.iteration = doc.value("iteration", 0);
    std::vector<PixelRun> runs;
    for (const json& run : doc.at("mask")) {
      runs.push_back({run.at(0).get<int>(), run.at(1).get<int>(), run.at(2).get<int>()});
    }
    if (!runs.empty()) r.mask = make_segment_mask(PixelMask::from_runs(runs));
    return r;
  } catch (const json::exception& e) {
    throw IoError(source + ": malformed detection (" + e.what() + ")");
  }
}

void save_detections(const std::filesystem::path& path, const std::vector<DetectionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const DetectionRecord& r : records) out << detection_to_json_line(r) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<DetectionRecord> load_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<DetectionRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    out.push_back(detection_from_json_line(line, path.string() + ":" + std::to_string(lineno)));
  }
  return out;
}

}  // namespace ellitrack
