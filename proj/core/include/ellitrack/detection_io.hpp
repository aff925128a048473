#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ellitrack/detection.hpp"
#include "ellitrack/segmenter.hpp"

namespace ellitrack {

struct DetectionRecord {
  Detection detection;
  std::optional<SegmentMask> mask;
};

/// One JSON object per line:
/// {"frame", "cx", "cy", "a", "b", "theta", "fit", "iteration", "mask": [[y, x, len], ...]}.
std::string detection_to_json_line(const DetectionRecord& record);
DetectionRecord detection_from_json_line(const std::string& line, const std::string& source = "<memory>");

void save_detections(const std::filesystem::path& path, const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> load_detections(const std::filesystem::path& path);

}  // namespace ellitrack
