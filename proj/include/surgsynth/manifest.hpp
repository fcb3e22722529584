#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "surgsynth/geometry.hpp"
#include "surgsynth/scene.hpp"

namespace surgsynth {

inline constexpr const char *kToolVersion = "surgsynth 0.1.0";

struct DroppedFrame {
  int sample_index = 0;
  double time = 0.0;
  std::string reason;
};

// One trajectory replay, stored as one BOP scene.
struct ReplayRecord {
  int scene_id = 0;
  std::string trajectory;
  int replay_index = 0;
  EcmJoints joint_offsets{};
  LightSpec light;
  int frame_count = 0;
  int dropped_count = 0;
  std::vector<DroppedFrame> dropped;
  std::vector<std::string> warnings;
};

struct DatasetManifest {
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  CameraModel camera;
  double depth_scale = 0.1;
  int samples_per_replay = 0;
  double min_visib = 0.0;
  std::vector<int> annotated_obj_ids;
  std::vector<ReplayRecord> scenes;
};

std::string manifest_to_json(const DatasetManifest &manifest);
DatasetManifest parse_manifest(const std::string &json_text);
DatasetManifest load_manifest(const std::filesystem::path &path);

}  // namespace surgsynth
