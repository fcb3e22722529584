#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "surgsynth/geometry.hpp"
#include "surgsynth/scene.hpp"

namespace surgsynth {

struct TrajectoryInstance {
  int instance_id = 1;
  int obj_id = 1;
  std::string mesh;  // key into SceneConfig::meshes
};

struct Keyframe {
  double t = 0.0;                // seconds
  std::map<int, Pose> poses;     // instance_id -> world pose
  EcmJoints ecm{0.0, 0.0, 0.0, 0.0};
};

struct Trajectory {
  static constexpr int kVersion = 1;

  std::string name;
  std::string source;
  std::vector<TrajectoryInstance> instances;
  std::vector<Keyframe> keyframes;

  // Strictly increasing timestamps, every keyframe posing exactly the
  // declared instances, unique instance ids. Throws ConfigError.
  void validate(std::size_t min_keyframes = 2) const;

  double start_time() const { return keyframes.front().t; }
  double end_time() const { return keyframes.back().t; }
};

struct SceneState {
  std::map<int, Pose> poses;
  EcmJoints ecm{0.0, 0.0, 0.0, 0.0};
};

// Geodesic pose interpolation and linear joint interpolation between the
// bracketing keyframes. A keyframe timestamp returns that keyframe verbatim.
// Throws OutOfRange outside [start_time, end_time].
SceneState trajectory_sample(const Trajectory &traj, double time);

// Versioned JSON document:
// {version, name, source, instances: [{instance_id, obj_id, mesh}],
//  keyframes: [{t, poses: {"<id>": [R row-major (9), t mm (3)]}, ecm: [q1..q4]}]}
Trajectory parse_trajectory(const std::string &json_text);
std::string trajectory_to_json(const Trajectory &traj);
Trajectory load_trajectory(const std::filesystem::path &path);
void save_trajectory(const Trajectory &traj, const std::filesystem::path &path);

}  // namespace surgsynth
