#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "surgsynth/geometry.hpp"
#include "surgsynth/mesh.hpp"

namespace surgsynth {

using Rgb = Eigen::Vector3d;

struct Material {
  Rgb ambient{0.2, 0.2, 0.2};
  Rgb diffuse{0.7, 0.7, 0.7};
  Rgb specular{0.3, 0.3, 0.3};
  double shininess = 32.0;

  void validate() const;
};

struct SceneInstance {
  int instance_id = 1;
  int obj_id = 1;
  std::shared_ptr<const TriMesh> mesh;
  Pose pose_world;
  Material material;
};

struct DirectionalLight {
  Vec3 direction{0.0, 0.0, -1.0};  // camera frame, pointing from surface to light
  Rgb intensity{1.0, 1.0, 1.0};
};

struct LightSpec {
  std::vector<DirectionalLight> lights;
  Rgb ambient{0.0, 0.0, 0.0};

  void validate() const;
};

// Joint order: yaw (rad), pitch (rad), insertion (mm), roll (rad).
using EcmJoints = std::array<double, 4>;

struct EcmRig {
  Pose base_pose;  // remote center of motion frame in world
  EcmJoints joints{0.0, 0.0, 0.0, 0.0};
  std::array<std::array<double, 2>, 4> joint_limits{{{-kPi / 2, kPi / 2},
                                                     {-kPi / 3, kPi / 3},
                                                     {0.0, 300.0},
                                                     {-kPi, kPi}}};

  // Throws JointLimit naming the first offending joint.
  void check_limits() const;
};

// camera_in_world = base * Ry(q1) * Rx(q2) * Trans(0, 0, q3) * Rz(q4)
Pose ecm_forward_kinematics(const EcmRig &rig);

struct ViewpointRandomization {
  EcmJoints offset_bounds{deg2rad(5.0), deg2rad(5.0), 10.0, deg2rad(10.0)};
  Vec3 light_direction{0.0, 0.0, -1.0};
  double light_cone_deg = 30.0;
  std::array<double, 2> intensity_range{0.6, 1.0};
  Rgb ambient{0.15, 0.15, 0.15};
  std::uint64_t seed = 0;

  void validate() const;
};

struct ViewpointSample {
  EcmRig rig;
  LightSpec lights;
  EcmJoints offsets{};
  std::vector<std::string> warnings;  // one entry per clamped joint
};

// Offsets are drawn uniformly per joint from a SplitMix64 stream keyed by
// (seed, replay_index); out-of-limit results are clamped and reported.
ViewpointSample sample_viewpoint(const EcmRig &rig, const ViewpointRandomization &rand,
                                 std::uint64_t replay_index);

struct NeedleParams {
  double arc_radius = 9.325;
  double tube_radius = 0.2;
  double arc_angle = kPi;
  int segments = 64;
};

struct MeshEntry {
  std::string name;
  std::shared_ptr<const TriMesh> mesh;
  Material material;
  bool annotate = true;
  std::vector<Pose> symmetries;  // extra symmetries; identity is implicit
};

struct InstanceSpec {
  int instance_id = 1;
  int obj_id = 1;
  std::string mesh;
  Pose pose;
};

struct SceneConfig {
  CameraModel camera;
  EcmRig ecm;
  std::map<std::string, MeshEntry> meshes;
  std::vector<InstanceSpec> instances;
  ViewpointRandomization randomization;
  Rgb background{0.0, 0.0, 0.0};

  const MeshEntry &mesh(const std::string &name) const;
};

// JSON scene config; relative mesh paths resolve against base_dir.
SceneConfig parse_scene_config(const std::string &json_text,
                               const std::filesystem::path &base_dir);
SceneConfig load_scene_config(const std::filesystem::path &path);

// Overrides fields of base with the keys present in a randomization JSON
// object: offset_bounds, light_direction, light_cone_deg, intensity, ambient,
// seed.
ViewpointRandomization parse_randomization(const std::string &json_text,
                                           ViewpointRandomization base = {});

}  // namespace surgsynth
