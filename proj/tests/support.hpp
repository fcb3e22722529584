#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "surgsynth/generation.hpp"
#include "surgsynth/mesh.hpp"
#include "surgsynth/scene.hpp"
#include "surgsynth/trajectory.hpp"

namespace surgsynth::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "surgsynth_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_bytes(const std::filesystem::path &p, const std::string &s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Relative path -> contents of every regular file under root.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path &root) {
  std::map<std::string, std::string> out;
  for (const auto &e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_bytes(e.path());
  return out;
}

// FNV-1a over sorted (path, contents) pairs.
inline std::uint64_t tree_hash(const std::filesystem::path &root) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const std::string &s) {
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    h = (h ^ 0xff) * 1099511628211ull;
  };
  for (const auto &[rel, data] : tree_contents(root)) {
    mix(rel);
    mix(data);
  }
  return h;
}

inline CameraModel test_camera(int width = 640, int height = 480, double f = 525.0) {
  CameraModel cam;
  cam.fx = cam.fy = f;
  cam.cx = (width - 1) / 2.0;
  cam.cy = (height - 1) / 2.0;
  cam.width = width;
  cam.height = height;
  cam.near_clip = 1.0;
  return cam;
}

inline std::shared_ptr<const TriMesh> shared_mesh(TriMesh m) { return std::make_shared<const TriMesh>(std::move(m)); }

// Camera 100 mm behind the world origin looking along +z; with insertion q3
// the needle at the origin sits at depth 100 - q3.
inline SceneConfig needle_scene(int width = 640, int height = 480, int segments = 64) {
  SceneConfig s;
  s.camera = test_camera(width, height);
  s.ecm.base_pose = Pose::FromTranslation({0.0, 0.0, -100.0});
  s.ecm.joints = {0.0, 0.0, 20.0, 0.0};
  MeshEntry needle;
  needle.name = "needle";
  needle.mesh = shared_mesh(generate_needle_mesh(9.325, 0.2, kPi, segments));
  needle.material.diffuse = {0.8, 0.8, 0.85};
  s.meshes["needle"] = needle;
  InstanceSpec inst;
  inst.instance_id = 1;
  inst.obj_id = 1;
  inst.mesh = "needle";
  s.instances.push_back(inst);
  s.randomization.seed = 7;
  return s;
}

inline Trajectory needle_trajectory(const std::vector<std::pair<double, Pose>> &poses, const EcmJoints &ecm = {0, 0, 20, 0}) {
  Trajectory t;
  t.name = "needle_test";
  t.instances.push_back({1, 1, "needle"});
  for (const auto &[time, pose] : poses) {
    Keyframe k;
    k.t = time;
    k.poses[1] = pose;
    k.ecm = ecm;
    t.keyframes.push_back(k);
  }
  return t;
}

inline Pose pose_of(const Mat3 &r, const Vec3 &t) { return {r, t}; }

}  // namespace surgsynth::testing
