#pragma once

// Needle-plus-occluder scenes with a brute-force visibility oracle that only
// looks at single-object renders, never at the joint z-buffer.

#include <vector>

#include "support.hpp"
#include "surgsynth/generation.hpp"
#include "surgsynth/render.hpp"

namespace surgsynth::testing {

struct OcclusionFixture {
  std::string name;
  CameraModel camera;
  SceneInstance object;
  std::vector<SceneInstance> occluders;
};

struct PixelCounts {
  std::int64_t all = 0;
  std::int64_t visib = 0;
};

// Camera at the origin; the needle is turned so its arc is mirror-symmetric
// about x = 0 and sits at depth 80. Occluder k is a large plate ending at
// x = edge, so with edge = 0 it hides exactly the left half of the image.
inline SceneInstance needle_object(const Mat3 &tilt = Mat3::Identity(), const Vec3 &t = {0, 0, 80}) {
  SceneInstance s;
  s.instance_id = 1;
  s.obj_id = 1;
  s.mesh = shared_mesh(generate_needle_mesh(9.325, 0.2, kPi, 64));
  s.pose_world = {tilt * Rz(kPi / 2), t};
  return s;
}

inline SceneInstance plate(int id, double edge_x, double depth, double half = 200.0) {
  SceneInstance s;
  s.instance_id = id;
  s.obj_id = 9;
  s.mesh = shared_mesh(generate_grid_mesh(2 * half, 2 * half, 1, 1));
  s.pose_world = Pose::FromTranslation({edge_x - half, 0.0, depth});
  return s;
}

inline OcclusionFixture half_occluder_fixture() {
  return {"half_plane", test_camera(640, 480), needle_object(), {plate(2, 0.0, 50.0)}};
}

inline std::vector<OcclusionFixture> occlusion_fixtures() {
  std::vector<OcclusionFixture> f;
  const CameraModel cam = test_camera(320, 240);
  f.push_back(half_occluder_fixture());
  f.push_back({"unoccluded", cam, needle_object(), {}});
  f.push_back({"plate_behind", cam, needle_object(), {plate(2, 0.0, 120.0)}});
  f.push_back({"fully_hidden", cam, needle_object(), {plate(2, 50.0, 50.0)}});
  f.push_back({"plate_misses", cam, needle_object(), {plate(2, -30.0, 50.0)}});
  f.push_back({"touching_depth_gap", cam, needle_object(), {plate(2, 0.0, 79.0)}});
  for (int k = 0; k < 4; ++k)
    f.push_back({"edge_sweep_" + std::to_string(k), cam, needle_object(Rx(0.25 * k)), {plate(2, -6.0 + 4.0 * k, 60.0)}});
  for (int k = 0; k < 4; ++k) {
    SceneInstance bar = plate(2, 0.0, 70.0 - 5.0 * k);
    bar.mesh = shared_mesh(generate_box_mesh({40.0, 2.0 + k, 2.0}));
    bar.pose_world = {Rz(0.3 * k), Vec3(0.0, 3.0 * k - 4.0, 70.0 - 5.0 * k)};
    f.push_back({"bar_" + std::to_string(k), cam, needle_object(Ry(0.25)), {bar}});
  }
  // Two occluders, one inside the other's shadow.
  f.push_back({"nested_pair", cam, needle_object(), {plate(2, 2.0, 60.0), plate(3, -2.0, 40.0)}});
  f.push_back({"crossing_plates", cam, needle_object(), {plate(2, 3.0, 85.0), plate(3, -4.0, 75.0)}});
  // Self-occluding pose: needle seen almost edge-on.
  f.push_back({"edge_on", cam, needle_object(Rx(1.45)), {plate(2, 1.0, 60.0)}});
  f.push_back({"tilted_plate", cam, needle_object(), {[] {
                 SceneInstance p = plate(2, 0.0, 70.0);
                 p.pose_world = {Ry(0.6), Vec3(-3.0, 0.0, 70.0)};
                 return p;
               }()}});
  f.push_back({"far_needle", test_camera(320, 240, 300.0), needle_object(Rx(0.5), {2, -1, 160}), {plate(2, 1.0, 120.0)}});
  f.push_back({"off_center", cam, needle_object(Rz(0.4), {-12, 9, 90}), {plate(2, -10.0, 45.0)}});
  return f;
}

inline std::vector<SceneInstance> all_instances(const OcclusionFixture &f) {
  std::vector<SceneInstance> s{f.object};
  s.insert(s.end(), f.occluders.begin(), f.occluders.end());
  return s;
}

// A pixel of the object is visible unless some occluder, rendered alone,
// covers it at a strictly smaller depth.
inline PixelCounts oracle_counts(const OcclusionFixture &f) {
  RenderOptions o;
  o.shade = false;
  const FrameBuffers obj = render_frame(std::span<const SceneInstance>(&f.object, 1), Pose::Identity(), f.camera, {}, o);
  std::vector<FrameBuffers> occ;
  for (const auto &s : f.occluders)
    occ.push_back(render_frame(std::span<const SceneInstance>(&s, 1), Pose::Identity(), f.camera, {}, o));
  PixelCounts c;
  for (std::size_t i = 0; i < obj.depth.size(); ++i) {
    if (obj.instance_id[i] != f.object.instance_id) continue;
    ++c.all;
    bool hidden = false;
    for (const auto &b : occ) hidden = hidden || (b.instance_id[i] != 0 && b.depth[i] < obj.depth[i]);
    if (!hidden) ++c.visib;
  }
  return c;
}

inline GtInfo fixture_gt_info(const OcclusionFixture &f) {
  RenderOptions o;
  o.shade = false;
  const auto scene = all_instances(f);
  const FrameBuffers full = render_frame(scene, Pose::Identity(), f.camera, {}, o);
  const FrameBuffers alone = render_frame(std::span<const SceneInstance>(&f.object, 1), Pose::Identity(), f.camera, {}, o);
  return compute_gt_info(full, alone, f.object, f.object.pose_world);
}

}  // namespace surgsynth::testing
