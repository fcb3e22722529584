#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "surgsynth/error.hpp"
#include "surgsynth/random.hpp"
#include "surgsynth/render.hpp"

using namespace surgsynth;
using surgsynth::testing::shared_mesh;

namespace {

// fx = fy = z = 100 and a zero principal point make u = X and v = Y exactly
// for points on the z = 100 plane.
CameraModel unit_camera(int w = 64, int h = 48) {
  CameraModel cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 0.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

SceneInstance triangle_instance(const Vec2 &a, const Vec2 &b, const Vec2 &c, int id, double z = 100.0) {
  TriMesh m;
  m.vertices = {{a.x(), a.y(), z}, {b.x(), b.y(), z}, {c.x(), c.y(), z}};
  m.triangles = {{0, 1, 2}};
  m.vertex_normals = compute_vertex_normals(m);
  SceneInstance inst;
  inst.instance_id = id;
  inst.mesh = shared_mesh(m);
  return inst;
}

double edge(const Vec2 &a, const Vec2 &b, const Vec2 &p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

FrameBuffers render_one(const SceneInstance &inst, const CameraModel &cam, bool shade = false) {
  RenderOptions o;
  o.shade = shade;
  return render_frame(std::span<const SceneInstance>(&inst, 1), Pose::Identity(), cam, LightSpec{}, o);
}

}  // namespace

TEST(Raster, CoverageMatchesPointInTriangleOracle) {
  const CameraModel cam = unit_camera();
  SplitMix64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    // Dyadic vertices (multiples of 1/256) offset from pixel centers avoid ties.
    auto coord = [&rng](int lo, int hi) {
      return (static_cast<double>(lo + static_cast<int>(rng.next() % static_cast<std::uint64_t>(hi - lo))) + 77.0 / 256.0);
    };
    const Vec2 a(coord(-5, 70), coord(-5, 50)), b(coord(-5, 70), coord(-5, 50)), c(coord(-5, 70), coord(-5, 50));
    const FrameBuffers fb = render_one(triangle_instance(a, b, c, 3), cam);
    const double orient = edge(a, b, c) > 0 ? 1.0 : -1.0;
    int mismatches = 0;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const Vec2 p(x, y);
        const double e0 = orient * edge(a, b, p), e1 = orient * edge(b, c, p), e2 = orient * edge(c, a, p);
        if (e0 == 0 || e1 == 0 || e2 == 0) continue;  // tie, owned by the fill rule
        const bool inside = e0 > 0 && e1 > 0 && e2 > 0;
        if (inside != (fb.instance_id[fb.index(x, y)] == 3)) ++mismatches;
      }
    EXPECT_EQ(mismatches, 0) << "trial " << trial;
  }
}

TEST(Raster, SharedEdgesCoverEachPixelOnce) {
  // Square with corners on pixel centers, split along its diagonal. Top-left
  // ownership covers x, y in [10, 20) exactly once.
  const CameraModel cam = unit_camera();
  const Vec2 p00(10, 10), p10(20, 10), p11(20, 20), p01(10, 20);
  const FrameBuffers a = render_one(triangle_instance(p00, p10, p11, 1), cam);
  const FrameBuffers b = render_one(triangle_instance(p00, p11, p01, 2), cam);
  int count = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t i = a.index(x, y);
      const bool in_a = a.instance_id[i] == 1, in_b = b.instance_id[i] == 2;
      EXPECT_FALSE(in_a && in_b) << x << "," << y;
      const bool expected = x >= 10 && x < 20 && y >= 10 && y < 20;
      EXPECT_EQ(in_a || in_b, expected) << x << "," << y;
      count += in_a || in_b;
    }
  EXPECT_EQ(count, 100);
}

TEST(Raster, WindingDoesNotMatter) {
  const CameraModel cam = unit_camera();
  const Vec2 a(3.5, 4.25), b(40.75, 9.5), c(17.125, 33.0);
  EXPECT_EQ(render_one(triangle_instance(a, b, c, 1), cam).instance_id,
            render_one(triangle_instance(a, c, b, 1), cam).instance_id);
}

TEST(Depth, TiltedPlaneIsPerspectiveCorrect) {
  CameraModel cam = unit_camera(80, 60);
  cam.cx = 40;
  cam.cy = 30;
  // Plane n . p = d through three camera-frame points whose projections are
  // on the 1/256 px grid, so vertex snapping leaves the triangle unchanged.
  const Vec3 p0(-40, -30, 80), p1(60, -20, 160), p2(-12, 60, 120);
  TriMesh m;
  m.vertices = {p0, p1, p2};
  m.triangles = {{0, 1, 2}};
  m.vertex_normals = compute_vertex_normals(m);
  SceneInstance inst;
  inst.mesh = shared_mesh(m);
  const FrameBuffers fb = render_one(inst, cam);
  const Vec3 n = (p1 - p0).cross(p2 - p0);
  const double d = n.dot(p0);
  int covered = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t i = fb.index(x, y);
      if (fb.instance_id[i] == 0) {
        EXPECT_EQ(fb.depth[i], 0.0);
        continue;
      }
      ++covered;
      const Vec3 ray((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
      const double z = d / n.dot(ray);
      EXPECT_NEAR(fb.depth[i], z, 1e-9 * z);
    }
  EXPECT_GT(covered, 500);
}

TEST(Depth, NearerSurfaceWinsAndTiesKeepFirst) {
  const CameraModel cam = unit_camera();
  const SceneInstance far = triangle_instance({0, 0}, {60, 0}, {0, 45}, 1, 100.0);
  SceneInstance near = triangle_instance({0, 0}, {30, 0}, {0, 22.5}, 2, 100.0);
  // Same footprint in pixels, half the depth.
  TriMesh m = *near.mesh;
  for (auto &v : m.vertices) v *= 0.5;
  near.mesh = shared_mesh(m);
  const std::vector<SceneInstance> both{far, near};
  const FrameBuffers fb = render_frame(both, Pose::Identity(), cam, LightSpec{}, {Rgb::Zero(), false});
  const FrameBuffers near_only = render_one(near, cam);
  for (std::size_t i = 0; i < fb.instance_id.size(); ++i)
    if (near_only.instance_id[i] == 2) {
      EXPECT_EQ(fb.instance_id[i], 2);
      EXPECT_NEAR(fb.depth[i], 50.0, 1e-9);
    }
  const std::vector<SceneInstance> tie{far, triangle_instance({0, 0}, {60, 0}, {0, 45}, 7, 100.0)};
  const FrameBuffers t = render_frame(tie, Pose::Identity(), cam, LightSpec{}, {Rgb::Zero(), false});
  for (auto id : t.instance_id) EXPECT_NE(id, 7);
}

TEST(Clip, PlaneThroughNearClipRenders) {
  CameraModel cam = unit_camera(64, 48);
  cam.cx = 32;
  cam.cy = 24;
  cam.near_clip = 5.0;
  // Floor plane y = 20 extending from behind the camera to far ahead.
  TriMesh m = generate_grid_mesh(400, 400, 1, 1);
  SceneInstance inst;
  inst.mesh = shared_mesh(m);
  inst.pose_world = {Rx(deg2rad(90)), Vec3(0, 20, 150)};
  const FrameBuffers fb = render_one(inst, cam);
  int covered = 0;
  for (std::size_t i = 0; i < fb.depth.size(); ++i)
    if (fb.instance_id[i]) {
      ++covered;
      EXPECT_GE(fb.depth[i], 5.0 - 1e-9);
    }
  EXPECT_GT(covered, 100);
  // Everything behind the camera: nothing drawn, no error.
  inst.pose_world.translation = {0, 0, -500};
  const FrameBuffers none = render_one(inst, cam);
  for (auto id : none.instance_id) EXPECT_EQ(id, 0);
}

TEST(Shading, BlinnPhongHandValues) {
  Material m;
  m.ambient = {0.2, 0.2, 0.2};
  m.diffuse = {0.5, 0.4, 0.3};
  m.specular = {0.1, 0.1, 0.1};
  m.shininess = 8;
  LightSpec l;
  l.ambient = {0.5, 0.5, 0.5};
  const Vec3 n(0, 0, -1), v(0, 0, -1);
  l.lights.push_back({Vec3(0, 0, -1), Rgb::Ones()});
  Rgb c = shade_blinn_phong(m, n, v, l);
  EXPECT_NEAR(c.x(), 0.1 + 0.5 + 0.1, 1e-15);
  EXPECT_NEAR(c.z(), 0.1 + 0.3 + 0.1, 1e-15);

  // Light 60 degrees off the normal: diffuse cos 60, half vector at 30.
  l.lights[0] = {Vec3(std::sin(deg2rad(60)), 0, -std::cos(deg2rad(60))), Rgb::Constant(0.5)};
  c = shade_blinn_phong(m, n, v, l);
  const double spec = std::pow(std::cos(deg2rad(30)), 8);
  EXPECT_NEAR(c.x(), 0.1 + 0.5 * (0.5 * 0.5 + 0.1 * spec), 1e-12);

  // Light behind the surface: ambient only, and clamping at 1.
  l.lights[0] = {Vec3(0, 0, 1), Rgb::Ones()};
  EXPECT_NEAR(shade_blinn_phong(m, n, v, l).x(), 0.1, 1e-15);
  l.lights[0] = {Vec3(0, 0, -1), Rgb::Constant(5.0)};
  EXPECT_EQ(shade_blinn_phong(m, n, v, l).x(), 1.0);
}

TEST(Shading, BackgroundAndLitPixels) {
  CameraModel cam = unit_camera();
  SceneInstance inst = triangle_instance({5, 5}, {50, 5}, {5, 40}, 4);
  LightSpec l;
  l.lights.push_back({Vec3(0, 0, -1), Rgb::Ones()});
  RenderOptions o;
  o.background = {0.0, 1.0, 0.0};
  const FrameBuffers fb = render_frame(std::span<const SceneInstance>(&inst, 1), Pose::Identity(), cam, l, o);
  const std::size_t bg = fb.index(60, 45), fg = fb.index(10, 10);
  EXPECT_EQ(fb.rgb[bg * 3 + 1], 255);
  EXPECT_EQ(fb.rgb[bg * 3], 0);
  EXPECT_GT(fb.rgb[fg * 3], 100);  // lit, two-sided normal faces the camera
}

TEST(Invariance, RigidMotionOfWholeSceneLeavesBuffersUnchanged) {
  // Camera rotation is a signed permutation and translations are dyadic, so
  // every composed transform is exact and buffers must match bit for bit.
  CameraModel cam = unit_camera(96, 72);
  cam.fx = cam.fy = 300;
  cam.cx = 47.5;
  cam.cy = 35.5;
  Mat3 perm;
  perm << 0, 0, 1, 1, 0, 0, 0, 1, 0;  // camera z along world x
  const Pose cam_pose{perm, Vec3(-80, 0.5, -0.25)};
  SceneInstance needle;
  needle.instance_id = 1;
  needle.mesh = shared_mesh(generate_needle_mesh(9.325, 0.2, kPi, 32));
  needle.pose_world = {Ry(kPi / 2) * Rz(0.3) * Rx(0.2), Vec3(0, 0, 0)};  // arc faces the camera
  SceneInstance box;
  box.instance_id = 2;
  box.mesh = shared_mesh(generate_box_mesh({6, 6, 6}));
  box.pose_world = {Ry(0.7), Vec3(-12, 3, 2)};
  LightSpec l;
  l.lights.push_back({Vec3(0, 0, -1), Rgb::Ones()});

  const std::vector<SceneInstance> scene{needle, box};
  const FrameBuffers ref = render_frame(scene, cam_pose, cam, l);
  const Vec3 shift(16.5, -8.25, 4.0);
  std::vector<SceneInstance> moved = scene;
  for (auto &s : moved) s.pose_world.translation += shift;
  const Pose moved_cam{cam_pose.rotation, cam_pose.translation + shift};
  const FrameBuffers out = render_frame(moved, moved_cam, cam, l);
  EXPECT_EQ(out.instance_id, ref.instance_id);
  EXPECT_EQ(out.depth, ref.depth);
  EXPECT_EQ(out.rgb, ref.rgb);
  int needle_px = 0;
  for (auto id : ref.instance_id) needle_px += id == 1;
  EXPECT_GT(needle_px, 50);
}

TEST(Render, Deterministic) {
  const auto scene = surgsynth::testing::needle_scene(160, 120);
  SceneInstance inst;
  inst.instance_id = 1;
  inst.mesh = scene.mesh("needle").mesh;
  inst.pose_world = {Rx(0.3), Vec3(1, 2, 0)};
  EcmRig rig = scene.ecm;
  LightSpec l;
  l.lights.push_back({Vec3(0, 0, -1), Rgb::Ones()});
  const FrameBuffers a = render_frame(std::span<const SceneInstance>(&inst, 1), ecm_forward_kinematics(rig), scene.camera, l);
  const FrameBuffers b = render_frame(std::span<const SceneInstance>(&inst, 1), ecm_forward_kinematics(rig), scene.camera, l);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_EQ(a.depth, b.depth);
}

TEST(Render, RejectsInstanceWithoutMesh) {
  SceneInstance inst;
  EXPECT_THROW(render_frame(std::span<const SceneInstance>(&inst, 1), Pose::Identity(), unit_camera(), LightSpec{}), Error);
}

TEST(Render, EmptySceneIsBackground) {
  RenderOptions o;
  o.background = {0.2, 0.4, 0.6};
  const FrameBuffers fb = render_frame({}, Pose::Identity(), unit_camera(8, 6), LightSpec{}, o);
  for (std::size_t i = 0; i < fb.depth.size(); ++i) {
    EXPECT_EQ(fb.depth[i], 0.0);
    EXPECT_EQ(fb.instance_id[i], 0);
    EXPECT_EQ(fb.rgb[3 * i], 51);
    EXPECT_EQ(fb.rgb[3 * i + 1], 102);
    EXPECT_EQ(fb.rgb[3 * i + 2], 153);
  }
}

TEST(Render, CenterPixelOfFrontalTriangle) {
  CameraModel cam = unit_camera(64, 48);
  cam.cx = 31.5;
  cam.cy = 23.5;
  const FrameBuffers fb = render_one(triangle_instance({-30, -30}, {40, -20}, {-10, 40}, 5), cam);
  EXPECT_EQ(fb.instance_id[fb.index(32, 24)], 5);
  EXPECT_NEAR(fb.depth[fb.index(32, 24)], 100.0, 0.01);
}

TEST(Render, DepthAndIdAreCoupledAndZBufferIsConsistent) {
  const auto scene = surgsynth::testing::needle_scene(200, 150);
  SceneInstance a;
  a.instance_id = 1;
  a.mesh = scene.mesh("needle").mesh;
  a.pose_world = {Rx(0.2), Vec3(0, 0, 0)};
  SceneInstance b;
  b.instance_id = 2;
  b.mesh = shared_mesh(generate_box_mesh({8, 30, 4}));
  b.pose_world = {Rz(0.3), Vec3(5, 0, -3)};
  const Pose cam = ecm_forward_kinematics(scene.ecm);
  const FrameBuffers alone = render_frame(std::span<const SceneInstance>(&a, 1), cam, scene.camera, {});
  const std::vector<SceneInstance> both{a, b};
  const FrameBuffers joint = render_frame(both, cam, scene.camera, {});
  int a_wins = 0, b_wins = 0;
  for (std::size_t i = 0; i < joint.depth.size(); ++i) {
    EXPECT_EQ(joint.instance_id[i] != 0, joint.depth[i] > 0);
    EXPECT_EQ(alone.instance_id[i] != 0, alone.depth[i] > 0);
    if (joint.instance_id[i] == 1) {
      ++a_wins;
      EXPECT_EQ(joint.depth[i], alone.depth[i]);
    }
    b_wins += joint.instance_id[i] == 2;
  }
  EXPECT_GT(a_wins, 0);
  EXPECT_GT(b_wins, 0);
}

TEST(Shading, ReferenceCases) {
  Material m;
  m.ambient = Rgb::Ones();
  LightSpec none;
  none.ambient = Rgb::Constant(0.1);
  const Rgb c = shade_blinn_phong(m, Vec3(0, 0, -1), Vec3(0, 0, -1), none);
  EXPECT_NEAR((c - Rgb::Constant(0.1)).norm(), 0.0, 1e-15);

  Material d;
  d.ambient = Rgb::Zero();
  d.diffuse = Rgb::Constant(0.5);
  d.specular = Rgb::Zero();
  LightSpec one;
  one.lights.push_back({Vec3(0, 0, -1), Rgb::Ones()});
  EXPECT_EQ(shade_blinn_phong(d, Vec3(0, 0, -1), Vec3(0, 0, -1), one), Rgb::Constant(0.5));

  // Grazing light (N . L = 0) with the viewer on the mirror side: only the
  // specular term remains and N . H = cos 45 degrees.
  Material s;
  s.ambient = s.diffuse = Rgb::Zero();
  s.specular = Rgb::Ones();
  s.shininess = 4;
  LightSpec graze;
  graze.lights.push_back({Vec3(1, 0, 0), Rgb::Ones()});
  const Rgb g = shade_blinn_phong(s, Vec3(0, 0, -1), Vec3(0, 0, -1), graze);
  EXPECT_NEAR(g.x(), std::pow(std::sqrt(0.5), 4), 1e-15);  // 0.25
}
