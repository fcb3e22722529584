#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"
#include "surgsynth/error.hpp"
#include "surgsynth/mesh.hpp"

using namespace surgsynth;
using surgsynth::testing::TempDir;
using surgsynth::testing::write_bytes;

TEST(Obj, LoadsCubeFixture) {
  const TriMesh m = load_mesh(std::filesystem::path(SURGSYNTH_FIXTURE_DIR) / "cube.obj");
  EXPECT_EQ(m.vertices.size(), 8u);
  EXPECT_EQ(m.triangles.size(), 12u);  // quads fan-triangulated
  EXPECT_EQ(m.vertex_normals.size(), 8u);
  EXPECT_NEAR(mesh_diameter(m), std::sqrt(3.0) * 10.0, 1e-12);
}

TEST(Obj, NegativeIndicesAndNormals) {
  TempDir dir;
  write_bytes(dir / "t.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3//-1 -2//-1 -1//-1\n");
  const TriMesh m = load_mesh(dir / "t.obj");
  ASSERT_EQ(m.triangles.size(), 1u);
  EXPECT_EQ(m.triangles[0][0], 0u);
  EXPECT_EQ(m.vertex_normals[2], Vec3(0, 0, 1));
}

TEST(Obj, MalformedFaceNamesLine) {
  TempDir dir;
  write_bytes(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nf 1 2 9\n");
  try {
    load_mesh(dir / "bad.obj");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kParseError);
    EXPECT_NE(std::string(e.what()).find("bad.obj:3:"), std::string::npos) << e.what();
  }
}

TEST(Obj, EmptyMesh) {
  TempDir dir;
  write_bytes(dir / "empty.obj", "# nothing\n");
  try {
    load_mesh(dir / "empty.obj");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kEmptyMesh);
  }
}

TEST(Ply, SaveLoadRoundTripIsExact) {
  TempDir dir;
  const TriMesh m = generate_needle_mesh(9.325, 0.2, kPi, 32);
  save_ply(m, dir / "n.ply");
  const TriMesh back = load_mesh(dir / "n.ply");
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.triangles, m.triangles);
  save_obj(m, dir / "n.obj");
  EXPECT_EQ(load_mesh(dir / "n.obj").vertices, m.vertices);
}

TEST(Normals, AreaWeightedAndUnit) {
  const TriMesh box = generate_box_mesh({2, 4, 6});
  for (std::size_t i = 0; i < box.vertices.size(); ++i) {
    EXPECT_NEAR(box.vertex_normals[i].norm(), 1.0, 1e-12);
    // Corner normals point outward.
    EXPECT_GT(box.vertex_normals[i].dot(box.vertices[i]), 0.0);
  }
  TriMesh flat;
  flat.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}};
  flat.triangles = {{0, 1, 2}};
  const auto n = compute_vertex_normals(flat);
  EXPECT_EQ(n[0], Vec3(0, 0, 1));
  EXPECT_EQ(n[3], Vec3(0, 0, 1));  // isolated vertex
}

TEST(Needle, DiameterWithinPhysicalBounds) {
  const TriMesh m = generate_needle_mesh(9.325, 0.2, kPi, 64);
  const double d = mesh_diameter(m);
  EXPECT_GE(d, 18.65);
  EXPECT_LE(d, 19.05);
}

TEST(Needle, MirrorAndHalfTurnSymmetric) {
  const TriMesh m = generate_needle_mesh(9.325, 0.2, kPi, 48);
  auto contains = [&m](const Vec3 &p) {
    return std::any_of(m.vertices.begin(), m.vertices.end(), [&p](const Vec3 &v) { return (v - p).norm() < 1e-9; });
  };
  for (const Vec3 &v : m.vertices) {
    EXPECT_TRUE(contains({v.x(), -v.y(), v.z()}));
    EXPECT_TRUE(contains(Rx(kPi) * v));
  }
}

TEST(Needle, OutwardWinding) {
  // Closed tube: the signed volume of an outward-wound mesh is positive.
  const TriMesh m = generate_needle_mesh(9.325, 0.5, kPi, 64);
  double vol = 0.0;
  for (const auto &t : m.triangles)
    vol += m.vertices[t[0]].dot(m.vertices[t[1]].cross(m.vertices[t[2]])) / 6.0;
  const double expected = kPi * 0.5 * 0.5 * 9.325 * kPi;  // tube area x arc length
  EXPECT_GT(vol, 0.0);
  EXPECT_NEAR(vol, expected, 0.05 * expected);
}

TEST(Needle, RejectsBadParameters) {
  EXPECT_THROW(generate_needle_mesh(-1, 0.2, kPi, 64), Error);
  EXPECT_THROW(generate_needle_mesh(9, 0.2, 0.0, 64), Error);
  EXPECT_THROW(generate_needle_mesh(9, 10.0, kPi, 64), Error);
  EXPECT_THROW(generate_needle_mesh(9, 0.2, kPi, 1), Error);
}

TEST(Grid, FlatAndSized) {
  const TriMesh g = generate_grid_mesh(20, 10, 4, 2);
  EXPECT_EQ(g.vertices.size(), 15u);
  EXPECT_EQ(g.triangles.size(), 16u);
  for (const auto &v : g.vertices) EXPECT_EQ(v.z(), 0.0);
  EXPECT_NEAR(mesh_diameter(g), std::hypot(20.0, 10.0), 1e-12);
}
