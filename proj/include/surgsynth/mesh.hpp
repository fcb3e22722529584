#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "surgsynth/geometry.hpp"

namespace surgsynth {

// Triangle mesh in millimeters. Every vertex carries a unit normal.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> vertex_normals;

  // Throws EmptyMesh / ParseError when an invariant is violated.
  void validate() const;
};

// Area-weighted average of incident face normals. Vertices without incident
// area get +z.
std::vector<Vec3> compute_vertex_normals(const TriMesh &mesh);

// ASCII OBJ (v / vn / f, polygons fan-triangulated) or ASCII PLY, chosen by
// extension.
TriMesh load_mesh(const std::filesystem::path &path);

void save_obj(const TriMesh &mesh, const std::filesystem::path &path);
void save_ply(const TriMesh &mesh, const std::filesystem::path &path);

// Circular-arc tube in the xy plane with the arc centered at the origin. The
// arc is bisected by the +x axis, so the mesh is mirror-symmetric about y = 0
// and invariant under a 180 degree rotation about x. Ends are closed with
// triangle fans.
TriMesh generate_needle_mesh(double arc_radius, double tube_radius,
                             double arc_angle, int segments);

// Flat rectangle in the z = 0 plane, centered at the origin, normal +z.
TriMesh generate_grid_mesh(double size_x, double size_y, int divisions_x, int divisions_y);

// Axis-aligned box centered at the origin.
TriMesh generate_box_mesh(const Vec3 &size);

// Exact maximum pairwise vertex distance.
double mesh_diameter(const TriMesh &mesh);

}  // namespace surgsynth
