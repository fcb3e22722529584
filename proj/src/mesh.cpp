#include "surgsynth/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "surgsynth/error.hpp"

namespace surgsynth {
namespace {

std::string lower_extension(const std::filesystem::path &path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

[[noreturn]] void parse_fail(const std::filesystem::path &path, std::size_t line,
                             const std::string &msg) {
  throw Error(Errc::kParseError,
              path.string() + ":" + std::to_string(line) + ": " + msg);
}

// Resolves a 1-based (or negative, relative) OBJ index.
long resolve_obj_index(long idx, std::size_t count) {
  if (idx > 0) return idx - 1;
  if (idx < 0) return static_cast<long>(count) + idx;
  return -1;
}

TriMesh load_obj(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());

  TriMesh mesh;
  std::vector<Vec3> file_normals;
  // Per triangle corner: normal index or -1.
  std::vector<std::array<long, 3>> corner_normals;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) parse_fail(path, line_no, "bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "vn") {
      Vec3 n;
      if (!(ls >> n.x() >> n.y() >> n.z())) parse_fail(path, line_no, "bad normal");
      file_normals.push_back(n);
    } else if (tag == "f") {
      std::vector<long> vids;
      std::vector<long> nids;
      std::string corner;
      while (ls >> corner) {
        long vi = 0, ni = 0;
        const auto slash1 = corner.find('/');
        try {
          vi = std::stol(corner.substr(0, slash1));
          if (slash1 != std::string::npos) {
            const auto slash2 = corner.find('/', slash1 + 1);
            if (slash2 != std::string::npos && slash2 + 1 < corner.size())
              ni = std::stol(corner.substr(slash2 + 1));
          }
        } catch (const std::exception &) {
          parse_fail(path, line_no, "bad face corner '" + corner + "'");
        }
        const long v = resolve_obj_index(vi, mesh.vertices.size());
        if (v < 0 || v >= static_cast<long>(mesh.vertices.size()))
          parse_fail(path, line_no, "vertex index " + std::to_string(vi) + " out of range");
        long n = -1;
        if (ni != 0) {
          n = resolve_obj_index(ni, file_normals.size());
          if (n < 0 || n >= static_cast<long>(file_normals.size()))
            parse_fail(path, line_no, "normal index " + std::to_string(ni) + " out of range");
        }
        vids.push_back(v);
        nids.push_back(n);
      }
      if (vids.size() < 3) parse_fail(path, line_no, "face with fewer than 3 corners");
      for (std::size_t k = 1; k + 1 < vids.size(); ++k) {
        mesh.triangles.push_back({static_cast<std::uint32_t>(vids[0]),
                                  static_cast<std::uint32_t>(vids[k]),
                                  static_cast<std::uint32_t>(vids[k + 1])});
        corner_normals.push_back({nids[0], nids[k], nids[k + 1]});
      }
    }
    // vt, o, g, s, usemtl, mtllib: ignored.
  }

  if (mesh.triangles.empty()) throw Error(Errc::kEmptyMesh, path.string() + " has no triangles");

  // File normals are used only when every vertex is referenced with one.
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  std::vector<bool> has(mesh.vertices.size(), false);
  bool complete = !file_normals.empty();
  for (std::size_t t = 0; t < mesh.triangles.size() && complete; ++t) {
    for (int c = 0; c < 3; ++c) {
      const long n = corner_normals[t][c];
      if (n < 0) {
        complete = false;
        break;
      }
      acc[mesh.triangles[t][c]] += file_normals[n].normalized();
      has[mesh.triangles[t][c]] = true;
    }
  }
  if (complete) {
    const auto computed = compute_vertex_normals(mesh);
    mesh.vertex_normals.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
      mesh.vertex_normals[i] =
          (has[i] && acc[i].norm() > 1e-12) ? Vec3(acc[i].normalized()) : computed[i];
    }
  } else {
    mesh.vertex_normals = compute_vertex_normals(mesh);
  }
  return mesh;
}

TriMesh load_ply(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;  // list properties stored as "list"
  };
  std::vector<Element> elements;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    parse_fail(path, 1, "missing ply magic");
  ++line_no;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") parse_fail(path, line_no, "only ASCII PLY is supported");
    } else if (tag == "element") {
      Element e;
      if (!(ls >> e.name >> e.count)) parse_fail(path, line_no, "bad element line");
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) parse_fail(path, line_no, "property before element");
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type, name;
        ls >> count_type >> item_type >> name;
        elements.back().properties.push_back("list:" + name);
      } else {
        std::string name;
        ls >> name;
        elements.back().properties.push_back(name);
      }
    } else if (tag == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) parse_fail(path, line_no, "missing end_header");

  TriMesh mesh;
  std::vector<Vec3> normals;
  bool file_has_normals = false;
  for (const Element &e : elements) {
    auto prop_index = [&](const std::string &n) -> int {
      auto it = std::find(e.properties.begin(), e.properties.end(), n);
      return it == e.properties.end() ? -1 : static_cast<int>(it - e.properties.begin());
    };
    if (e.name == "vertex") {
      const int ix = prop_index("x"), iy = prop_index("y"), iz = prop_index("z");
      const int inx = prop_index("nx"), iny = prop_index("ny"), inz = prop_index("nz");
      if (ix < 0 || iy < 0 || iz < 0) parse_fail(path, line_no, "vertex lacks x/y/z");
      file_has_normals = inx >= 0 && iny >= 0 && inz >= 0;
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!std::getline(in, line)) parse_fail(path, line_no, "truncated vertex list");
        ++line_no;
        std::istringstream ls(line);
        std::vector<double> vals;
        double d;
        while (ls >> d) vals.push_back(d);
        if (vals.size() < e.properties.size()) parse_fail(path, line_no, "short vertex row");
        mesh.vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
        if (file_has_normals) normals.emplace_back(vals[inx], vals[iny], vals[inz]);
      }
    } else if (e.name == "face") {
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!std::getline(in, line)) parse_fail(path, line_no, "truncated face list");
        ++line_no;
        std::istringstream ls(line);
        long n = 0;
        if (!(ls >> n) || n < 3) parse_fail(path, line_no, "bad face row");
        std::vector<long> ids(static_cast<std::size_t>(n));
        for (long k = 0; k < n; ++k) {
          if (!(ls >> ids[k])) parse_fail(path, line_no, "short face row");
          if (ids[k] < 0 || ids[k] >= static_cast<long>(mesh.vertices.size()))
            parse_fail(path, line_no, "vertex index " + std::to_string(ids[k]) + " out of range");
        }
        for (long k = 1; k + 1 < n; ++k)
          mesh.triangles.push_back({static_cast<std::uint32_t>(ids[0]),
                                    static_cast<std::uint32_t>(ids[k]),
                                    static_cast<std::uint32_t>(ids[k + 1])});
      }
    } else {
      for (std::size_t i = 0; i < e.count; ++i) {
        if (!std::getline(in, line)) parse_fail(path, line_no, "truncated element " + e.name);
        ++line_no;
      }
    }
  }
  if (mesh.triangles.empty()) throw Error(Errc::kEmptyMesh, path.string() + " has no triangles");

  mesh.vertex_normals = compute_vertex_normals(mesh);
  if (file_has_normals) {
    for (std::size_t i = 0; i < normals.size(); ++i)
      if (normals[i].norm() > 1e-12) mesh.vertex_normals[i] = normals[i].normalized();
  }
  return mesh;
}

}  // namespace

void TriMesh::validate() const {
  if (triangles.empty()) throw Error(Errc::kEmptyMesh, "mesh has no triangles");
  for (const auto &tri : triangles)
    for (auto idx : tri)
      if (idx >= vertices.size()) throw Error(Errc::kParseError, "triangle index out of range");
  if (vertex_normals.size() != vertices.size())
    throw Error(Errc::kParseError, "normal count differs from vertex count");
  for (const auto &n : vertex_normals)
    if (std::abs(n.norm() - 1.0) > 1e-6) throw Error(Errc::kParseError, "non-unit vertex normal");
}

std::vector<Vec3> compute_vertex_normals(const TriMesh &mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (const auto &tri : mesh.triangles) {
    const Vec3 &a = mesh.vertices[tri[0]];
    const Vec3 &b = mesh.vertices[tri[1]];
    const Vec3 &c = mesh.vertices[tri[2]];
    // Cross product length is twice the area, so this is area weighting.
    const Vec3 n = (b - a).cross(c - a);
    for (auto idx : tri) acc[idx] += n;
  }
  for (auto &n : acc) {
    const double len = n.norm();
    n = len > 1e-300 ? Vec3(n / len) : Vec3::UnitZ();
  }
  return acc;
}

TriMesh load_mesh(const std::filesystem::path &path) {
  if (!std::filesystem::exists(path)) throw Error(Errc::kIoError, "no such mesh file " + path.string());
  const std::string ext = lower_extension(path);
  TriMesh mesh;
  if (ext == ".obj") {
    mesh = load_obj(path);
  } else if (ext == ".ply") {
    mesh = load_ply(path);
  } else {
    throw Error(Errc::kParseError, "unsupported mesh extension '" + ext + "'");
  }
  mesh.validate();
  return mesh;
}

void save_obj(const TriMesh &mesh, const std::filesystem::path &path) {
  std::FILE *f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error(Errc::kIoError, "cannot write " + path.string());
  for (const auto &v : mesh.vertices) std::fprintf(f, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
  for (const auto &n : mesh.vertex_normals) std::fprintf(f, "vn %.17g %.17g %.17g\n", n.x(), n.y(), n.z());
  const bool normals = mesh.vertex_normals.size() == mesh.vertices.size();
  for (const auto &t : mesh.triangles) {
    if (normals)
      std::fprintf(f, "f %u//%u %u//%u %u//%u\n", t[0] + 1, t[0] + 1, t[1] + 1, t[1] + 1,
                   t[2] + 1, t[2] + 1);
    else
      std::fprintf(f, "f %u %u %u\n", t[0] + 1, t[1] + 1, t[2] + 1);
  }
  if (std::fclose(f) != 0) throw Error(Errc::kIoError, "cannot write " + path.string());
}

void save_ply(const TriMesh &mesh, const std::filesystem::path &path) {
  std::FILE *f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error(Errc::kIoError, "cannot write " + path.string());
  const bool normals = mesh.vertex_normals.size() == mesh.vertices.size();
  std::fprintf(f, "ply\nformat ascii 1.0\nelement vertex %zu\n", mesh.vertices.size());
  std::fprintf(f, "property double x\nproperty double y\nproperty double z\n");
  if (normals) std::fprintf(f, "property double nx\nproperty double ny\nproperty double nz\n");
  std::fprintf(f, "element face %zu\nproperty list uchar int vertex_indices\nend_header\n",
               mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 &v = mesh.vertices[i];
    std::fprintf(f, "%.17g %.17g %.17g", v.x(), v.y(), v.z());
    if (normals) {
      const Vec3 &n = mesh.vertex_normals[i];
      std::fprintf(f, " %.17g %.17g %.17g", n.x(), n.y(), n.z());
    }
    std::fputc('\n', f);
  }
  for (const auto &t : mesh.triangles) std::fprintf(f, "3 %u %u %u\n", t[0], t[1], t[2]);
  if (std::fclose(f) != 0) throw Error(Errc::kIoError, "cannot write " + path.string());
}

TriMesh generate_needle_mesh(double arc_radius, double tube_radius, double arc_angle,
                             int segments) {
  if (!(arc_radius > 0.0) || !(tube_radius > 0.0))
    throw Error(Errc::kInvalidParam, "needle radii must be positive");
  if (!(tube_radius < arc_radius)) throw Error(Errc::kInvalidParam, "tube radius must be below the arc radius");
  if (!(arc_angle > 0.0 && arc_angle < 2.0 * kPi))
    throw Error(Errc::kInvalidParam, "arc angle must lie in (0, 2*pi)");
  if (segments < 8) throw Error(Errc::kInvalidParam, "needle needs at least 8 segments");

  const int ring = std::clamp(segments / 2, 8, 32);
  TriMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>((segments + 1) * ring + 2));

  // Ring angles sit at half steps so the set is closed under negation, which
  // keeps the 180 degree symmetry about x.
  for (int i = 0; i <= segments; ++i) {
    const double phi = -0.5 * arc_angle + arc_angle * static_cast<double>(i) / segments;
    const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
    const Vec3 center = arc_radius * radial;
    for (int j = 0; j < ring; ++j) {
      const double psi = 2.0 * kPi * (static_cast<double>(j) + 0.5) / ring;
      mesh.vertices.push_back(center + tube_radius * (std::cos(psi) * radial +
                                                      std::sin(psi) * Vec3::UnitZ()));
    }
  }
  auto vid = [ring](int i, int j) {
    return static_cast<std::uint32_t>(i * ring + ((j % ring) + ring) % ring);
  };
  for (int i = 0; i < segments; ++i) {
    for (int j = 0; j < ring; ++j) {
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  // End caps.
  for (int end = 0; end < 2; ++end) {
    const int i = end == 0 ? 0 : segments;
    const double phi = -0.5 * arc_angle + arc_angle * static_cast<double>(i) / segments;
    const auto c = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(arc_radius * Vec3(std::cos(phi), std::sin(phi), 0.0));
    for (int j = 0; j < ring; ++j) {
      if (end == 0)
        mesh.triangles.push_back({c, vid(i, j), vid(i, j + 1)});
      else
        mesh.triangles.push_back({c, vid(i, j + 1), vid(i, j)});
    }
  }
  mesh.vertex_normals = compute_vertex_normals(mesh);
  return mesh;
}

TriMesh generate_grid_mesh(double size_x, double size_y, int divisions_x, int divisions_y) {
  if (!(size_x > 0.0) || !(size_y > 0.0) || divisions_x < 1 || divisions_y < 1)
    throw Error(Errc::kInvalidParam, "grid needs positive size and divisions");
  TriMesh mesh;
  for (int j = 0; j <= divisions_y; ++j)
    for (int i = 0; i <= divisions_x; ++i)
      mesh.vertices.emplace_back(size_x * (static_cast<double>(i) / divisions_x - 0.5),
                                 size_y * (static_cast<double>(j) / divisions_y - 0.5), 0.0);
  const auto stride = static_cast<std::uint32_t>(divisions_x + 1);
  for (int j = 0; j < divisions_y; ++j) {
    for (int i = 0; i < divisions_x; ++i) {
      const auto a = static_cast<std::uint32_t>(j) * stride + static_cast<std::uint32_t>(i);
      mesh.triangles.push_back({a, a + 1, a + stride + 1});
      mesh.triangles.push_back({a, a + stride + 1, a + stride});
    }
  }
  mesh.vertex_normals = compute_vertex_normals(mesh);
  return mesh;
}

TriMesh generate_box_mesh(const Vec3 &size) {
  if (!(size.minCoeff() > 0.0)) throw Error(Errc::kInvalidParam, "box size must be positive");
  TriMesh mesh;
  const Vec3 h = 0.5 * size;
  // Four vertices per face so each face keeps a flat normal.
  const std::array<std::pair<int, double>, 6> faces{
      {{0, 1.0}, {0, -1.0}, {1, 1.0}, {1, -1.0}, {2, 1.0}, {2, -1.0}}};
  for (const auto &[axis, sign] : faces) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    const std::array<std::pair<double, double>, 4> corners{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
    for (const auto &[cu, cv] : corners) {
      Vec3 p;
      p[axis] = sign * h[axis];
      p[u] = cu * h[u];
      p[v] = cv * h[v];
      mesh.vertices.push_back(p);
      Vec3 n = Vec3::Zero();
      n[axis] = sign;
      mesh.vertex_normals.push_back(n);
    }
    if (sign > 0) {
      mesh.triangles.push_back({base, base + 1, base + 2});
      mesh.triangles.push_back({base, base + 2, base + 3});
    } else {
      mesh.triangles.push_back({base, base + 2, base + 1});
      mesh.triangles.push_back({base, base + 3, base + 2});
    }
  }
  return mesh;
}

double mesh_diameter(const TriMesh &mesh) {
  double best = 0.0;
  const auto &v = mesh.vertices;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) best = std::max(best, (v[i] - v[j]).squaredNorm());
  return std::sqrt(best);
}

}  // namespace surgsynth
