#include "surgsynth/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "surgsynth/error.hpp"

namespace surgsynth {
namespace {

constexpr int kSubpixelBits = 8;
constexpr std::int64_t kSubpixel = 1 << kSubpixelBits;

struct ClipVertex {
  Vec3 pos;     // camera frame
  Vec3 normal;  // camera frame, not normalized after clipping
};

// Half-space a . p >= 0 in camera coordinates (planes through the origin or
// offset by the near clip).
struct ClipPlane {
  Vec3 a;
  double d;
  double eval(const Vec3 &p) const { return a.dot(p) + d; }
};

using Polygon = std::vector<ClipVertex>;

void clip_polygon(const Polygon &in, const ClipPlane &plane, Polygon &out) {
  out.clear();
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ClipVertex &cur = in[i];
    const ClipVertex &nxt = in[(i + 1) % n];
    const double dc = plane.eval(cur.pos);
    const double dn = plane.eval(nxt.pos);
    if (dc >= 0.0) out.push_back(cur);
    if ((dc >= 0.0) != (dn >= 0.0)) {
      const double s = dc / (dc - dn);
      out.push_back({cur.pos + s * (nxt.pos - cur.pos), cur.normal + s * (nxt.normal - cur.normal)});
    }
  }
}

struct ScreenVertex {
  std::int64_t x, y;  // fixed point, 1/256 px
  double inv_z;
  Vec3 normal;
};

// Edge owns pixels lying exactly on it when it is a top or left edge of a
// positively oriented triangle (y down).
bool is_top_left(std::int64_t dx, std::int64_t dy) { return dy < 0 || (dy == 0 && dx > 0); }

struct Fragment {
  std::int32_t material = -1;
  Vec3 normal = Vec3::Zero();
};

class Rasterizer {
 public:
  Rasterizer(const CameraModel &cam, FrameBuffers &fb, std::vector<Fragment> *fragments)
      : cam_(cam), fb_(fb), fragments_(fragments) {
    const double guard = 2.0 * (cam.width + cam.height);
    const double umin = -guard, umax = cam.width + guard;
    const double vmin = -guard, vmax = cam.height + guard;
    planes_ = {{
        {Vec3(0, 0, 1), -cam.near_clip},
        {Vec3(cam.fx, 0, cam.cx - umin), 0.0},
        {Vec3(-cam.fx, 0, umax - cam.cx), 0.0},
        {Vec3(0, cam.fy, cam.cy - vmin), 0.0},
        {Vec3(0, -cam.fy, vmax - cam.cy), 0.0},
    }};
    zbuf_.assign(fb.depth.size(), std::numeric_limits<double>::infinity());
  }

  void draw_triangle(const ClipVertex &a, const ClipVertex &b, const ClipVertex &c,
                     std::int32_t instance_id, std::int32_t material) {
    bool inside = true;
    for (const auto &p : planes_) {
      if (p.eval(a.pos) < 0.0 || p.eval(b.pos) < 0.0 || p.eval(c.pos) < 0.0) {
        inside = false;
        break;
      }
    }
    if (inside) {
      raster(a, b, c, instance_id, material);
      return;
    }
    poly_a_ = {a, b, c};
    for (const auto &p : planes_) {
      clip_polygon(poly_a_, p, poly_b_);
      std::swap(poly_a_, poly_b_);
      if (poly_a_.size() < 3) return;
    }
    for (std::size_t k = 1; k + 1 < poly_a_.size(); ++k)
      raster(poly_a_[0], poly_a_[k], poly_a_[k + 1], instance_id, material);
  }

  void finish() {
    for (std::size_t i = 0; i < zbuf_.size(); ++i)
      fb_.depth[i] = std::isinf(zbuf_[i]) ? 0.0 : zbuf_[i];
  }

 private:
  ScreenVertex to_screen(const ClipVertex &v) const {
    const double u = cam_.fx * v.pos.x() / v.pos.z() + cam_.cx;
    const double w = cam_.fy * v.pos.y() / v.pos.z() + cam_.cy;
    return {std::llround(u * kSubpixel), std::llround(w * kSubpixel), 1.0 / v.pos.z(), v.normal};
  }

  void raster(const ClipVertex &ca, const ClipVertex &cb, const ClipVertex &cc,
              std::int32_t instance_id, std::int32_t material) {
    ScreenVertex v0 = to_screen(ca), v1 = to_screen(cb), v2 = to_screen(cc);
    std::int64_t area = (v1.x - v0.x) * (v2.y - v0.y) - (v1.y - v0.y) * (v2.x - v0.x);
    if (area == 0) return;
    if (area < 0) {
      std::swap(v1, v2);
      area = -area;
    }

    const std::int64_t min_x = std::min({v0.x, v1.x, v2.x});
    const std::int64_t max_x = std::max({v0.x, v1.x, v2.x});
    const std::int64_t min_y = std::min({v0.y, v1.y, v2.y});
    const std::int64_t max_y = std::max({v0.y, v1.y, v2.y});
    // Pixel i is centered at i * kSubpixel.
    auto ceil_div = [](std::int64_t a) {
      return a >= 0 ? (a + kSubpixel - 1) / kSubpixel : -((-a) / kSubpixel);
    };
    auto floor_div = [](std::int64_t a) {
      return a >= 0 ? a / kSubpixel : -((-a + kSubpixel - 1) / kSubpixel);
    };
    const std::int64_t px0 = std::max<std::int64_t>(0, ceil_div(min_x));
    const std::int64_t px1 = std::min<std::int64_t>(fb_.width - 1, floor_div(max_x));
    const std::int64_t py0 = std::max<std::int64_t>(0, ceil_div(min_y));
    const std::int64_t py1 = std::min<std::int64_t>(fb_.height - 1, floor_div(max_y));
    if (px0 > px1 || py0 > py1) return;

    // Edge k is opposite vertex k: w_k(p) = E(v_{k+1}, v_{k+2}, p).
    const ScreenVertex *v[3] = {&v0, &v1, &v2};
    std::int64_t step_x[3], step_y[3], row_start[3], bias[3];
    const std::int64_t sx = px0 * kSubpixel, sy = py0 * kSubpixel;
    for (int k = 0; k < 3; ++k) {
      const ScreenVertex &a = *v[(k + 1) % 3];
      const ScreenVertex &b = *v[(k + 2) % 3];
      const std::int64_t dx = b.x - a.x, dy = b.y - a.y;
      // E(p) = dx * (py - ay) - dy * (px - ax)
      step_x[k] = -dy * kSubpixel;
      step_y[k] = dx * kSubpixel;
      row_start[k] = dx * (sy - a.y) - dy * (sx - a.x);
      bias[k] = is_top_left(dx, dy) ? 0 : -1;
    }

    const double inv_area = 1.0 / static_cast<double>(area);
    for (std::int64_t py = py0; py <= py1; ++py) {
      std::int64_t w[3] = {row_start[0], row_start[1], row_start[2]};
      for (std::int64_t px = px0; px <= px1; ++px) {
        if (w[0] + bias[0] >= 0 && w[1] + bias[1] >= 0 && w[2] + bias[2] >= 0) {
          const double l0 = static_cast<double>(w[0]) * inv_area;
          const double l1 = static_cast<double>(w[1]) * inv_area;
          const double l2 = static_cast<double>(w[2]) * inv_area;
          const double p0 = l0 * v0.inv_z, p1 = l1 * v1.inv_z, p2 = l2 * v2.inv_z;
          const double inv_z = p0 + p1 + p2;
          const double z = 1.0 / inv_z;
          const std::size_t idx = fb_.index(static_cast<int>(px), static_cast<int>(py));
          if (z < zbuf_[idx]) {
            zbuf_[idx] = z;
            fb_.instance_id[idx] = instance_id;
            if (fragments_) {
              Fragment &f = (*fragments_)[idx];
              f.material = material;
              f.normal = (p0 * v0.normal + p1 * v1.normal + p2 * v2.normal) * z;
            }
          }
        }
        for (int k = 0; k < 3; ++k) w[k] += step_x[k];
      }
      for (int k = 0; k < 3; ++k) row_start[k] += step_y[k];
    }
  }

  const CameraModel &cam_;
  FrameBuffers &fb_;
  std::vector<Fragment> *fragments_;
  std::array<ClipPlane, 5> planes_;
  std::vector<double> zbuf_;
  Polygon poly_a_, poly_b_;
};

std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

}  // namespace

FrameBuffers::FrameBuffers(int w, int h)
    : width(w),
      height(h),
      rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0),
      depth(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0),
      instance_id(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

Rgb shade_blinn_phong(const Material &mat, const Vec3 &normal, const Vec3 &view_dir,
                      const LightSpec &lights) {
  Rgb color = lights.ambient.cwiseProduct(mat.ambient);
  for (const auto &light : lights.lights) {
    const Vec3 &l = light.direction;
    const Vec3 h = (l + view_dir).normalized();
    const double diffuse = std::max(normal.dot(l), 0.0);
    const double specular = std::pow(std::max(normal.dot(h), 0.0), mat.shininess);
    color += (mat.diffuse * diffuse + mat.specular * specular).cwiseProduct(light.intensity);
  }
  return color.cwiseMax(0.0).cwiseMin(1.0);
}

FrameBuffers render_frame(std::span<const SceneInstance> scene, const Pose &cam_pose,
                          const CameraModel &cam, const LightSpec &lights,
                          const RenderOptions &options) {
  cam.validate();
  FrameBuffers fb(cam.width, cam.height);
  std::vector<Fragment> fragments;
  if (options.shade) fragments.resize(fb.depth.size());

  Rasterizer raster(cam, fb, options.shade ? &fragments : nullptr);
  const Pose world_to_cam = invert(cam_pose);
  std::vector<ClipVertex> verts;
  for (std::size_t s = 0; s < scene.size(); ++s) {
    const SceneInstance &inst = scene[s];
    if (!inst.mesh) throw Error(Errc::kInvalidParam, "scene instance without mesh");
    const TriMesh &mesh = *inst.mesh;
    // One composed transform per instance, so a pose given directly in the
    // camera frame reproduces the same vertices bit for bit.
    const Pose model_to_cam = compose(world_to_cam, inst.pose_world);
    verts.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      verts[i].pos = model_to_cam * mesh.vertices[i];
      verts[i].normal = model_to_cam.rotation * mesh.vertex_normals[i];
    }
    for (const auto &tri : mesh.triangles)
      raster.draw_triangle(verts[tri[0]], verts[tri[1]], verts[tri[2]], inst.instance_id,
                           static_cast<std::int32_t>(s));
  }
  raster.finish();

  const std::array<std::uint8_t, 3> bg{to_byte(options.background.x()), to_byte(options.background.y()),
                                       to_byte(options.background.z())};
  for (int y = 0; y < fb.height; ++y) {
    for (int x = 0; x < fb.width; ++x) {
      const std::size_t idx = fb.index(x, y);
      std::uint8_t *px = &fb.rgb[idx * 3];
      if (!options.shade || fb.instance_id[idx] == 0) {
        px[0] = bg[0];
        px[1] = bg[1];
        px[2] = bg[2];
        continue;
      }
      const Fragment &f = fragments[idx];
      const double z = fb.depth[idx];
      const Vec3 p(z * (x - cam.cx) / cam.fx, z * (y - cam.cy) / cam.fy, z);
      const Vec3 view = (-p).normalized();
      Vec3 n = f.normal.norm() > 0.0 ? Vec3(f.normal.normalized()) : Vec3(view);
      if (n.dot(view) < 0.0) n = -n;
      const Rgb c = shade_blinn_phong(scene[static_cast<std::size_t>(f.material)].material, n, view, lights);
      px[0] = to_byte(c.x());
      px[1] = to_byte(c.y());
      px[2] = to_byte(c.z());
    }
  }
  return fb;
}

}  // namespace surgsynth
