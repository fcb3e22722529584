#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "surgsynth/geometry.hpp"
#include "surgsynth/scene.hpp"

namespace surgsynth {

// Row-major image buffers. depth is camera-frame z in mm (0 where nothing was
// hit); instance_id is 0 for background.
struct FrameBuffers {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;          // width * height * 3
  std::vector<double> depth;              // width * height
  std::vector<std::int32_t> instance_id;  // width * height

  FrameBuffers() = default;
  FrameBuffers(int w, int h);

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
};

struct RenderOptions {
  Rgb background{0.0, 0.0, 0.0};
  // Skip shading (rgb stays background); depth and ids are unaffected.
  bool shade = true;
};

// Blinn-Phong with ambient, Lambertian diffuse and half-vector specular terms,
// each light scaled by its intensity; result clamped to [0, 1] per channel.
Rgb shade_blinn_phong(const Material &mat, const Vec3 &normal, const Vec3 &view_dir,
                      const LightSpec &lights);

// Z-buffered rasterization of every instance. Pixel centers sit at integer
// (u, v). Vertices are snapped to 1/256 px and coverage follows the top-left
// fill rule. Triangles crossing the near plane are clipped in camera space.
// On exactly equal depth the earlier triangle (instance order, then triangle
// order) keeps the pixel. Back faces are rendered with flipped normals.
FrameBuffers render_frame(std::span<const SceneInstance> scene, const Pose &cam_pose,
                          const CameraModel &cam, const LightSpec &lights,
                          const RenderOptions &options = {});

}  // namespace surgsynth
