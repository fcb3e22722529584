#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "surgsynth/geometry.hpp"
#include "surgsynth/image_io.hpp"
#include "surgsynth/mesh.hpp"
#include "surgsynth/render.hpp"

namespace surgsynth {

// Pixel box; all fields -1 when the mask is empty.
struct BBox {
  int x = -1;
  int y = -1;
  int w = -1;
  int h = -1;

  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(const BBox &other) const;
  bool operator==(const BBox &) const = default;
};

// Tight box of the nonzero pixels: x, y = min covered column/row,
// w, h = covered extent in pixels.
BBox mask_bbox(int width, int height, const std::vector<std::uint8_t> &mask);

struct GtInfo {
  int obj_id = 0;
  Pose pose_cam;  // model to camera
  BBox bbox_obj;
  BBox bbox_visib;
  std::int64_t px_count_all = 0;
  std::int64_t px_count_visib = 0;
  double visib_fract = 0.0;
};

struct CameraRecord {
  std::array<double, 9> cam_K{};
  double depth_scale = 0.1;
};

struct GtRecord {
  Pose pose;  // cam_R_m2c, cam_t_m2c
  int obj_id = 0;
};

struct GtInfoRecord {
  BBox bbox_obj;
  BBox bbox_visib;
  std::int64_t px_count_all = 0;
  std::int64_t px_count_visib = 0;
  double visib_fract = 0.0;
};

struct BopSceneRecord {
  std::map<int, CameraRecord> camera;
  std::map<int, std::vector<GtRecord>> gt;
  std::map<int, std::vector<GtInfoRecord>> gt_info;
};

// One annotated object of a frame; masks hold 0/1 per pixel.
struct ObjectAnnotation {
  GtInfo info;
  std::vector<std::uint8_t> mask;
  std::vector<std::uint8_t> mask_visib;
};

struct AnnotatedFrame {
  int im_id = 0;
  CameraModel camera;
  const FrameBuffers *buffers = nullptr;
  std::vector<ObjectAnnotation> objects;
};

// Writes per-frame images immediately and the three JSON indices on
// finalize(). JSON keys are ascending integers, reals use 17 significant
// digits.
class BopSceneWriter {
 public:
  BopSceneWriter(std::filesystem::path dir, double depth_scale);

  // Throws DepthOverflow when a depth does not fit the 16-bit PNG.
  void add_frame(const AnnotatedFrame &frame);
  void finalize();

  const BopSceneRecord &record() const { return record_; }

 private:
  std::filesystem::path dir_;
  double depth_scale_;
  BopSceneRecord record_;
};

std::vector<std::uint16_t> quantize_depth(const std::vector<double> &depth_mm, double depth_scale);

void write_scene(const std::filesystem::path &dir, double depth_scale,
                 const std::vector<AnnotatedFrame> &frames);

// BOP JSON text for each index file.
std::string scene_camera_json(const BopSceneRecord &rec);
std::string scene_gt_json(const BopSceneRecord &rec);
std::string scene_gt_info_json(const BopSceneRecord &rec);

class BopScene {
 public:
  const BopSceneRecord &record() const { return record_; }
  const std::vector<std::string> &warnings() const { return warnings_; }
  const std::filesystem::path &dir() const { return dir_; }

  Image load_rgb(int im_id) const;
  Image load_depth_raw(int im_id) const;
  std::vector<double> load_depth_mm(int im_id) const;
  Image load_mask(int im_id, int gt_index) const;
  Image load_mask_visib(int im_id, int gt_index) const;

  std::filesystem::path rgb_path(int im_id) const;
  std::filesystem::path depth_path(int im_id) const;
  std::filesystem::path mask_path(int im_id, int gt_index) const;
  std::filesystem::path mask_visib_path(int im_id, int gt_index) const;

 private:
  friend BopScene read_scene(const std::filesystem::path &dir);
  std::filesystem::path dir_;
  BopSceneRecord record_;
  std::vector<std::string> warnings_;
};

// Parses and validates the JSON indices; images load lazily. Missing masks
// are reported in warnings(). Throws ParseError or SchemaError (with the
// offending key path).
BopScene read_scene(const std::filesystem::path &dir);

// Object models under <root>/models: obj_%06d.ply plus models_info.json with
// diameter, extents and symmetries_discrete (4x4 row-major, mm).
struct ObjectModel {
  TriMesh mesh;
  std::vector<Pose> symmetries;  // always starts with identity
  double diameter = 0.0;
};

void write_models(const std::filesystem::path &root, const std::map<int, ObjectModel> &models);
std::map<int, ObjectModel> load_models(const std::filesystem::path &root);

struct PoseEstimate {
  int scene_id = 0;
  int im_id = 0;
  int obj_id = 0;
  double score = 1.0;
  Mat3 rotation = Mat3::Identity();  // nearest rotation to the stored values
  Vec3 translation = Vec3::Zero();   // mm
  double time = -1.0;                // seconds
  std::optional<Mat3> raw_rotation;  // as read from file, when it differed
  bool reorthonormalized = false;
};

// BOP results CSV: header scene_id,im_id,obj_id,score,R,t,time with R and t
// space-separated. Rotations further than 1e-4 from SO(3) are rejected.
std::vector<PoseEstimate> parse_results_csv(const std::string &text);
std::string format_results_csv(const std::vector<PoseEstimate> &estimates);
std::vector<PoseEstimate> read_results_csv(const std::filesystem::path &path);
void write_results_csv(const std::filesystem::path &path, const std::vector<PoseEstimate> &estimates);

struct ValidationOptions {
  bool require_manifest = true;
  // Image-level checks on this many evenly spaced frames per scene; 0 = all.
  int frames_per_scene = 0;
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> notes;
  int scenes_checked = 0;
  int frames_checked = 0;

  bool ok() const { return violations.empty(); }
};

// Cross-file im_id consistency, GtInfo invariants, mask and depth coupling on
// sampled frames and manifest agreement. When models are present each object
// is re-rendered from cam_K and its pose: the result must reproduce the stored
// mask exactly and the stored depth within depth_scale / 2 on visible pixels.
ValidationReport validate_dataset(const std::filesystem::path &root,
                                  const ValidationOptions &options = {});

std::vector<int> list_scene_ids(const std::filesystem::path &root);
std::filesystem::path scene_dir(const std::filesystem::path &root, int scene_id);

}  // namespace surgsynth
