#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>

#include "bop_json.hpp"
#include "surgsynth/bop_io.hpp"
#include "surgsynth/error.hpp"
#include "surgsynth/manifest.hpp"
#include "surgsynth/render.hpp"

namespace surgsynth {
namespace {

std::string scene_tag(int scene_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene %06d", scene_id);
  return buf;
}

std::string at(int scene_id, int im_id, int k = -1) {
  std::string s = scene_tag(scene_id) + " im_id " + std::to_string(im_id);
  if (k >= 0) s += " gt " + std::to_string(k);
  return s;
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::uint8_t> binarize(const Image &img) {
  std::vector<std::uint8_t> out(img.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data[i] ? 1 : 0;
  return out;
}

class Validator {
 public:
  Validator(std::filesystem::path root, ValidationOptions options)
      : root_(std::move(root)), options_(options) {}

  ValidationReport run() {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root_)) {
      fail(root_.string() + " is not a directory");
      return report_;
    }
    load_manifest_if_any();
    load_models_if_any();

    const std::vector<int> ids = list_scene_ids(root_);
    if (ids.empty()) fail("no scene directories under " + root_.string());
    if (manifest_) {
      std::set<int> listed;
      for (const auto &s : manifest_->scenes) {
        if (!listed.insert(s.scene_id).second) fail("manifest lists " + scene_tag(s.scene_id) + " twice");
        if (!std::binary_search(ids.begin(), ids.end(), s.scene_id))
          fail("manifest lists " + scene_tag(s.scene_id) + " but its directory is missing");
      }
      for (int id : ids)
        if (!listed.count(id)) fail(scene_tag(id) + " is not listed in the manifest");
    }
    for (int id : ids) check_scene(id);
    return report_;
  }

 private:
  void fail(std::string msg) { report_.violations.push_back(std::move(msg)); }
  void note(std::string msg) { report_.notes.push_back(std::move(msg)); }

  void load_manifest_if_any() {
    const auto path = root_ / "manifest.json";
    if (!std::filesystem::exists(path)) {
      if (options_.require_manifest) fail("manifest.json missing (generation incomplete)");
      else note("no manifest.json; manifest agreement not checked");
      return;
    }
    try {
      manifest_ = load_manifest(path);
    } catch (const Error &e) {
      fail(std::string("manifest.json: ") + e.what());
    }
  }

  void load_models_if_any() {
    if (!std::filesystem::exists(root_ / "models" / "models_info.json")) {
      note("no models; re-render checks skipped");
      return;
    }
    try {
      for (auto &[id, m] : load_models(root_)) models_[id] = std::make_shared<const TriMesh>(std::move(m.mesh));
    } catch (const Error &e) {
      fail(std::string("models: ") + e.what());
    }
  }

  void check_scene(int scene_id) {
    const auto dir = scene_dir(root_, scene_id);
    BopSceneRecord rec;
    try {
      rec = detail::parse_scene_record(dir);
    } catch (const Error &e) {
      fail(scene_tag(scene_id) + ": " + e.what());
      return;
    }
    ++report_.scenes_checked;

    // im_id agreement between the three index files.
    std::set<int> all;
    for (const auto &kv : rec.camera) all.insert(kv.first);
    for (const auto &kv : rec.gt) all.insert(kv.first);
    for (const auto &kv : rec.gt_info) all.insert(kv.first);
    std::vector<int> complete;
    for (int im : all) {
      bool ok = true;
      if (!rec.camera.count(im)) fail(at(scene_id, im) + " missing in scene_camera"), ok = false;
      if (!rec.gt.count(im)) fail(at(scene_id, im) + " missing in scene_gt"), ok = false;
      if (!rec.gt_info.count(im)) fail(at(scene_id, im) + " missing in scene_gt_info"), ok = false;
      if (ok && rec.gt.at(im).size() != rec.gt_info.at(im).size()) {
        fail(at(scene_id, im) + ": scene_gt has " + std::to_string(rec.gt.at(im).size()) +
             " entries, scene_gt_info has " + std::to_string(rec.gt_info.at(im).size()));
        ok = false;
      }
      if (ok) complete.push_back(im);
    }

    const ReplayRecord *replay = nullptr;
    if (manifest_) {
      for (const auto &s : manifest_->scenes)
        if (s.scene_id == scene_id) replay = &s;
    }
    if (replay) check_manifest_counts(scene_id, *replay, all);

    for (int im : complete) check_frame_records(scene_id, im, rec);

    // Image-level checks on evenly spaced frames.
    std::vector<int> picked = complete;
    const int n = options_.frames_per_scene;
    if (n > 0 && static_cast<int>(complete.size()) > n) {
      picked.clear();
      for (int i = 0; i < n; ++i)
        picked.push_back(complete[static_cast<std::size_t>(i) * (complete.size() - 1) / (n - 1 > 0 ? n - 1 : 1)]);
      picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    }
    for (int im : picked) check_frame_images(scene_id, im, rec, dir);
  }

  void check_manifest_counts(int scene_id, const ReplayRecord &replay, const std::set<int> &im_ids) {
    const std::string tag = scene_tag(scene_id);
    if (replay.frame_count != static_cast<int>(im_ids.size()))
      fail(tag + ": manifest frame_count " + std::to_string(replay.frame_count) + " but " +
           std::to_string(im_ids.size()) + " frames on disk");
    if (replay.dropped_count != static_cast<int>(replay.dropped.size()))
      fail(tag + ": manifest dropped_count disagrees with the dropped list");
    if (replay.frame_count + replay.dropped_count != manifest_->samples_per_replay)
      fail(tag + ": kept + dropped = " + std::to_string(replay.frame_count + replay.dropped_count) +
           ", samples_per_replay = " + std::to_string(manifest_->samples_per_replay));
    for (const auto &d : replay.dropped)
      if (im_ids.count(d.sample_index))
        fail(tag + ": dropped sample " + std::to_string(d.sample_index) + " has a frame on disk");
    for (int im : im_ids)
      if (im < 0 || im >= manifest_->samples_per_replay)
        fail(at(scene_id, im) + " outside the sampled range");
  }

  void check_frame_records(int scene_id, int im, const BopSceneRecord &rec) {
    ++report_.frames_checked;
    const CameraRecord &cam = rec.camera.at(im);
    const auto &k = cam.cam_K;
    if (!(k[0] > 0 && k[4] > 0) || k[1] != 0 || k[3] != 0 || k[6] != 0 || k[7] != 0 || k[8] != 1)
      fail(at(scene_id, im) + ": cam_K is not a pinhole intrinsic matrix");
    if (!(cam.depth_scale > 0)) fail(at(scene_id, im) + ": depth_scale must be positive");
    if (manifest_) {
      const Mat3 mk = manifest_->camera.K();
      for (int i = 0; i < 9; ++i)
        if (k[i] != mk(i / 3, i % 3)) {
          fail(at(scene_id, im) + ": cam_K differs from the manifest camera");
          break;
        }
      if (cam.depth_scale != manifest_->depth_scale) fail(at(scene_id, im) + ": depth_scale differs from the manifest");
    }

    const auto &gts = rec.gt.at(im);
    const auto &infos = rec.gt_info.at(im);
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const int k_idx = static_cast<int>(i);
      const GtRecord &g = gts[i];
      const GtInfoRecord &f = infos[i];
      if (!is_rotation(g.pose.rotation, 1e-6)) fail(at(scene_id, im, k_idx) + ": cam_R_m2c is not a rotation");
      if (!models_.empty() && !models_.count(g.obj_id))
        fail(at(scene_id, im, k_idx) + ": obj_id " + std::to_string(g.obj_id) + " has no model");
      if (manifest_ && !std::count(manifest_->annotated_obj_ids.begin(), manifest_->annotated_obj_ids.end(), g.obj_id))
        fail(at(scene_id, im, k_idx) + ": obj_id " + std::to_string(g.obj_id) + " is not annotated in the manifest");

      if (f.px_count_all < 0 || f.px_count_visib < 0) fail(at(scene_id, im, k_idx) + ": negative pixel count");
      if (f.px_count_visib > f.px_count_all)
        fail(at(scene_id, im, k_idx) + ": px_count_visib exceeds px_count_all");
      if (!(f.visib_fract >= 0.0 && f.visib_fract <= 1.0))
        fail(at(scene_id, im, k_idx) + ": visib_fract " + real_text(f.visib_fract) +
             " out of range [0, 1]");
      const double expect = f.px_count_all > 0 ? static_cast<double>(f.px_count_visib) / f.px_count_all : 0.0;
      if (std::abs(f.visib_fract - expect) > 1e-12)
        fail(at(scene_id, im, k_idx) + ": visib_fract disagrees with the pixel counts");
      if (f.bbox_obj.empty() != (f.px_count_all == 0))
        fail(at(scene_id, im, k_idx) + ": bbox_obj disagrees with px_count_all");
      if (f.bbox_visib.empty() != (f.px_count_visib == 0))
        fail(at(scene_id, im, k_idx) + ": bbox_visib disagrees with px_count_visib");
      if (!f.bbox_visib.empty() && !f.bbox_obj.contains(f.bbox_visib))
        fail(at(scene_id, im, k_idx) + ": bbox_visib not inside bbox_obj");
    }
  }

  void check_frame_images(int scene_id, int im, const BopSceneRecord &rec, const std::filesystem::path &dir) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", im);
    Image rgb, depth;
    try {
      rgb = read_png(dir / "rgb" / name);
      depth = read_png(dir / "depth" / name);
    } catch (const Error &e) {
      fail(at(scene_id, im) + ": " + e.what());
      return;
    }
    if (rgb.channels != 3 || rgb.bit_depth != 8) fail(at(scene_id, im) + ": rgb is not 8-bit RGB");
    if (depth.channels != 1 || depth.bit_depth != 16) fail(at(scene_id, im) + ": depth is not 16-bit gray");
    if (depth.width != rgb.width || depth.height != rgb.height) {
      fail(at(scene_id, im) + ": depth and rgb sizes differ");
      return;
    }
    if (manifest_ && (rgb.width != manifest_->camera.width || rgb.height != manifest_->camera.height))
      fail(at(scene_id, im) + ": image size differs from the manifest camera");

    const int w = rgb.width, h = rgb.height;
    const CameraRecord &camrec = rec.camera.at(im);
    CameraModel cam;
    cam.fx = camrec.cam_K[0];
    cam.cx = camrec.cam_K[2];
    cam.fy = camrec.cam_K[4];
    cam.cy = camrec.cam_K[5];
    cam.width = w;
    cam.height = h;
    if (manifest_) cam.near_clip = manifest_->camera.near_clip;

    const auto &gts = rec.gt.at(im);
    const auto &infos = rec.gt_info.at(im);
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const int k = static_cast<int>(i);
      std::snprintf(name, sizeof(name), "%06d_%06d.png", im, k);
      Image mimg, vimg;
      try {
        mimg = read_png(dir / "mask" / name);
        vimg = read_png(dir / "mask_visib" / name);
      } catch (const Error &e) {
        fail(at(scene_id, im, k) + ": " + e.what());
        continue;
      }
      if (mimg.width != w || mimg.height != h || vimg.width != w || vimg.height != h || mimg.channels != 1 ||
          vimg.channels != 1) {
        fail(at(scene_id, im, k) + ": mask size or format differs from the frame");
        continue;
      }
      const auto mask = binarize(mimg);
      const auto visib = binarize(vimg);
      const GtInfoRecord &f = infos[i];
      std::int64_t n_all = 0, n_vis = 0, outside = 0, no_depth = 0;
      for (std::size_t p = 0; p < mask.size(); ++p) {
        n_all += mask[p];
        n_vis += visib[p];
        if (visib[p] && !mask[p]) ++outside;
        if (visib[p] && depth.data[p] == 0) ++no_depth;
      }
      if (n_all != f.px_count_all) fail(at(scene_id, im, k) + ": px_count_all disagrees with the mask");
      if (n_vis != f.px_count_visib) fail(at(scene_id, im, k) + ": px_count_visib disagrees with mask_visib");
      if (outside) fail(at(scene_id, im, k) + ": mask_visib has pixels outside mask");
      if (no_depth) fail(at(scene_id, im, k) + ": visible pixels without depth");
      if (mask_bbox(w, h, mask) != f.bbox_obj) fail(at(scene_id, im, k) + ": bbox_obj disagrees with the mask");
      if (mask_bbox(w, h, visib) != f.bbox_visib)
        fail(at(scene_id, im, k) + ": bbox_visib disagrees with mask_visib");

      auto model = models_.find(gts[i].obj_id);
      if (model == models_.end()) continue;
      SceneInstance inst;
      inst.instance_id = 1;
      inst.obj_id = gts[i].obj_id;
      inst.mesh = model->second;
      inst.pose_world = gts[i].pose;
      RenderOptions opts;
      opts.shade = false;
      FrameBuffers alone;
      try {
        alone = render_frame(std::span<const SceneInstance>(&inst, 1), Pose::Identity(), cam, LightSpec{}, opts);
      } catch (const Error &e) {
        fail(at(scene_id, im, k) + ": re-render failed: " + e.what());
        continue;
      }
      std::int64_t mask_diff = 0, depth_bad = 0;
      const double tol = camrec.depth_scale / 2 + 1e-6;
      for (std::size_t p = 0; p < mask.size(); ++p) {
        const std::uint8_t rendered = alone.instance_id[p] == 1 ? 1 : 0;
        if (rendered != mask[p]) ++mask_diff;
        if (visib[p] && rendered && std::abs(depth.data[p] * camrec.depth_scale - alone.depth[p]) > tol) ++depth_bad;
      }
      if (mask_diff)
        fail(at(scene_id, im, k) + ": re-rendered mask differs in " + std::to_string(mask_diff) + " pixel(s)");
      if (depth_bad)
        fail(at(scene_id, im, k) + ": stored depth disagrees with the re-render in " + std::to_string(depth_bad) +
             " pixel(s)");
    }
  }

  std::filesystem::path root_;
  ValidationOptions options_;
  ValidationReport report_;
  std::optional<DatasetManifest> manifest_;
  std::map<int, std::shared_ptr<const TriMesh>> models_;
};

}  // namespace

ValidationReport validate_dataset(const std::filesystem::path &root, const ValidationOptions &options) {
  return Validator(root, options).run();
}

}  // namespace surgsynth
