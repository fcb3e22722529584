#include "surgsynth/bop_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bop_json.hpp"
#include "json_util.hpp"
#include "surgsynth/error.hpp"

namespace surgsynth {

using detail::Json;

namespace {

std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
}

std::string frame_name(int im_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d.png", im_id);
  return buf;
}

std::string mask_name(int im_id, int gt_index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%06d_%06d.png", im_id, gt_index);
  return buf;
}

std::vector<std::uint8_t> mask_to_png_values(const std::vector<std::uint8_t> &mask) {
  std::vector<std::uint8_t> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 255 : 0;
  return out;
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string &token, double &out) {
  if (token.empty()) return false;
  char *end = nullptr;
  out = std::strtod(token.c_str(), &end);
  return end == token.c_str() + token.size();
}

bool parse_int(const std::string &token, int &out) {
  if (token.empty()) return false;
  char *end = nullptr;
  const long v = std::strtol(token.c_str(), &end, 10);
  if (end != token.c_str() + token.size()) return false;
  out = static_cast<int>(v);
  return true;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_number_list(const std::string &field) {
  std::vector<double> out;
  std::istringstream ss(field);
  std::string tok;
  while (ss >> tok) {
    double d;
    if (!parse_double(tok, d)) return {};
    out.push_back(d);
  }
  return out;
}

}  // namespace

bool BBox::contains(const BBox &o) const {
  if (o.empty()) return true;
  if (empty()) return false;
  return o.x >= x && o.y >= y && o.x + o.w <= x + w && o.y + o.h <= y + h;
}

BBox mask_bbox(int width, int height, const std::vector<std::uint8_t> &mask) {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!mask[static_cast<std::size_t>(y) * width + x]) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

std::vector<std::uint16_t> quantize_depth(const std::vector<double> &depth_mm, double depth_scale) {
  if (!(depth_scale > 0.0)) throw Error(Errc::kInvalidParam, "depth_scale must be positive");
  std::vector<std::uint16_t> out(depth_mm.size());
  for (std::size_t i = 0; i < depth_mm.size(); ++i) {
    const double q = depth_mm[i] / depth_scale;
    if (q > 65535.0)
      throw Error(Errc::kDepthOverflow, "depth " + std::to_string(depth_mm[i]) + " mm exceeds 65535 * depth_scale");
    out[i] = static_cast<std::uint16_t>(std::lround(std::max(q, 0.0)));
  }
  return out;
}

std::string scene_camera_json(const BopSceneRecord &rec) {
  detail::BopJsonWriter w;
  w.begin_object();
  for (const auto &[im_id, cam] : rec.camera) {
    w.key(im_id);
    w.raw("{\"cam_K\": " + detail::real_list(cam.cam_K.data(), 9) +
          ", \"depth_scale\": " + detail::fmt_real(cam.depth_scale) + "}");
  }
  w.end_object();
  return w.str();
}

std::string scene_gt_json(const BopSceneRecord &rec) {
  detail::BopJsonWriter w;
  w.begin_object();
  for (const auto &[im_id, list] : rec.gt) {
    w.key(im_id);
    std::vector<std::string> items;
    for (const auto &g : list) {
      const auto a = g.pose.to_array();
      items.push_back("{\"cam_R_m2c\": " + detail::real_list(a.data(), 9) +
                      ", \"cam_t_m2c\": " + detail::real_list(a.data() + 9, 3) +
                      ", \"obj_id\": " + std::to_string(g.obj_id) + "}");
    }
    w.raw_list(items);
  }
  w.end_object();
  return w.str();
}

std::string scene_gt_info_json(const BopSceneRecord &rec) {
  detail::BopJsonWriter w;
  w.begin_object();
  for (const auto &[im_id, list] : rec.gt_info) {
    w.key(im_id);
    std::vector<std::string> items;
    for (const auto &g : list) {
      items.push_back("{\"bbox_obj\": " + detail::bbox_list(g.bbox_obj) +
                      ", \"bbox_visib\": " + detail::bbox_list(g.bbox_visib) +
                      ", \"px_count_all\": " + std::to_string(g.px_count_all) +
                      ", \"px_count_visib\": " + std::to_string(g.px_count_visib) +
                      ", \"visib_fract\": " + detail::fmt_real(g.visib_fract) + "}");
    }
    w.raw_list(items);
  }
  w.end_object();
  return w.str();
}

BopSceneWriter::BopSceneWriter(std::filesystem::path dir, double depth_scale)
    : dir_(std::move(dir)), depth_scale_(depth_scale) {
  if (!(depth_scale > 0.0)) throw Error(Errc::kInvalidParam, "depth_scale must be positive");
  std::error_code ec;
  for (const char *sub : {"rgb", "depth", "mask", "mask_visib"}) {
    std::filesystem::create_directories(dir_ / sub, ec);
    if (ec) throw Error(Errc::kIoError, "cannot create " + (dir_ / sub).string() + ": " + ec.message());
  }
}

void BopSceneWriter::add_frame(const AnnotatedFrame &frame) {
  if (!frame.buffers) throw Error(Errc::kInvalidParam, "frame without buffers");
  const FrameBuffers &fb = *frame.buffers;
  const auto depth = quantize_depth(fb.depth, depth_scale_);
  write_png(dir_ / "rgb" / frame_name(frame.im_id), make_rgb8(fb.width, fb.height, fb.rgb));
  write_png(dir_ / "depth" / frame_name(frame.im_id), make_gray16(fb.width, fb.height, depth));

  CameraRecord cam;
  const Mat3 k = frame.camera.K();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.cam_K[r * 3 + c] = k(r, c);
  cam.depth_scale = depth_scale_;
  record_.camera[frame.im_id] = cam;

  auto &gt = record_.gt[frame.im_id];
  auto &info = record_.gt_info[frame.im_id];
  gt.clear();
  info.clear();
  for (std::size_t k = 0; k < frame.objects.size(); ++k) {
    const ObjectAnnotation &obj = frame.objects[k];
    const std::size_t n = static_cast<std::size_t>(fb.width) * fb.height;
    if (obj.mask.size() != n || obj.mask_visib.size() != n)
      throw Error(Errc::kResolutionMismatch, "mask size differs from frame size");
    write_png(dir_ / "mask" / mask_name(frame.im_id, static_cast<int>(k)),
              make_gray8(fb.width, fb.height, mask_to_png_values(obj.mask)));
    write_png(dir_ / "mask_visib" / mask_name(frame.im_id, static_cast<int>(k)),
              make_gray8(fb.width, fb.height, mask_to_png_values(obj.mask_visib)));
    gt.push_back({obj.info.pose_cam, obj.info.obj_id});
    info.push_back({obj.info.bbox_obj, obj.info.bbox_visib, obj.info.px_count_all,
                    obj.info.px_count_visib, obj.info.visib_fract});
  }
}

void BopSceneWriter::finalize() {
  write_text(dir_ / "scene_camera.json", scene_camera_json(record_));
  write_text(dir_ / "scene_gt.json", scene_gt_json(record_));
  write_text(dir_ / "scene_gt_info.json", scene_gt_info_json(record_));
}

void write_scene(const std::filesystem::path &dir, double depth_scale,
                 const std::vector<AnnotatedFrame> &frames) {
  BopSceneWriter writer(dir, depth_scale);
  for (const auto &f : frames) writer.add_frame(f);
  writer.finalize();
}

std::filesystem::path BopScene::rgb_path(int im_id) const { return dir_ / "rgb" / frame_name(im_id); }
std::filesystem::path BopScene::depth_path(int im_id) const { return dir_ / "depth" / frame_name(im_id); }
std::filesystem::path BopScene::mask_path(int im_id, int k) const { return dir_ / "mask" / mask_name(im_id, k); }
std::filesystem::path BopScene::mask_visib_path(int im_id, int k) const {
  return dir_ / "mask_visib" / mask_name(im_id, k);
}

Image BopScene::load_rgb(int im_id) const { return read_png(rgb_path(im_id)); }
Image BopScene::load_depth_raw(int im_id) const { return read_png(depth_path(im_id)); }
Image BopScene::load_mask(int im_id, int k) const { return read_png(mask_path(im_id, k)); }
Image BopScene::load_mask_visib(int im_id, int k) const { return read_png(mask_visib_path(im_id, k)); }

std::vector<double> BopScene::load_depth_mm(int im_id) const {
  const Image raw = load_depth_raw(im_id);
  const double scale = record_.camera.at(im_id).depth_scale;
  std::vector<double> out(raw.data.size());
  for (std::size_t i = 0; i < raw.data.size(); ++i) out[i] = raw.data[i] * scale;
  return out;
}

BopScene read_scene(const std::filesystem::path &dir) {
  BopScene scene;
  scene.dir_ = dir;
  scene.record_ = detail::parse_scene_record(dir);
  const BopSceneRecord &rec = scene.record_;

  auto keys = [](const auto &m) {
    std::vector<int> out;
    for (const auto &kv : m) out.push_back(kv.first);
    return out;
  };
  if (keys(rec.camera) != keys(rec.gt) || keys(rec.gt) != keys(rec.gt_info))
    throw Error(Errc::kSchemaError, dir.string() + ": im_id sets differ between scene JSON files");
  for (const auto &[im_id, list] : rec.gt) {
    if (list.size() != rec.gt_info.at(im_id).size())
      throw Error(Errc::kSchemaError, "scene_gt_info.json/" + std::to_string(im_id) +
                                          ": entry count differs from scene_gt.json");
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (!is_rotation(list[k].pose.rotation, 1e-6))
        throw Error(Errc::kSchemaError, "scene_gt.json/" + std::to_string(im_id) + "/" + std::to_string(k) +
                                            "/cam_R_m2c: not a rotation");
      if (!std::filesystem::exists(scene.mask_path(im_id, static_cast<int>(k))) ||
          !std::filesystem::exists(scene.mask_visib_path(im_id, static_cast<int>(k))))
        scene.warnings_.push_back("masks missing for im_id " + std::to_string(im_id) + " gt " +
                                  std::to_string(k));
    }
  }
  return scene;
}

void write_models(const std::filesystem::path &root, const std::map<int, ObjectModel> &models) {
  const auto dir = root / "models";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create " + dir.string());
  detail::BopJsonWriter w;
  w.begin_object();
  for (const auto &[obj_id, model] : models) {
    char name[32];
    std::snprintf(name, sizeof(name), "obj_%06d.ply", obj_id);
    save_ply(model.mesh, dir / name);
    Vec3 lo = model.mesh.vertices.front(), hi = lo;
    for (const auto &v : model.mesh.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    std::string entry = "{\"diameter\": " + detail::fmt_real(model.diameter);
    const char *axes[3] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i) entry += std::string(", \"min_") + axes[i] + "\": " + detail::fmt_real(lo[i]);
    for (int i = 0; i < 3; ++i)
      entry += std::string(", \"size_") + axes[i] + "\": " + detail::fmt_real(hi[i] - lo[i]);
    std::vector<std::string> syms;
    for (std::size_t s = 1; s < model.symmetries.size(); ++s) {
      const Pose &p = model.symmetries[s];
      std::array<double, 16> m{};
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r * 4 + c] = p.rotation(r, c);
        m[r * 4 + 3] = p.translation[r];
      }
      m[15] = 1.0;
      syms.push_back(detail::real_list(m.data(), 16));
    }
    entry += ", \"symmetries_discrete\": [";
    for (std::size_t s = 0; s < syms.size(); ++s) entry += (s ? ", " : "") + syms[s];
    entry += "]}";
    w.key(obj_id);
    w.raw(entry);
  }
  w.end_object();
  write_text(dir / "models_info.json", w.str());
}

std::map<int, ObjectModel> load_models(const std::filesystem::path &root) {
  const auto dir = root / "models";
  const Json j = detail::parse_json(read_text(dir / "models_info.json"), "models_info.json");
  std::map<int, ObjectModel> out;
  for (const auto &[key, value] : j.items()) {
    int obj_id = 0;
    if (!parse_int(key, obj_id)) throw Error(Errc::kSchemaError, "models_info.json/" + key + ": not an object id");
    ObjectModel model;
    char name[32];
    std::snprintf(name, sizeof(name), "obj_%06d.ply", obj_id);
    model.mesh = load_mesh(dir / name);
    model.diameter = detail::value_or(value, "diameter", 0.0);
    model.symmetries.push_back(Pose::Identity());
    if (value.contains("symmetries_discrete")) {
      const Json &sj = value["symmetries_discrete"];
      for (std::size_t s = 0; s < sj.size(); ++s) {
        const auto m = detail::read_reals<16>(sj[s], "models_info.json/" + key + "/symmetries_discrete/" +
                                                          std::to_string(s));
        Pose p;
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) p.rotation(r, c) = m[r * 4 + c];
          p.translation[r] = m[r * 4 + 3];
        }
        if (!is_rotation(p.rotation, 1e-6))
          throw Error(Errc::kSchemaError, "models_info.json/" + key + ": symmetry is not rigid");
        model.symmetries.push_back(p);
      }
    }
    out.emplace(obj_id, std::move(model));
  }
  return out;
}

std::vector<PoseEstimate> parse_results_csv(const std::string &text) {
  std::vector<PoseEstimate> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  auto fail = [&](const std::string &msg) {
    throw Error(Errc::kParseError, "results CSV line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "scene_id,im_id,obj_id,score,R,t,time") fail("expected header scene_id,im_id,obj_id,score,R,t,time");
      header_seen = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 7) fail("expected 7 fields, got " + std::to_string(fields.size()));
    PoseEstimate e;
    if (!parse_int(trim(fields[0]), e.scene_id)) fail("bad scene_id");
    if (!parse_int(trim(fields[1]), e.im_id)) fail("bad im_id");
    if (!parse_int(trim(fields[2]), e.obj_id)) fail("bad obj_id");
    if (!parse_double(trim(fields[3]), e.score) || !std::isfinite(e.score)) fail("bad score");
    const auto r = parse_number_list(fields[4]);
    if (r.size() != 9) fail("R needs 9 numbers, got " + std::to_string(r.size()));
    const auto t = parse_number_list(fields[5]);
    if (t.size() != 3) fail("t needs 3 numbers, got " + std::to_string(t.size()));
    if (!parse_double(trim(fields[6]), e.time)) fail("bad time");
    Mat3 raw;
    for (int i = 0; i < 9; ++i) raw(i / 3, i % 3) = r[i];
    if (!raw.allFinite() || orthonormality_error(raw) > 1e-4) fail("R is not a rotation within 1e-4");
    e.raw_rotation = raw;
    if (orthonormality_error(raw) > 1e-12) {
      e.rotation = nearest_rotation(raw);
      e.reorthonormalized = true;
    } else {
      e.rotation = raw;
    }
    e.translation = Vec3(t[0], t[1], t[2]);
    if (!e.translation.allFinite()) fail("t is not finite");
    out.push_back(e);
  }
  if (!header_seen) throw Error(Errc::kParseError, "results CSV line 1: missing header");
  return out;
}

std::string format_results_csv(const std::vector<PoseEstimate> &estimates) {
  std::string out = "scene_id,im_id,obj_id,score,R,t,time\n";
  for (const auto &e : estimates) {
    const Mat3 &r = e.raw_rotation ? *e.raw_rotation : e.rotation;
    out += std::to_string(e.scene_id) + "," + std::to_string(e.im_id) + "," + std::to_string(e.obj_id) + "," +
           detail::fmt_real(e.score) + ",";
    for (int i = 0; i < 9; ++i) out += (i ? " " : "") + detail::fmt_real(r(i / 3, i % 3));
    out += ",";
    for (int i = 0; i < 3; ++i) out += (i ? " " : "") + detail::fmt_real(e.translation[i]);
    out += "," + detail::fmt_real(e.time) + "\n";
  }
  return out;
}

std::vector<PoseEstimate> read_results_csv(const std::filesystem::path &path) {
  return parse_results_csv(read_text(path));
}

void write_results_csv(const std::filesystem::path &path, const std::vector<PoseEstimate> &estimates) {
  write_text(path, format_results_csv(estimates));
}

std::filesystem::path scene_dir(const std::filesystem::path &root, int scene_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", scene_id);
  return root / buf;
}

std::vector<int> list_scene_ids(const std::filesystem::path &root) {
  std::vector<int> ids;
  std::error_code ec;
  for (const auto &entry : std::filesystem::directory_iterator(root, ec)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() != 6 || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
    ids.push_back(std::stoi(name));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace surgsynth
