#include "bop_json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "surgsynth/error.hpp"

namespace surgsynth::detail {
namespace {

Json load_json_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kParseError, "missing " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.filename().string());
}

int parse_key(const std::string &key, const std::string &file) {
  if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos)
    throw Error(Errc::kSchemaError, file + "/" + key + ": key is not a non-negative integer");
  return std::stoi(key);
}

std::int64_t read_count(const Json &j, const std::string &path) {
  if (!j.is_number_integer()) throw Error(Errc::kSchemaError, path + ": expected an integer");
  return j.get<std::int64_t>();
}

BBox read_bbox(const Json &j, const std::string &path) {
  if (!j.is_array() || j.size() != 4) throw Error(Errc::kSchemaError, path + ": expected 4 integers");
  std::array<int, 4> v{};
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_number_integer()) throw Error(Errc::kSchemaError, path + ": expected 4 integers");
    v[i] = j[i].get<int>();
  }
  return {v[0], v[1], v[2], v[3]};
}

const Json &field(const Json &obj, const char *name, const std::string &path) {
  if (!obj.is_object() || !obj.contains(name)) throw Error(Errc::kSchemaError, path + "/" + name + ": missing");
  return obj[name];
}

}  // namespace

std::string fmt_real(double v) {
  if (!std::isfinite(v)) throw Error(Errc::kInvalidParam, "non-finite value cannot be serialized");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string real_list(const double *values, std::size_t n) {
  std::string out = "[";
  for (std::size_t i = 0; i < n; ++i) out += (i ? ", " : "") + fmt_real(values[i]);
  return out + "]";
}

std::string bbox_list(const BBox &b) {
  return "[" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " + std::to_string(b.w) + ", " +
         std::to_string(b.h) + "]";
}

BopSceneRecord parse_scene_record(const std::filesystem::path &dir) {
  BopSceneRecord rec;

  const Json cam = load_json_file(dir / "scene_camera.json");
  if (!cam.is_object()) throw Error(Errc::kSchemaError, "scene_camera.json: expected an object");
  for (const auto &[key, value] : cam.items()) {
    const std::string path = "scene_camera.json/" + key;
    const int im_id = parse_key(key, "scene_camera.json");
    CameraRecord c;
    c.cam_K = read_reals<9>(field(value, "cam_K", path), path + "/cam_K");
    const Json &ds = field(value, "depth_scale", path);
    if (!ds.is_number()) throw Error(Errc::kSchemaError, path + "/depth_scale: expected a number");
    c.depth_scale = ds.get<double>();
    rec.camera[im_id] = c;
  }

  const Json gt = load_json_file(dir / "scene_gt.json");
  if (!gt.is_object()) throw Error(Errc::kSchemaError, "scene_gt.json: expected an object");
  for (const auto &[key, value] : gt.items()) {
    const int im_id = parse_key(key, "scene_gt.json");
    if (!value.is_array()) throw Error(Errc::kSchemaError, "scene_gt.json/" + key + ": expected a list");
    auto &list = rec.gt[im_id];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const std::string path = "scene_gt.json/" + key + "/" + std::to_string(k);
      const auto r = read_reals<9>(field(value[k], "cam_R_m2c", path), path + "/cam_R_m2c");
      const auto t = read_reals<3>(field(value[k], "cam_t_m2c", path), path + "/cam_t_m2c");
      std::array<double, 12> a{};
      std::copy(r.begin(), r.end(), a.begin());
      std::copy(t.begin(), t.end(), a.begin() + 9);
      GtRecord g;
      g.pose = Pose::FromArray(a);
      g.obj_id = static_cast<int>(read_count(field(value[k], "obj_id", path), path + "/obj_id"));
      list.push_back(g);
    }
  }

  const Json info = load_json_file(dir / "scene_gt_info.json");
  if (!info.is_object()) throw Error(Errc::kSchemaError, "scene_gt_info.json: expected an object");
  for (const auto &[key, value] : info.items()) {
    const int im_id = parse_key(key, "scene_gt_info.json");
    if (!value.is_array()) throw Error(Errc::kSchemaError, "scene_gt_info.json/" + key + ": expected a list");
    auto &list = rec.gt_info[im_id];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const std::string path = "scene_gt_info.json/" + key + "/" + std::to_string(k);
      GtInfoRecord g;
      g.bbox_obj = read_bbox(field(value[k], "bbox_obj", path), path + "/bbox_obj");
      g.bbox_visib = read_bbox(field(value[k], "bbox_visib", path), path + "/bbox_visib");
      g.px_count_all = read_count(field(value[k], "px_count_all", path), path + "/px_count_all");
      g.px_count_visib = read_count(field(value[k], "px_count_visib", path), path + "/px_count_visib");
      const Json &vf = field(value[k], "visib_fract", path);
      if (!vf.is_number()) throw Error(Errc::kSchemaError, path + "/visib_fract: expected a number");
      g.visib_fract = vf.get<double>();
      list.push_back(g);
    }
  }
  return rec;
}

}  // namespace surgsynth::detail
