#include "surgsynth/manifest.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "surgsynth/error.hpp"

namespace surgsynth {

using detail::Json;

std::string manifest_to_json(const DatasetManifest &m) {
  Json j;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  j["camera"] = {{"fx", m.camera.fx},         {"fy", m.camera.fy},
                 {"cx", m.camera.cx},         {"cy", m.camera.cy},
                 {"width", m.camera.width},   {"height", m.camera.height},
                 {"near_clip", m.camera.near_clip}};
  j["depth_scale"] = m.depth_scale;
  j["samples_per_replay"] = m.samples_per_replay;
  j["min_visib"] = m.min_visib;
  j["annotated_obj_ids"] = m.annotated_obj_ids;
  j["scenes"] = Json::array();
  for (const auto &s : m.scenes) {
    Json sj;
    sj["scene_id"] = s.scene_id;
    sj["trajectory"] = s.trajectory;
    sj["replay_index"] = s.replay_index;
    sj["joint_offsets"] = s.joint_offsets;
    Json lights = Json::array();
    for (const auto &l : s.light.lights)
      lights.push_back({{"direction", detail::vec3_json(l.direction)}, {"intensity", detail::vec3_json(l.intensity)}});
    sj["light"] = {{"ambient", detail::vec3_json(s.light.ambient)}, {"directional", lights}};
    sj["frame_count"] = s.frame_count;
    sj["dropped_count"] = s.dropped_count;
    Json dropped = Json::array();
    for (const auto &d : s.dropped)
      dropped.push_back({{"sample_index", d.sample_index}, {"time", d.time}, {"reason", d.reason}});
    sj["dropped"] = dropped;
    sj["warnings"] = s.warnings;
    j["scenes"].push_back(sj);
  }
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(const std::string &json_text) {
  const Json j = detail::parse_json(json_text, "manifest");
  DatasetManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const Json &c = j.at("camera");
    m.camera.fx = c.at("fx").get<double>();
    m.camera.fy = c.at("fy").get<double>();
    m.camera.cx = c.at("cx").get<double>();
    m.camera.cy = c.at("cy").get<double>();
    m.camera.width = c.at("width").get<int>();
    m.camera.height = c.at("height").get<int>();
    m.camera.near_clip = c.at("near_clip").get<double>();
    m.depth_scale = j.at("depth_scale").get<double>();
    m.samples_per_replay = j.at("samples_per_replay").get<int>();
    m.min_visib = j.at("min_visib").get<double>();
    m.annotated_obj_ids = j.at("annotated_obj_ids").get<std::vector<int>>();
    for (const Json &sj : j.at("scenes")) {
      ReplayRecord s;
      s.scene_id = sj.at("scene_id").get<int>();
      s.trajectory = sj.at("trajectory").get<std::string>();
      s.replay_index = sj.at("replay_index").get<int>();
      s.joint_offsets = sj.at("joint_offsets").get<EcmJoints>();
      const Json &lj = sj.at("light");
      s.light.ambient = detail::read_vec3(lj.at("ambient"), "light/ambient");
      for (const Json &dj : lj.at("directional")) {
        DirectionalLight l;
        l.direction = detail::read_vec3(dj.at("direction"), "light/direction");
        l.intensity = detail::read_vec3(dj.at("intensity"), "light/intensity");
        s.light.lights.push_back(l);
      }
      s.frame_count = sj.at("frame_count").get<int>();
      s.dropped_count = sj.at("dropped_count").get<int>();
      for (const Json &dj : sj.at("dropped"))
        s.dropped.push_back({dj.at("sample_index").get<int>(), dj.at("time").get<double>(),
                             dj.at("reason").get<std::string>()});
      s.warnings = sj.at("warnings").get<std::vector<std::string>>();
      m.scenes.push_back(std::move(s));
    }
  } catch (const Json::exception &e) {
    throw Error(Errc::kSchemaError, std::string("manifest: ") + e.what());
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

}  // namespace surgsynth
