#include "surgsynth/trajectory.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "surgsynth/error.hpp"

namespace surgsynth {

using detail::Json;

void Trajectory::validate(std::size_t min_keyframes) const {
  if (keyframes.size() < min_keyframes)
    throw Error(Errc::kConfigError, "trajectory needs at least " + std::to_string(min_keyframes) +
                                        " keyframes, has " + std::to_string(keyframes.size()));
  std::set<int> ids;
  for (const auto &inst : instances) {
    if (inst.instance_id <= 0 || inst.obj_id <= 0)
      throw Error(Errc::kConfigError, "instance and object ids must be positive");
    if (!ids.insert(inst.instance_id).second)
      throw Error(Errc::kConfigError, "duplicate instance_id " + std::to_string(inst.instance_id));
  }
  for (std::size_t k = 0; k < keyframes.size(); ++k) {
    const Keyframe &kf = keyframes[k];
    if (k > 0 && !(kf.t > keyframes[k - 1].t))
      throw Error(Errc::kConfigError, "keyframe timestamps must be strictly increasing (keyframe " +
                                          std::to_string(k) + ")");
    if (kf.poses.size() != ids.size())
      throw Error(Errc::kConfigError, "keyframe " + std::to_string(k) + " does not pose every instance");
    for (const auto &[id, pose] : kf.poses) {
      if (!ids.count(id))
        throw Error(Errc::kConfigError, "keyframe " + std::to_string(k) + " poses unknown instance " +
                                            std::to_string(id));
      if (!is_rotation(pose.rotation, 1e-6))
        throw Error(Errc::kConfigError, "keyframe " + std::to_string(k) + " has an invalid rotation");
    }
  }
}

SceneState trajectory_sample(const Trajectory &traj, double time) {
  if (traj.keyframes.empty()) throw Error(Errc::kOutOfRange, "trajectory has no keyframes");
  if (!(time >= traj.start_time() && time <= traj.end_time()))
    throw Error(Errc::kOutOfRange, "time " + std::to_string(time) + " outside trajectory span");

  const auto &kfs = traj.keyframes;
  // First keyframe with t > time; its predecessor brackets from below.
  auto upper = std::upper_bound(kfs.begin(), kfs.end(), time,
                                [](double value, const Keyframe &kf) { return value < kf.t; });
  const Keyframe &lo = *(upper - 1);
  if (lo.t == time || upper == kfs.end()) return {lo.poses, lo.ecm};
  const Keyframe &hi = *upper;

  const double s = (time - lo.t) / (hi.t - lo.t);
  SceneState out;
  for (const auto &[id, pose] : lo.poses) out.poses[id] = interpolate_pose(pose, hi.poses.at(id), s);
  for (int i = 0; i < 4; ++i) out.ecm[i] = (1.0 - s) * lo.ecm[i] + s * hi.ecm[i];
  return out;
}

Trajectory parse_trajectory(const std::string &json_text) {
  const Json j = detail::parse_json(json_text, "trajectory");
  Trajectory traj;
  try {
    const int version = j.at("version").get<int>();
    if (version != Trajectory::kVersion)
      throw Error(Errc::kConfigError, "unsupported trajectory version " + std::to_string(version));
    traj.name = detail::value_or<std::string>(j, "name", "");
    traj.source = detail::value_or<std::string>(j, "source", "");
    for (const Json &ij : j.at("instances")) {
      TrajectoryInstance inst;
      inst.instance_id = ij.at("instance_id").get<int>();
      inst.obj_id = ij.at("obj_id").get<int>();
      inst.mesh = ij.at("mesh").get<std::string>();
      traj.instances.push_back(inst);
    }
    const Json &kj = j.at("keyframes");
    for (std::size_t k = 0; k < kj.size(); ++k) {
      const std::string path = "keyframes/" + std::to_string(k);
      Keyframe kf;
      kf.t = kj[k].at("t").get<double>();
      for (const auto &[key, value] : kj[k].at("poses").items()) {
        int id = 0;
        try {
          std::size_t used = 0;
          id = std::stoi(key, &used);
          if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception &) {
          throw Error(Errc::kConfigError, path + "/poses: key '" + key + "' is not an instance id");
        }
        kf.poses[id] = detail::read_pose(value, path + "/poses/" + key);
      }
      const auto q = detail::read_reals<4>(kj[k].at("ecm"), path + "/ecm");
      kf.ecm = {q[0], q[1], q[2], q[3]};
      traj.keyframes.push_back(std::move(kf));
    }
  } catch (const Json::exception &e) {
    throw Error(Errc::kConfigError, std::string("trajectory: ") + e.what());
  } catch (const Error &e) {
    if (e.code() == Errc::kSchemaError) throw Error(Errc::kConfigError, e.what());
    throw;
  }
  traj.validate(0);
  return traj;
}

std::string trajectory_to_json(const Trajectory &traj) {
  Json j;
  j["version"] = Trajectory::kVersion;
  j["name"] = traj.name;
  j["source"] = traj.source;
  j["instances"] = Json::array();
  for (const auto &inst : traj.instances)
    j["instances"].push_back({{"instance_id", inst.instance_id}, {"obj_id", inst.obj_id}, {"mesh", inst.mesh}});
  j["keyframes"] = Json::array();
  for (const auto &kf : traj.keyframes) {
    Json poses = Json::object();
    for (const auto &[id, pose] : kf.poses) poses[std::to_string(id)] = detail::pose_json(pose);
    j["keyframes"].push_back(
        {{"t", kf.t}, {"poses", poses}, {"ecm", Json::array({kf.ecm[0], kf.ecm[1], kf.ecm[2], kf.ecm[3]})}});
  }
  return j.dump(2) + "\n";
}

Trajectory load_trajectory(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open trajectory " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory(ss.str());
}

void save_trajectory(const Trajectory &traj, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write trajectory " + path.string());
  out << trajectory_to_json(traj);
  if (!out) throw Error(Errc::kIoError, "cannot write trajectory " + path.string());
}

}  // namespace surgsynth
