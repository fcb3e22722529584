#include "surgsynth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "surgsynth/error.hpp"
#include "surgsynth/random.hpp"

namespace surgsynth {

using detail::Json;

namespace {

bool in_unit_range(const Rgb &c) { return c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0; }

const char *kJointNames[4] = {"yaw", "pitch", "insertion", "roll"};

Material parse_material(const Json &j, const std::string &path) {
  Material m;
  if (j.contains("ambient")) m.ambient = detail::read_vec3(j["ambient"], path + "/ambient");
  if (j.contains("diffuse")) m.diffuse = detail::read_vec3(j["diffuse"], path + "/diffuse");
  if (j.contains("specular")) m.specular = detail::read_vec3(j["specular"], path + "/specular");
  m.shininess = detail::value_or(j, "shininess", m.shininess);
  try {
    m.validate();
  } catch (const Error &e) {
    throw Error(Errc::kConfigError, path + ": " + e.what());
  }
  return m;
}

EcmJoints read_joints(const Json &j, const std::string &path) {
  const auto a = detail::read_reals<4>(j, path);
  return {a[0], a[1], a[2], a[3]};
}

}  // namespace

void Material::validate() const {
  if (!in_unit_range(ambient) || !in_unit_range(diffuse) || !in_unit_range(specular))
    throw Error(Errc::kInvalidParam, "material channels must lie in [0, 1]");
  if (!(shininess > 0.0)) throw Error(Errc::kInvalidParam, "shininess must be positive");
}

void LightSpec::validate() const {
  for (const auto &l : lights) {
    if (std::abs(l.direction.norm() - 1.0) > 1e-9)
      throw Error(Errc::kInvalidParam, "light direction must be unit length");
    if (l.intensity.minCoeff() < 0.0) throw Error(Errc::kInvalidParam, "negative light intensity");
  }
  if (ambient.minCoeff() < 0.0) throw Error(Errc::kInvalidParam, "negative ambient light");
}

void EcmRig::check_limits() const {
  for (int i = 0; i < 4; ++i) {
    if (!(joints[i] >= joint_limits[i][0] && joints[i] <= joint_limits[i][1])) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "joint %s = %.9g outside [%.9g, %.9g]", kJointNames[i],
                    joints[i], joint_limits[i][0], joint_limits[i][1]);
      throw Error(Errc::kJointLimit, buf);
    }
  }
  if (joints[2] < 0.0) throw Error(Errc::kJointLimit, "insertion must be non-negative");
}

Pose ecm_forward_kinematics(const EcmRig &rig) {
  rig.check_limits();
  const Pose yaw{Ry(rig.joints[0]), Vec3::Zero()};
  const Pose pitch{Rx(rig.joints[1]), Vec3::Zero()};
  const Pose insertion = Pose::FromTranslation(Vec3(0.0, 0.0, rig.joints[2]));
  const Pose roll{Rz(rig.joints[3]), Vec3::Zero()};
  return compose(rig.base_pose, compose(yaw, compose(pitch, compose(insertion, roll))));
}

void ViewpointRandomization::validate() const {
  for (double b : offset_bounds)
    if (!(b >= 0.0)) throw Error(Errc::kInvalidParam, "offset bounds must be non-negative");
  if (!(intensity_range[0] <= intensity_range[1]) || intensity_range[0] < 0.0)
    throw Error(Errc::kInvalidParam, "intensity range must satisfy 0 <= lo <= hi");
  if (!(light_cone_deg >= 0.0 && light_cone_deg <= 180.0))
    throw Error(Errc::kInvalidParam, "light cone half-angle must lie in [0, 180]");
  if (!(light_direction.norm() > 0.0)) throw Error(Errc::kInvalidParam, "zero light direction");
  if (ambient.minCoeff() < 0.0) throw Error(Errc::kInvalidParam, "negative ambient light");
}

ViewpointSample sample_viewpoint(const EcmRig &rig, const ViewpointRandomization &rand,
                                 std::uint64_t replay_index) {
  rig.check_limits();
  rand.validate();

  SplitMix64 rng = SplitMix64::ForStream(rand.seed, replay_index);
  ViewpointSample out;
  out.rig = rig;
  // Draw order is part of the reproducibility contract: four joint offsets,
  // then cone polar, cone azimuth, intensity.
  for (int i = 0; i < 4; ++i) {
    const double u = rng.uniform();
    const double b = rand.offset_bounds[i];
    out.offsets[i] = b == 0.0 ? 0.0 : -b + 2.0 * b * u;
    const double wanted = rig.joints[i] + out.offsets[i];
    const double clamped = std::clamp(wanted, rig.joint_limits[i][0], rig.joint_limits[i][1]);
    if (clamped != wanted) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "joint %s clamped from %.9g to %.9g", kJointNames[i], wanted,
                    clamped);
      out.warnings.emplace_back(buf);
    }
    out.rig.joints[i] = clamped;
  }

  const Vec3 axis = rand.light_direction.normalized();
  const Vec3 helper = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u_dir = axis.cross(helper).normalized();
  const Vec3 w_dir = axis.cross(u_dir);
  const double cos_max = std::cos(deg2rad(rand.light_cone_deg));
  const double cos_theta = 1.0 - rng.uniform() * (1.0 - cos_max);
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  const double azimuth = 2.0 * kPi * rng.uniform();
  const double intensity = rng.uniform(rand.intensity_range[0], rand.intensity_range[1]);

  DirectionalLight light;
  light.direction = (cos_theta * axis + sin_theta * (std::cos(azimuth) * u_dir +
                                                     std::sin(azimuth) * w_dir))
                        .normalized();
  light.intensity = Rgb::Constant(intensity);
  out.lights.lights.push_back(light);
  out.lights.ambient = rand.ambient;
  return out;
}

const MeshEntry &SceneConfig::mesh(const std::string &name) const {
  auto it = meshes.find(name);
  if (it == meshes.end()) throw Error(Errc::kConfigError, "unknown mesh '" + name + "'");
  return it->second;
}

SceneConfig parse_scene_config(const std::string &json_text, const std::filesystem::path &base_dir) {
  const Json j = detail::parse_json(json_text, "scene config");
  SceneConfig cfg;
  try {
    if (!j.contains("camera")) throw Error(Errc::kConfigError, "scene config lacks camera");
    const Json &cj = j["camera"];
    cfg.camera.fx = cj.at("fx").get<double>();
    cfg.camera.fy = cj.at("fy").get<double>();
    cfg.camera.cx = cj.at("cx").get<double>();
    cfg.camera.cy = cj.at("cy").get<double>();
    cfg.camera.width = cj.at("width").get<int>();
    cfg.camera.height = cj.at("height").get<int>();
    cfg.camera.near_clip = detail::value_or(cj, "near_clip", 1.0);
    cfg.camera.validate();

    if (j.contains("ecm")) {
      const Json &ej = j["ecm"];
      if (ej.contains("base_pose")) cfg.ecm.base_pose = detail::read_pose(ej["base_pose"], "ecm/base_pose");
      if (ej.contains("joints")) cfg.ecm.joints = read_joints(ej["joints"], "ecm/joints");
      if (ej.contains("limits")) {
        const Json &lj = ej["limits"];
        if (!lj.is_array() || lj.size() != 4) throw Error(Errc::kConfigError, "ecm/limits: expected 4 pairs");
        for (int i = 0; i < 4; ++i) {
          const auto pair = detail::read_reals<2>(lj[i], "ecm/limits/" + std::to_string(i));
          if (!(pair[0] <= pair[1])) throw Error(Errc::kConfigError, "ecm/limits: lo > hi");
          cfg.ecm.joint_limits[i] = {pair[0], pair[1]};
        }
        if (cfg.ecm.joint_limits[2][0] < 0.0)
          throw Error(Errc::kConfigError, "ecm/limits: insertion lower limit must be >= 0");
      }
    }

    if (!j.contains("meshes") || !j["meshes"].is_array() || j["meshes"].empty())
      throw Error(Errc::kConfigError, "scene config needs a non-empty meshes array");
    for (std::size_t i = 0; i < j["meshes"].size(); ++i) {
      const Json &mj = j["meshes"][i];
      const std::string path = "meshes/" + std::to_string(i);
      MeshEntry entry;
      entry.name = mj.at("name").get<std::string>();
      TriMesh mesh;
      if (mj.contains("path")) {
        std::filesystem::path p = mj["path"].get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        mesh = load_mesh(p);
      } else if (mj.contains("needle")) {
        const Json &nj = mj["needle"];
        NeedleParams np;
        np.arc_radius = detail::value_or(nj, "arc_radius", np.arc_radius);
        np.tube_radius = detail::value_or(nj, "tube_radius", np.tube_radius);
        np.arc_angle = detail::value_or(nj, "arc_angle", np.arc_angle);
        np.segments = detail::value_or(nj, "segments", np.segments);
        mesh = generate_needle_mesh(np.arc_radius, np.tube_radius, np.arc_angle, np.segments);
      } else if (mj.contains("grid")) {
        const Json &gj = mj["grid"];
        const auto size = detail::read_reals<2>(gj.at("size"), path + "/grid/size");
        const auto div = detail::read_reals<2>(gj.at("divisions"), path + "/grid/divisions");
        mesh = generate_grid_mesh(size[0], size[1], static_cast<int>(div[0]), static_cast<int>(div[1]));
      } else if (mj.contains("box")) {
        mesh = generate_box_mesh(detail::read_vec3(mj["box"].at("size"), path + "/box/size"));
      } else {
        throw Error(Errc::kConfigError, path + ": needs one of path, needle, grid, box");
      }
      entry.mesh = std::make_shared<const TriMesh>(std::move(mesh));
      if (mj.contains("material")) entry.material = parse_material(mj["material"], path + "/material");
      entry.annotate = detail::value_or(mj, "annotate", true);
      if (mj.contains("symmetries")) {
        for (std::size_t k = 0; k < mj["symmetries"].size(); ++k)
          entry.symmetries.push_back(
              detail::read_pose(mj["symmetries"][k], path + "/symmetries/" + std::to_string(k)));
      }
      if (!cfg.meshes.emplace(entry.name, entry).second)
        throw Error(Errc::kConfigError, "duplicate mesh name '" + entry.name + "'");
    }

    if (j.contains("instances")) {
      for (std::size_t i = 0; i < j["instances"].size(); ++i) {
        const Json &ij = j["instances"][i];
        InstanceSpec spec;
        spec.instance_id = ij.at("instance_id").get<int>();
        spec.obj_id = ij.at("obj_id").get<int>();
        spec.mesh = ij.at("mesh").get<std::string>();
        if (ij.contains("pose")) spec.pose = detail::read_pose(ij["pose"], "instances/" + std::to_string(i) + "/pose");
        if (spec.instance_id <= 0 || spec.obj_id <= 0)
          throw Error(Errc::kConfigError, "instance and object ids must be positive");
        cfg.mesh(spec.mesh);
        for (const auto &other : cfg.instances)
          if (other.instance_id == spec.instance_id)
            throw Error(Errc::kConfigError, "duplicate instance_id " + std::to_string(spec.instance_id));
        cfg.instances.push_back(spec);
      }
    }

    if (j.contains("randomization"))
      cfg.randomization = parse_randomization(j["randomization"].dump(), cfg.randomization);
    if (j.contains("background")) cfg.background = detail::read_vec3(j["background"], "background");
  } catch (const Json::exception &e) {
    throw Error(Errc::kConfigError, std::string("scene config: ") + e.what());
  } catch (const Error &e) {
    if (e.code() != Errc::kSchemaError && e.code() != Errc::kInvalidParam) throw;
    throw Error(Errc::kConfigError, e.what());
  }
  cfg.ecm.check_limits();
  return cfg;
}

ViewpointRandomization parse_randomization(const std::string &json_text, ViewpointRandomization base) {
  const Json rj = detail::parse_json(json_text, "randomization");
  ViewpointRandomization r = base;
  try {
    if (!rj.is_object()) throw Error(Errc::kConfigError, "randomization must be an object");
    if (rj.contains("offset_bounds")) r.offset_bounds = read_joints(rj["offset_bounds"], "randomization/offset_bounds");
    if (rj.contains("light_direction"))
      r.light_direction = detail::read_vec3(rj["light_direction"], "randomization/light_direction");
    r.light_cone_deg = detail::value_or(rj, "light_cone_deg", r.light_cone_deg);
    if (rj.contains("intensity")) r.intensity_range = detail::read_reals<2>(rj["intensity"], "randomization/intensity");
    if (rj.contains("ambient")) r.ambient = detail::read_vec3(rj["ambient"], "randomization/ambient");
    r.seed = detail::value_or<std::uint64_t>(rj, "seed", r.seed);
    r.validate();
  } catch (const Json::exception &e) {
    throw Error(Errc::kConfigError, std::string("randomization: ") + e.what());
  } catch (const Error &e) {
    if (e.code() == Errc::kConfigError) throw;
    throw Error(Errc::kConfigError, std::string("randomization: ") + e.what());
  }
  return r;
}

SceneConfig load_scene_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open scene config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_config(ss.str(), path.parent_path());
}

}  // namespace surgsynth
