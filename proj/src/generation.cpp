#include "surgsynth/generation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "surgsynth/error.hpp"

namespace surgsynth {

using detail::Json;

std::vector<std::uint8_t> instance_mask(const FrameBuffers &fb, std::int32_t instance_id) {
  std::vector<std::uint8_t> mask(fb.instance_id.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = fb.instance_id[i] == instance_id ? 1 : 0;
  return mask;
}

ObjectAnnotation annotate_object(const FrameBuffers &full, const FrameBuffers &object_only,
                                 const SceneInstance &instance, const Pose &pose_cam) {
  if (full.width != object_only.width || full.height != object_only.height)
    throw Error(Errc::kResolutionMismatch,
                "full render is " + std::to_string(full.width) + "x" + std::to_string(full.height) +
                    ", object render is " + std::to_string(object_only.width) + "x" +
                    std::to_string(object_only.height));
  ObjectAnnotation a;
  a.mask = instance_mask(object_only, instance.instance_id);
  a.mask_visib = instance_mask(full, instance.instance_id);

  GtInfo &g = a.info;
  g.obj_id = instance.obj_id;
  g.pose_cam = pose_cam;
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    g.px_count_all += a.mask[i];
    g.px_count_visib += a.mask_visib[i];
  }
  g.bbox_obj = mask_bbox(full.width, full.height, a.mask);
  g.bbox_visib = mask_bbox(full.width, full.height, a.mask_visib);
  g.visib_fract = g.px_count_all > 0
                      ? static_cast<double>(g.px_count_visib) / static_cast<double>(g.px_count_all)
                      : 0.0;
  return a;
}

GtInfo compute_gt_info(const FrameBuffers &full, const FrameBuffers &object_only,
                       const SceneInstance &instance, const Pose &pose_cam) {
  return annotate_object(full, object_only, instance, pose_cam).info;
}

FilterDecision frame_filter(const GtInfo &info, double min_visib) {
  if (info.px_count_visib <= 0) return {false, kReasonNotPresent};
  if (info.visib_fract < min_visib) return {false, kReasonBelowThreshold};
  return {true, {}};
}

void GenerationJob::validate() const {
  if (replays < 1) throw Error(Errc::kConfigError, "replays must be >= 1");
  if (!(min_visib >= 0.0 && min_visib <= 1.0)) throw Error(Errc::kConfigError, "min_visib must lie in [0, 1]");
  if (!(depth_scale > 0.0)) throw Error(Errc::kConfigError, "depth_scale must be positive");
  if (scene_id_base < 0) throw Error(Errc::kConfigError, "scene_id_base must be >= 0");
  if (frames_per_replay && sample_rate_hz)
    throw Error(Errc::kConfigError, "set frames_per_replay or sample_rate_hz, not both");
  if (frames_per_replay && *frames_per_replay < 1) throw Error(Errc::kConfigError, "frames_per_replay must be >= 1");
  if (sample_rate_hz && !(*sample_rate_hz > 0.0)) throw Error(Errc::kConfigError, "sample_rate_hz must be positive");
  if (output.empty()) throw Error(Errc::kConfigError, "output directory not set");
  trajectory.validate();
  try {
    scene.camera.validate();
    randomization.validate();
  } catch (const Error &e) {
    throw Error(Errc::kConfigError, e.what());
  }
  for (const auto &inst : trajectory.instances) {
    scene.mesh(inst.mesh);
    if (inst.instance_id <= 0 || inst.obj_id <= 0)
      throw Error(Errc::kConfigError, "instance and object ids must be positive");
  }
  // One mesh per obj_id, since models are written per object.
  std::map<int, std::string> obj_mesh;
  for (const auto &inst : trajectory.instances) {
    auto [it, fresh] = obj_mesh.emplace(inst.obj_id, inst.mesh);
    if (!fresh && it->second != inst.mesh)
      throw Error(Errc::kConfigError, "obj_id " + std::to_string(inst.obj_id) + " maps to two meshes");
  }
}

std::vector<double> GenerationJob::sample_times() const {
  const double t0 = trajectory.start_time();
  const double t1 = trajectory.end_time();
  std::vector<double> times;
  if (frames_per_replay) {
    const int n = *frames_per_replay;
    if (n == 1) return {t0};
    for (int k = 0; k < n; ++k) times.push_back(k + 1 == n ? t1 : t0 + (t1 - t0) * k / (n - 1));
    return times;
  }
  const double rate = sample_rate_hz.value_or(10.0);
  // Tolerate rounding so a span that is an exact multiple of the period ends
  // on the last keyframe.
  const auto count = static_cast<long>(std::floor((t1 - t0) * rate + 1e-9)) + 1;
  for (long k = 0; k < count; ++k) times.push_back(std::min(t1, t0 + static_cast<double>(k) / rate));
  return times;
}

namespace {

std::string read_text(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void apply_job_options(const std::string &json_text, const std::filesystem::path &base_dir,
                       GenerationJob &job) {
  const Json j = detail::parse_json(json_text, "job");
  if (!j.is_object()) throw Error(Errc::kConfigError, "job must be a JSON object");
  try {
    job.replays = detail::value_or(j, "replays", job.replays);
    if (j.contains("sample_rate_hz")) {
      job.sample_rate_hz = j["sample_rate_hz"].get<double>();
      job.frames_per_replay.reset();
    }
    if (j.contains("frames_per_replay")) {
      job.frames_per_replay = j["frames_per_replay"].get<int>();
      if (!j.contains("sample_rate_hz")) job.sample_rate_hz.reset();
    }
    job.min_visib = detail::value_or(j, "min_visib", job.min_visib);
    job.scene_id_base = detail::value_or(j, "scene_id_base", job.scene_id_base);
    job.depth_scale = detail::value_or(j, "depth_scale", job.depth_scale);
    if (j.contains("randomization"))
      job.randomization = parse_randomization(j["randomization"].dump(), job.randomization);
    job.randomization.seed = detail::value_or<std::uint64_t>(j, "seed", job.randomization.seed);
    if (j.contains("output")) {
      std::filesystem::path out = j["output"].get<std::string>();
      job.output = out.is_relative() ? base_dir / out : out;
    }
  } catch (const Json::exception &e) {
    throw Error(Errc::kConfigError, std::string("job: ") + e.what());
  } catch (const Error &e) {
    if (e.code() != Errc::kSchemaError) throw;
    throw Error(Errc::kConfigError, std::string("job: ") + e.what());
  }
}

GenerationJob parse_job(const std::string &json_text, const std::filesystem::path &base_dir) {
  const Json j = detail::parse_json(json_text, "job");
  if (!j.is_object() || !j.contains("scene") || !j.contains("trajectory"))
    throw Error(Errc::kConfigError, "job needs scene and trajectory");
  GenerationJob job;
  const Json &sj = j["scene"];
  if (sj.is_string()) {
    std::filesystem::path p = sj.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    job.scene = load_scene_config(p);
  } else {
    job.scene = parse_scene_config(sj.dump(), base_dir);
  }
  const Json &tj = j["trajectory"];
  if (tj.is_string()) {
    std::filesystem::path p = tj.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    job.trajectory = load_trajectory(p);
    job.trajectory_label = p.filename().string();
  } else {
    try {
      job.trajectory = parse_trajectory(tj.dump());
    } catch (const Error &e) {
      if (e.code() == Errc::kConfigError) throw;
      throw Error(Errc::kConfigError, std::string("trajectory: ") + e.what());
    }
  }
  if (job.trajectory_label.empty()) job.trajectory_label = job.trajectory.name;
  job.randomization = job.scene.randomization;
  apply_job_options(json_text, base_dir, job);
  return job;
}

GenerationJob load_job(const std::filesystem::path &path) {
  return parse_job(read_text(path), path.parent_path());
}

std::vector<SceneInstance> build_instances(const SceneConfig &scene, const Trajectory &traj,
                                           const SceneState &state) {
  std::vector<SceneInstance> out;
  out.reserve(traj.instances.size());
  for (const auto &ti : traj.instances) {
    const MeshEntry &m = scene.mesh(ti.mesh);
    auto it = state.poses.find(ti.instance_id);
    if (it == state.poses.end())
      throw Error(Errc::kConfigError, "no pose for instance " + std::to_string(ti.instance_id));
    SceneInstance si;
    si.instance_id = ti.instance_id;
    si.obj_id = ti.obj_id;
    si.mesh = m.mesh;
    si.pose_world = it->second;
    si.material = m.material;
    out.push_back(std::move(si));
  }
  return out;
}

bool apply_offsets(const EcmRig &limits_from, const EcmJoints &nominal, const EcmJoints &offsets,
                   EcmJoints &out) {
  bool clamped = false;
  for (int i = 0; i < 4; ++i) {
    const double wanted = nominal[i] + offsets[i];
    out[i] = std::clamp(wanted, limits_from.joint_limits[i][0], limits_from.joint_limits[i][1]);
    clamped |= out[i] != wanted;
  }
  return clamped;
}

DatasetManifest run_generation(const GenerationJob &job, const GenerationProgress &progress) {
  job.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(job.output, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create " + job.output.string() + ": " + ec.message());
  fs::remove(job.output / "manifest.json", ec);
  if (ec) throw Error(Errc::kIoError, "cannot remove stale manifest: " + ec.message());

  const std::vector<double> times = job.sample_times();

  DatasetManifest manifest;
  manifest.seed = job.randomization.seed;
  manifest.camera = job.scene.camera;
  manifest.depth_scale = job.depth_scale;
  manifest.samples_per_replay = static_cast<int>(times.size());
  manifest.min_visib = job.min_visib;

  std::map<int, ObjectModel> models;
  std::vector<bool> annotated;
  for (const auto &ti : job.trajectory.instances) {
    const MeshEntry &m = job.scene.mesh(ti.mesh);
    annotated.push_back(m.annotate);
    if (!m.annotate || models.count(ti.obj_id)) continue;
    ObjectModel om;
    om.mesh = *m.mesh;
    om.symmetries.push_back(Pose::Identity());
    om.symmetries.insert(om.symmetries.end(), m.symmetries.begin(), m.symmetries.end());
    om.diameter = mesh_diameter(om.mesh);
    models.emplace(ti.obj_id, std::move(om));
  }
  if (models.empty()) throw Error(Errc::kConfigError, "no annotated objects in the trajectory");
  for (const auto &[id, _] : models) manifest.annotated_obj_ids.push_back(id);
  write_models(job.output, models);

  EcmRig nominal_rig = job.scene.ecm;
  nominal_rig.joints = job.trajectory.keyframes.front().ecm;
  try {
    nominal_rig.check_limits();
  } catch (const Error &e) {
    throw Error(Errc::kConfigError, std::string("trajectory start: ") + e.what());
  }

  const int frames_total = job.replays * static_cast<int>(times.size());
  int frames_done = 0;
  RenderOptions full_opts;
  full_opts.background = job.scene.background;
  RenderOptions mask_opts;
  mask_opts.shade = false;

  for (int r = 0; r < job.replays; ++r) {
    const ViewpointSample vp = sample_viewpoint(nominal_rig, job.randomization, static_cast<std::uint64_t>(r));
    ReplayRecord rec;
    rec.scene_id = job.scene_id_base + r;
    rec.trajectory = job.trajectory_label;
    rec.replay_index = r;
    rec.joint_offsets = vp.offsets;
    rec.light = vp.lights;

    const fs::path dir = scene_dir(job.output, rec.scene_id);
    fs::remove_all(dir, ec);
    if (ec) throw Error(Errc::kIoError, "cannot clear " + dir.string() + ": " + ec.message());
    BopSceneWriter writer(dir, job.depth_scale);

    int clamped_frames = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const SceneState state = trajectory_sample(job.trajectory, times[k]);
      EcmRig rig = job.scene.ecm;
      if (apply_offsets(rig, state.ecm, vp.offsets, rig.joints)) ++clamped_frames;
      const Pose cam_pose = ecm_forward_kinematics(rig);
      const std::vector<SceneInstance> instances = build_instances(job.scene, job.trajectory, state);
      const FrameBuffers full = render_frame(instances, cam_pose, job.scene.camera, vp.lights, full_opts);

      AnnotatedFrame frame;
      frame.im_id = static_cast<int>(k);
      frame.camera = job.scene.camera;
      frame.buffers = &full;
      bool keep = false;
      std::string reason = kReasonNotPresent;
      const Pose cam_inv = invert(cam_pose);
      for (std::size_t i = 0; i < instances.size(); ++i) {
        if (!annotated[i]) continue;
        const FrameBuffers alone = render_frame(std::span<const SceneInstance>(&instances[i], 1), cam_pose,
                                                job.scene.camera, vp.lights, mask_opts);
        ObjectAnnotation a = annotate_object(full, alone, instances[i], compose(cam_inv, instances[i].pose_world));
        const FilterDecision d = frame_filter(a.info, job.min_visib);
        if (d.keep) {
          keep = true;
        } else if (d.reason == kReasonBelowThreshold) {
          reason = d.reason;
        }
        frame.objects.push_back(std::move(a));
      }
      if (keep) {
        writer.add_frame(frame);
        ++rec.frame_count;
      } else {
        rec.dropped.push_back({static_cast<int>(k), times[k], reason});
      }
      ++frames_done;
      if (progress.on_frame) progress.on_frame(frames_done, frames_total);
    }
    writer.finalize();
    rec.dropped_count = static_cast<int>(rec.dropped.size());
    rec.warnings = vp.warnings;
    if (clamped_frames > 0)
      rec.warnings.push_back(std::to_string(clamped_frames) + " frame(s) had camera joints clamped to limits");
    if (progress.on_replay) progress.on_replay(rec);
    manifest.scenes.push_back(std::move(rec));
  }

  const fs::path tmp = job.output / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << manifest_to_json(manifest);
    if (!out) throw Error(Errc::kIoError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, job.output / "manifest.json", ec);
  if (ec) throw Error(Errc::kIoError, "cannot finalize manifest: " + ec.message());
  return manifest;
}

}  // namespace surgsynth
