#include "surgsynth/service.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "json_util.hpp"
#include "surgsynth/error.hpp"
#include "surgsynth/generation.hpp"
#include "surgsynth/image_io.hpp"

namespace surgsynth {

using detail::Json;

LightSpec preview_lights(const ViewpointRandomization &rand) {
  DirectionalLight l;
  l.direction = rand.light_direction.normalized();
  l.intensity = Rgb::Constant(rand.intensity_range[1]);
  LightSpec spec;
  spec.lights.push_back(l);
  spec.ambient = rand.ambient;
  return spec;
}

CameraModel scale_camera(const CameraModel &cam, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(Errc::kInvalidParam, "preview size must be positive");
  if (width == cam.width && height == cam.height) return cam;
  const double sx = static_cast<double>(width) / cam.width;
  const double sy = static_cast<double>(height) / cam.height;
  CameraModel out = cam;
  out.fx = cam.fx * sx;
  out.fy = cam.fy * sy;
  out.cx = (cam.cx + 0.5) * sx - 0.5;
  out.cy = (cam.cy + 0.5) * sy - 0.5;
  out.width = width;
  out.height = height;
  return out;
}

namespace {

std::vector<SceneInstance> state_instances(const SceneConfig &scene, const EditorState &state) {
  std::vector<SceneInstance> out;
  for (const auto &spec : scene.instances) {
    const MeshEntry &m = scene.mesh(spec.mesh);
    SceneInstance si;
    si.instance_id = spec.instance_id;
    si.obj_id = spec.obj_id;
    si.mesh = m.mesh;
    auto it = state.poses.find(spec.instance_id);
    si.pose_world = it != state.poses.end() ? it->second : spec.pose;
    si.material = m.material;
    out.push_back(std::move(si));
  }
  return out;
}

}  // namespace

Preview render_preview(const SceneConfig &scene, const EditorState &state, int width, int height) {
  const CameraModel cam = scale_camera(scene.camera, width, height);
  EcmRig rig = scene.ecm;
  rig.joints = state.joints;
  rig.check_limits();
  const Pose cam_pose = ecm_forward_kinematics(rig);
  const auto instances = state_instances(scene, state);
  RenderOptions opts;
  opts.background = scene.background;
  Preview out;
  out.buffers = render_frame(instances, cam_pose, cam, preview_lights(scene.randomization), opts);
  RenderOptions mask_opts;
  mask_opts.shade = false;
  const Pose cam_inv = invert(cam_pose);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!scene.mesh(scene.instances[i].mesh).annotate) continue;
    const FrameBuffers alone =
        render_frame(std::span<const SceneInstance>(&instances[i], 1), cam_pose, cam, LightSpec{}, mask_opts);
    out.objects.push_back(
        {instances[i].instance_id, compute_gt_info(out.buffers, alone, instances[i], compose(cam_inv, instances[i].pose_world))});
  }
  return out;
}

const char *to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "unknown";
}

struct StudioService::Impl {
  SceneConfig scene;
  ServiceOptions options;
  httplib::Server server;
  int bound_port = -1;

  mutable std::mutex mu;
  EditorState state;
  Trajectory traj;
  std::map<int, JobStatus> jobs;
  int next_job = 1;
  bool job_active = false;
  std::thread worker;

  Impl(SceneConfig s, ServiceOptions o) : scene(std::move(s)), options(std::move(o)) {
    for (const auto &spec : scene.instances) {
      state.poses[spec.instance_id] = spec.pose;
      traj.instances.push_back({spec.instance_id, spec.obj_id, spec.mesh});
    }
    state.joints = scene.ecm.joints;
    traj.name = "studio";
    traj.source = "studio";
    routes();
  }

  ~Impl() {
    server.stop();
    if (worker.joinable()) worker.join();
  }

  static void send_json(httplib::Response &res, const Json &j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(2), "application/json");
  }

  static void send_error(httplib::Response &res, int status, const std::string &msg) {
    send_json(res, {{"error", msg}}, status);
  }

  static Json body_json(const httplib::Request &req) { return detail::parse_json(req.body, "request body"); }

  Json camera_json(const CameraModel &c) const {
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
            {"width", c.width}, {"height", c.height}, {"near_clip", c.near_clip}};
  }

  Json scene_json() const {
    Json j;
    j["camera"] = camera_json(scene.camera);
    Json limits = Json::array();
    for (const auto &l : scene.ecm.joint_limits) limits.push_back({l[0], l[1]});
    j["ecm"] = {{"joints", state.joints}, {"limits", limits}, {"base_pose", detail::pose_json(scene.ecm.base_pose)}};
    Json inst = Json::array();
    for (const auto &spec : scene.instances)
      inst.push_back({{"instance_id", spec.instance_id},
                      {"obj_id", spec.obj_id},
                      {"mesh", spec.mesh},
                      {"pose", detail::pose_json(state.poses.at(spec.instance_id))}});
    j["instances"] = inst;
    Json meshes = Json::array();
    for (const auto &[name, m] : scene.meshes)
      meshes.push_back({{"name", name},
                        {"vertices", m.mesh->vertices.size()},
                        {"triangles", m.mesh->triangles.size()},
                        {"annotate", m.annotate}});
    j["meshes"] = meshes;
    j["keyframes"] = traj.keyframes.size();
    return j;
  }

  Json job_json(const JobStatus &s) const {
    Json j = {{"job_id", s.job_id},
              {"state", to_string(s.state)},
              {"frames_done", s.frames_done},
              {"frames_total", s.frames_total}};
    if (s.state == JobState::kDone) j["manifest"] = s.manifest.string();
    if (s.state == JobState::kFailed) j["error"] = s.error;
    return j;
  }

  // Runs a handler, mapping domain errors to HTTP statuses.
  template <typename F>
  static void guarded(httplib::Response &res, F &&f) {
    try {
      f();
    } catch (const Error &e) {
      int status = 400;
      if (e.code() == Errc::kJointLimit) status = 422;
      else if (e.code() == Errc::kIoError) status = 500;
      send_error(res, status, e.what());
    } catch (const Json::exception &e) {
      send_error(res, 400, e.what());
    }
  }

  void routes() {
    server.Get("/api/scene", [this](const httplib::Request &, httplib::Response &res) {
      std::lock_guard lock(mu);
      send_json(res, scene_json());
    });

    server.Put(R"(/api/instance/(-?\d+)/pose)", [this](const httplib::Request &req, httplib::Response &res) {
      guarded(res, [&] {
        const int id = std::stoi(req.matches[1].str());
        const Json j = body_json(req);
        Pose pose;
        try {
          pose = detail::read_pose(j.is_object() && j.contains("pose") ? j["pose"] : j, "pose");
        } catch (const Error &e) {
          throw Error(Errc::kSchemaError, e.what());
        }
        std::lock_guard lock(mu);
        auto it = state.poses.find(id);
        if (it == state.poses.end()) return send_error(res, 404, "unknown instance " + std::to_string(id));
        it->second = pose;
        send_json(res, {{"instance_id", id}, {"pose", detail::pose_json(pose)}});
      });
    });

    server.Put("/api/ecm/joints", [this](const httplib::Request &req, httplib::Response &res) {
      guarded(res, [&] {
        const Json j = body_json(req);
        const auto q = detail::read_reals<4>(j.is_object() && j.contains("joints") ? j["joints"] : j, "joints");
        EcmRig rig = scene.ecm;
        rig.joints = {q[0], q[1], q[2], q[3]};
        rig.check_limits();
        std::lock_guard lock(mu);
        state.joints = rig.joints;
        send_json(res, {{"joints", state.joints}});
      });
    });

    server.Get("/api/preview", [this](const httplib::Request &req, httplib::Response &res) {
      guarded(res, [&] {
        EditorState snap;
        {
          std::lock_guard lock(mu);
          snap = state;
        }
        int w = scene.camera.width, h = scene.camera.height;
        if (req.has_param("width")) w = std::stoi(req.get_param_value("width"));
        if (req.has_param("height")) h = std::stoi(req.get_param_value("height"));
        if (w <= 0 || h <= 0 || w > 8192 || h > 8192) return send_error(res, 400, "preview size out of range");
        const Preview p = render_preview(scene, snap, w, h);
        Json info = Json::array();
        for (const auto &o : p.objects)
          info.push_back({{"instance_id", o.instance_id},
                          {"obj_id", o.info.obj_id},
                          {"px_count_all", o.info.px_count_all},
                          {"px_count_visib", o.info.px_count_visib},
                          {"visib_fract", o.info.visib_fract}});
        res.set_header("X-GtInfo", info.dump());
        const auto png = encode_png(make_rgb8(w, h, p.buffers.rgb));
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      });
    });

    server.Get("/api/trajectory", [this](const httplib::Request &, httplib::Response &res) {
      std::lock_guard lock(mu);
      res.set_content(trajectory_to_json(traj), "application/json");
    });

    server.Put("/api/trajectory", [this](const httplib::Request &req, httplib::Response &res) {
      guarded(res, [&] {
        Trajectory t = parse_trajectory(req.body);
        for (const auto &inst : t.instances) scene.mesh(inst.mesh);
        std::lock_guard lock(mu);
        traj = std::move(t);
        res.set_content(trajectory_to_json(traj), "application/json");
      });
    });

    server.Post("/api/trajectory/keyframe", [this](const httplib::Request &req, httplib::Response &res) {
      guarded(res, [&] {
        const Json j = body_json(req);
        if (!j.is_object() || !j.contains("t") || !j["t"].is_number())
          return send_error(res, 400, "body needs a numeric t");
        const double t = j["t"].get<double>();
        std::lock_guard lock(mu);
        Keyframe kf;
        kf.t = t;
        for (const auto &inst : traj.instances) {
          auto it = state.poses.find(inst.instance_id);
          if (it == state.poses.end())
            return send_error(res, 400, "trajectory instance " + std::to_string(inst.instance_id) + " not in scene");
          kf.poses[inst.instance_id] = it->second;
        }
        kf.ecm = state.joints;
        if (!traj.keyframes.empty()) {
          const Keyframe &last = traj.keyframes.back();
          // Re-posting the last keyframe unchanged is a no-op.
          bool same = last.t == t && last.ecm == kf.ecm && last.poses.size() == kf.poses.size();
          for (const auto &[id, p] : kf.poses) {
            auto it = last.poses.find(id);
            same = same && it != last.poses.end() && it->second.rotation == p.rotation &&
                   it->second.translation == p.translation;
          }
          if (same) return send_json(res, {{"keyframes", traj.keyframes.size()}});
          if (!(t > last.t))
            return send_error(res, 400, "keyframe timestamps must increase (last is " + std::to_string(last.t) + ")");
        }
        traj.keyframes.push_back(std::move(kf));
        send_json(res, {{"keyframes", traj.keyframes.size()}});
      });
    });

    server.Post("/api/jobs", [this](const httplib::Request &req, httplib::Response &res) {
      guarded(res, [&] { start_job(req, res); });
    });

    server.Get(R"(/api/jobs/(\d+))", [this](const httplib::Request &req, httplib::Response &res) {
      std::lock_guard lock(mu);
      auto it = jobs.find(std::stoi(req.matches[1].str()));
      if (it == jobs.end()) return send_error(res, 404, "unknown job " + req.matches[1].str());
      send_json(res, job_json(it->second));
    });
  }

  void start_job(const httplib::Request &req, httplib::Response &res) {
    GenerationJob job;
    job.scene = scene;
    job.randomization = scene.randomization;
    job.trajectory_label = "studio";
    int id = 0;
    {
      std::lock_guard lock(mu);
      if (job_active) return send_error(res, 409, "a generation job is already running");
      job.trajectory = traj;
      id = next_job;
    }
    if (job.trajectory.keyframes.size() < 2) return send_error(res, 400, "trajectory needs at least 2 keyframes");
    char dir[32];
    std::snprintf(dir, sizeof(dir), "job_%06d", id);
    job.output = options.output_root / dir;
    apply_job_options(req.body.empty() ? "{}" : req.body, options.output_root, job);
    job.validate();

    std::lock_guard lock(mu);
    if (job_active) return send_error(res, 409, "a generation job is already running");
    ++next_job;
    JobStatus status;
    status.job_id = id;
    status.frames_total = job.replays * static_cast<int>(job.sample_times().size());
    jobs[id] = status;
    job_active = true;
    if (worker.joinable()) worker.join();
    worker = std::thread([this, id, job = std::move(job)] { run_job(id, job); });
    send_json(res, job_json(status), 202);
  }

  void run_job(int id, const GenerationJob &job) {
    {
      std::lock_guard lock(mu);
      jobs[id].state = JobState::kRunning;
    }
    GenerationProgress progress;
    progress.on_frame = [this, id](int done, int total) {
      std::lock_guard lock(mu);
      jobs[id].frames_done = done;
      jobs[id].frames_total = total;
    };
    std::string error;
    try {
      run_generation(job, progress);
    } catch (const std::exception &e) {
      error = e.what();
    }
    std::lock_guard lock(mu);
    JobStatus &s = jobs[id];
    if (error.empty()) {
      s.state = JobState::kDone;
      s.manifest = job.output / "manifest.json";
    } else {
      s.state = JobState::kFailed;
      s.error = error;
    }
    job_active = false;
    job_cv.notify_all();
  }

  std::condition_variable job_cv;
};

StudioService::StudioService(SceneConfig scene, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(scene), std::move(options))) {}

StudioService::~StudioService() = default;

int StudioService::bind() {
  auto &s = impl_->server;
  const int port = impl_->options.port == 0 ? s.bind_to_any_port(impl_->options.host)
                                            : (s.bind_to_port(impl_->options.host, impl_->options.port)
                                                   ? impl_->options.port
                                                   : -1);
  if (port < 0)
    throw Error(Errc::kIoError, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  impl_->bound_port = port;
  return port;
}

void StudioService::listen() { impl_->server.listen_after_bind(); }

void StudioService::stop() { impl_->server.stop(); }

void StudioService::wait_for_jobs() {
  std::unique_lock lock(impl_->mu);
  impl_->job_cv.wait(lock, [this] { return !impl_->job_active; });
}

EditorState StudioService::state() const {
  std::lock_guard lock(impl_->mu);
  return impl_->state;
}

Trajectory StudioService::trajectory() const {
  std::lock_guard lock(impl_->mu);
  return impl_->traj;
}

std::optional<JobStatus> StudioService::job(int job_id) const {
  std::lock_guard lock(impl_->mu);
  auto it = impl_->jobs.find(job_id);
  if (it == impl_->jobs.end()) return std::nullopt;
  return it->second;
}

}  // namespace surgsynth
