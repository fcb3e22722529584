#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surgsynth/bop_io.hpp"
#include "surgsynth/render.hpp"
#include "surgsynth/scene.hpp"
#include "surgsynth/trajectory.hpp"

namespace surgsynth {

// Lighting used for previews: the randomization's nominal direction, its
// upper intensity and its ambient term.
LightSpec preview_lights(const ViewpointRandomization &rand);

// Intrinsics resampled to a new resolution, keeping pixel centers aligned.
CameraModel scale_camera(const CameraModel &cam, int width, int height);

struct EditorState {
  std::map<int, Pose> poses;  // instance_id -> world pose
  EcmJoints joints{};
};

struct PreviewObject {
  int instance_id = 0;
  GtInfo info;
};

struct Preview {
  FrameBuffers buffers;
  std::vector<PreviewObject> objects;  // annotated instances only
};

// Renders the editor state exactly as the generator renders a frame with the
// preview lights and no viewpoint offsets.
Preview render_preview(const SceneConfig &scene, const EditorState &state, int width, int height);

enum class JobState { kQueued, kRunning, kDone, kFailed };
const char *to_string(JobState s);

struct JobStatus {
  int job_id = 0;
  JobState state = JobState::kQueued;
  int frames_done = 0;
  int frames_total = 0;
  std::filesystem::path manifest;  // set when done
  std::string error;               // set when failed
};

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path output_root = "studio_jobs";
};

// HTTP/JSON adapter over the scene model, renderer and generator. Scene state
// sits behind one mutex; previews render a snapshot. At most one generation
// job runs at a time.
class StudioService {
 public:
  StudioService(SceneConfig scene, ServiceOptions options);
  ~StudioService();
  StudioService(const StudioService &) = delete;
  StudioService &operator=(const StudioService &) = delete;

  // Binds the listening socket; returns the bound port. Throws IoError.
  int bind();
  // Serves until stop(). Call bind() first.
  void listen();
  void stop();
  // Blocks until the current job (if any) finishes.
  void wait_for_jobs();

  EditorState state() const;
  Trajectory trajectory() const;
  std::optional<JobStatus> job(int job_id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace surgsynth
