#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surgsynth/bop_io.hpp"
#include "surgsynth/manifest.hpp"
#include "surgsynth/render.hpp"
#include "surgsynth/scene.hpp"
#include "surgsynth/trajectory.hpp"

namespace surgsynth {

// 0/1 mask of the pixels owned by instance_id.
std::vector<std::uint8_t> instance_mask(const FrameBuffers &fb, std::int32_t instance_id);

// Visible mask = pixels the instance wins in the full render, projected mask
// = pixels it covers when rendered alone. visib_fract = visible / projected
// (0 when nothing projects). Throws ResolutionMismatch.
GtInfo compute_gt_info(const FrameBuffers &full, const FrameBuffers &object_only,
                       const SceneInstance &instance, const Pose &pose_cam);

// compute_gt_info plus the two masks.
ObjectAnnotation annotate_object(const FrameBuffers &full, const FrameBuffers &object_only,
                                 const SceneInstance &instance, const Pose &pose_cam);

inline constexpr const char *kReasonNotPresent = "not present";
inline constexpr const char *kReasonBelowThreshold = "below visibility threshold";

struct FilterDecision {
  bool keep = true;
  std::string reason;  // empty when kept
};

// keep = px_count_visib > 0 and visib_fract >= min_visib.
FilterDecision frame_filter(const GtInfo &info, double min_visib);

struct GenerationJob {
  SceneConfig scene;
  Trajectory trajectory;
  std::string trajectory_label;  // recorded in the manifest
  std::optional<double> sample_rate_hz;
  std::optional<int> frames_per_replay;
  int replays = 1;
  ViewpointRandomization randomization;
  double min_visib = 0.0;
  std::filesystem::path output;
  int scene_id_base = 0;
  double depth_scale = 0.1;

  // Throws ConfigError.
  void validate() const;
  // 10 Hz over the trajectory span unless frames_per_replay or
  // sample_rate_hz is set.
  std::vector<double> sample_times() const;
};

inline FilterDecision frame_filter(const GtInfo &info, const GenerationJob &job) {
  return frame_filter(info, job.min_visib);
}

// Applies the non-scene keys of a job document (replays, sample_rate_hz,
// frames_per_replay, min_visib, scene_id_base, depth_scale, seed,
// randomization, output) on top of job.
void apply_job_options(const std::string &json_text, const std::filesystem::path &base_dir,
                       GenerationJob &job);

// Job document: the keys above plus "scene" and "trajectory", each a path
// (relative to the job file) or an inline object.
GenerationJob parse_job(const std::string &json_text, const std::filesystem::path &base_dir);
GenerationJob load_job(const std::filesystem::path &path);

struct GenerationProgress {
  std::function<void(int frames_done, int frames_total)> on_frame;
  std::function<void(const ReplayRecord &)> on_replay;
};

// Replays the trajectory job.replays times. Replay r draws its camera offsets
// and lighting from (seed, r), renders every sample, annotates, filters and
// writes BOP scene scene_id_base + r. manifest.json is deleted first and
// written last, so a directory without it is incomplete. Equal jobs produce
// byte-identical output trees.
DatasetManifest run_generation(const GenerationJob &job, const GenerationProgress &progress = {});

// The instances of the trajectory at one state, materials from the scene.
std::vector<SceneInstance> build_instances(const SceneConfig &scene, const Trajectory &traj,
                                           const SceneState &state);

// Joint vector of a sample: trajectory joints plus the replay offsets, clamped
// to the rig limits. Returns true when clamping happened.
bool apply_offsets(const EcmRig &limits_from, const EcmJoints &nominal, const EcmJoints &offsets,
                   EcmJoints &out);

}  // namespace surgsynth
