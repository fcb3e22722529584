#include "surgsynth/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "surgsynth/bop_io.hpp"
#include "surgsynth/error.hpp"
#include "surgsynth/generation.hpp"
#include "surgsynth/metrics.hpp"
#include "surgsynth/pnp.hpp"
#include "surgsynth/service.hpp"

namespace surgsynth {
namespace {

void write_file(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

StudioService *g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int cli_dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Synthetic surgical-needle dataset generator and pose evaluation toolkit", "surgsynth"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto *gen = app.add_subcommand("generate", "Render and annotate a dataset from a job config");
  std::string job_path, out_dir;
  std::optional<std::uint64_t> seed;
  gen->add_option("--job", job_path, "Job config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "Output dataset root (overrides the job)");
  gen->add_option("--seed", seed, "Randomization seed (overrides the job)");

  auto *eval = app.add_subcommand("eval", "Evaluate a BOP results CSV against a dataset");
  std::string gt_dir, est_path, eval_out = "eval";
  double min_visib = 0.3;
  int bins = 20;
  eval->add_option("--gt", gt_dir, "Ground-truth dataset root")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--est", est_path, "Estimates (BOP results CSV)")->required()->check(CLI::ExistingFile);
  eval->add_option("--min-visib", min_visib, "Exclude GT below this visibility fraction")->capture_default_str();
  eval->add_option("--out", eval_out, "Directory for metrics.csv, summary.json, histograms.csv")->capture_default_str();
  eval->add_option("--bins", bins, "Histogram bins")->capture_default_str();

  auto *stats = app.add_subcommand("stats", "Summaries and histograms of a metrics CSV");
  std::string metrics_path, stats_out;
  Truncations trunc;
  stats->add_option("--metrics", metrics_path, "metrics.csv from eval")->required()->check(CLI::ExistingFile);
  stats->add_option("--bins", bins, "Histogram bins")->capture_default_str();
  stats->add_option("--trunc-mssd", trunc.e_mssd, "e_MSSD truncation (mm)")->capture_default_str();
  stats->add_option("--trunc-re", trunc.e_re, "e_RE truncation (deg)")->capture_default_str();
  stats->add_option("--trunc-te", trunc.e_te, "e_TE truncation (mm)")->capture_default_str();
  stats->add_option("--out", stats_out, "Write histograms CSV here");

  auto *val = app.add_subcommand("validate", "Check a dataset for internal consistency");
  ValidationOptions vopts;
  bool no_manifest = false;
  val->add_option("--gt,dataset", gt_dir, "Dataset root")->required()->check(CLI::ExistingDirectory);
  val->add_option("--frames", vopts.frames_per_scene, "Image-checked frames per scene (0 = all)")->capture_default_str();
  val->add_flag("--no-manifest", no_manifest, "Do not require manifest.json");

  auto *pnp = app.add_subcommand("pnp", "Solve PnP from a correspondence CSV (x,y,z,u,v)");
  std::string corr_path, scene_path;
  int scene_id = 0, im_id = 0, obj_id = 1;
  pnp->add_option("--corr", corr_path, "Correspondences CSV")->required()->check(CLI::ExistingFile);
  pnp->add_option("--scene", scene_path, "Scene config providing the camera")->required()->check(CLI::ExistingFile);
  pnp->add_option("--scene-id", scene_id, "scene_id of the output row");
  pnp->add_option("--im-id", im_id, "im_id of the output row");
  pnp->add_option("--obj-id", obj_id, "obj_id of the output row");
  pnp->add_option("--out", out_dir, "Write the results CSV here instead of standard output");

  auto *serve = app.add_subcommand("serve", "Start the HTTP service for the trajectory studio");
  ServiceOptions sopts;
  serve->add_option("--scene", scene_path, "Scene config")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", sopts.port, "TCP port")->capture_default_str();
  serve->add_option("--host", sopts.host, "Bind address")->capture_default_str();
  serve->add_option("--out", sopts.output_root, "Root for job outputs")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion &) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) {
      GenerationJob job = load_job(job_path);
      if (!out_dir.empty()) job.output = out_dir;
      if (seed) job.randomization.seed = *seed;
      GenerationProgress progress;
      progress.on_replay = [&out, &job](const ReplayRecord &r) {
        out << "replay " << r.replay_index + 1 << "/" << job.replays << " scene_id " << r.scene_id << ": "
            << r.frame_count << " kept, " << r.dropped_count << " dropped\n"
            << std::flush;
      };
      run_generation(job, progress);
      out << "wrote " << (job.output / "manifest.json").string() << "\n";
    } else if (eval->parsed()) {
      const EvaluationResult res = evaluate_run(gt_dir, est_path, min_visib);
      out << "GT instances " << res.total_gt << ", evaluated " << res.evaluated() << ", excluded (visibility) "
          << res.excluded << ", missing " << res.missing << "\n";
      write_file(std::filesystem::path(eval_out) / "metrics.csv", records_csv(res.records));
      if (!res.records.empty()) {
        const MetricSummary s = summarize_and_histogram(res.records, bins);
        write_file(std::filesystem::path(eval_out) / "summary.json", summary_json(s, res));
        write_file(std::filesystem::path(eval_out) / "histograms.csv", histogram_csv(s));
        out << format_table(s, res.evaluated());
      } else {
        err << "no evaluated records; summary not written\n";
      }
    } else if (stats->parsed()) {
      const auto records = parse_records_csv(read_file(metrics_path));
      const MetricSummary s = summarize_and_histogram(records, bins, trunc);
      out << format_table(s, static_cast<int>(records.size()));
      if (!stats_out.empty()) write_file(stats_out, histogram_csv(s));
    } else if (val->parsed()) {
      vopts.require_manifest = !no_manifest;
      const ValidationReport rep = validate_dataset(gt_dir, vopts);
      for (const auto &n : rep.notes) out << "note: " << n << "\n";
      for (const auto &v : rep.violations) out << "violation: " << v << "\n";
      out << rep.scenes_checked << " scene(s), " << rep.frames_checked << " frame(s), " << rep.violations.size()
          << " violation(s)\n";
      return rep.ok() ? 0 : 1;
    } else if (pnp->parsed()) {
      const SceneConfig scene = load_scene_config(scene_path);
      const auto corrs = read_correspondences_csv(corr_path);
      const PnpResult r = solve_pnp(corrs, scene.camera);
      PoseEstimate est;
      est.scene_id = scene_id;
      est.im_id = im_id;
      est.obj_id = obj_id;
      est.rotation = r.pose.rotation;
      est.translation = r.pose.translation;
      const std::string csv = format_results_csv({est});
      if (out_dir.empty()) out << csv;
      else write_file(out_dir, csv);
      err << "rmse " << r.rmse << " px (initial " << r.initial_rmse << ", " << r.iterations << " iterations)\n";
    } else if (serve->parsed()) {
      StudioService service(load_scene_config(scene_path), sopts);
      const int port = service.bind();
      out << "listening on http://" << sopts.host << ":" << port << "\n" << std::flush;
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen();
      g_service = nullptr;
    }
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cli_dispatch(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace surgsynth
