#include "surgsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "json_util.hpp"
#include "surgsynth/error.hpp"

namespace surgsynth {

double e_te(const Vec3 &t_gt, const Vec3 &t_est) { return (t_gt - t_est).norm(); }

double e_re(const Mat3 &r_gt, const Mat3 &r_est) {
  const double c = std::clamp(((r_gt * r_est.transpose()).trace() - 1.0) / 2.0, -1.0, 1.0);
  return rad2deg(std::acos(c));
}

double e_mssd(const Pose &p_gt, const Pose &p_est, std::span<const Vec3> vertices,
              std::span<const Pose> symmetries) {
  const Pose identity = Pose::Identity();
  const std::span<const Pose> syms = symmetries.empty() ? std::span<const Pose>(&identity, 1) : symmetries;
  double best = std::numeric_limits<double>::infinity();
  for (const Pose &s : syms) {
    double worst = 0.0;
    for (const Vec3 &x : vertices) {
      worst = std::max(worst, (p_est * x - p_gt * (s * x)).norm());
      if (worst >= best) break;  // cannot improve on the current minimum
    }
    best = std::min(best, worst);
  }
  return best;
}

namespace {

struct GtEntry {
  GtKey key;
  Pose pose;
  double visib_fract = 0.0;
};

}  // namespace

EvaluationResult evaluate_estimates(const std::filesystem::path &gt_root,
                                    const std::vector<PoseEstimate> &estimates, double min_visib) {
  const std::map<int, ObjectModel> models = load_models(gt_root);
  std::map<GtKey, std::vector<GtEntry>> gt;
  EvaluationResult result;
  for (int scene_id : list_scene_ids(gt_root)) {
    const BopScene scene = read_scene(scene_dir(gt_root, scene_id));
    const BopSceneRecord &rec = scene.record();
    for (const auto &[im_id, list] : rec.gt) {
      const auto &infos = rec.gt_info.at(im_id);
      for (std::size_t k = 0; k < list.size(); ++k) {
        GtEntry e{{scene_id, im_id, list[k].obj_id}, list[k].pose, infos[k].visib_fract};
        gt[e.key].push_back(e);
        ++result.total_gt;
      }
    }
  }

  std::map<GtKey, std::vector<const PoseEstimate *>> by_key;
  for (const auto &est : estimates) {
    const GtKey key{est.scene_id, est.im_id, est.obj_id};
    if (!gt.count(key))
      throw Error(Errc::kMissingGt, "estimate for scene " + std::to_string(key.scene_id) + " im " +
                                        std::to_string(key.im_id) + " obj " + std::to_string(key.obj_id) +
                                        " has no ground truth");
    by_key[key].push_back(&est);
  }

  for (auto &[key, entries] : gt) {
    std::vector<GtEntry> eligible;
    for (const auto &e : entries) {
      if (e.visib_fract < min_visib) ++result.excluded;
      else eligible.push_back(e);
    }
    if (eligible.empty()) continue;
    auto model = models.find(key.obj_id);
    if (model == models.end())
      throw Error(Errc::kSchemaError, "models_info.json: no model for obj_id " + std::to_string(key.obj_id));

    std::vector<const PoseEstimate *> ests = by_key[key];
    std::stable_sort(ests.begin(), ests.end(),
                     [](const PoseEstimate *a, const PoseEstimate *b) { return a->score > b->score; });
    std::vector<bool> taken(eligible.size(), false);
    for (const PoseEstimate *est : ests) {
      const Pose p_est{est->rotation, est->translation};
      int pick = -1;
      double pick_err = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < eligible.size(); ++g) {
        if (taken[g]) continue;
        const double err = e_mssd(eligible[g].pose, p_est, model->second.mesh.vertices, model->second.symmetries);
        if (err < pick_err) pick = static_cast<int>(g), pick_err = err;
      }
      if (pick < 0) break;
      taken[pick] = true;
      const GtEntry &g = eligible[pick];
      MetricRecord r;
      r.scene_id = key.scene_id;
      r.im_id = key.im_id;
      r.obj_id = key.obj_id;
      r.e_te = e_te(g.pose.translation, p_est.translation);
      r.e_re = e_re(g.pose.rotation, p_est.rotation);
      r.e_mssd = pick_err;
      r.visib_fract = g.visib_fract;
      result.records.push_back(r);
    }
    for (std::size_t g = 0; g < eligible.size(); ++g) {
      if (taken[g]) continue;
      ++result.missing;
      result.missing_keys.push_back(key);
    }
  }
  return result;
}

EvaluationResult evaluate_run(const std::filesystem::path &gt_root, const std::filesystem::path &est_csv,
                              double min_visib) {
  return evaluate_estimates(gt_root, read_results_csv(est_csv), min_visib);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::kEmptyInput, "no values to summarize");
  SummaryStats s;
  s.n = static_cast<int>(values.size());
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double sum = 0.0;
  for (double x : values) sum += x;
  s.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double x : values) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(n));
  return s;
}

Histogram histogram(std::span<const double> values, int bins, double truncation) {
  if (bins < 1) throw Error(Errc::kInvalidParam, "histogram needs at least one bin");
  if (!(truncation > 0.0)) throw Error(Errc::kInvalidParam, "histogram truncation must be positive");
  Histogram h;
  h.truncation = truncation;
  h.bins = bins;
  h.counts.assign(static_cast<std::size_t>(bins) + 1, 0);
  for (double x : values) {
    if (x >= truncation) {
      ++h.counts.back();
      continue;
    }
    const auto b = static_cast<std::size_t>(std::max(0.0, std::floor(x / truncation * bins)));
    ++h.counts[std::min(b, static_cast<std::size_t>(bins) - 1)];
  }
  return h;
}

MetricSummary summarize_and_histogram(std::span<const MetricRecord> records, int bins, const Truncations &trunc) {
  if (records.empty()) throw Error(Errc::kEmptyInput, "no metric records");
  std::vector<double> te, re, mssd;
  for (const auto &r : records) {
    te.push_back(r.e_te);
    re.push_back(r.e_re);
    mssd.push_back(r.e_mssd);
  }
  MetricSummary s;
  s.te = summarize(te);
  s.re = summarize(re);
  s.mssd = summarize(mssd);
  s.te_hist = histogram(te, bins, trunc.e_te);
  s.re_hist = histogram(re, bins, trunc.e_re);
  s.mssd_hist = histogram(mssd, bins, trunc.e_mssd);
  return s;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

detail::Json stats_json(const SummaryStats &s) {
  return {{"n", s.n}, {"mean", s.mean}, {"std", s.std}, {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

detail::Json hist_json(const Histogram &h) {
  return {{"truncation", h.truncation}, {"bins", h.bins}, {"counts", h.counts}};
}

}  // namespace

std::string records_csv(std::span<const MetricRecord> records) {
  std::string out = "scene_id,im_id,obj_id,e_te_mm,e_re_deg,e_mssd_mm,visib_fract\n";
  for (const auto &r : records)
    out += std::to_string(r.scene_id) + "," + std::to_string(r.im_id) + "," + std::to_string(r.obj_id) + "," +
           g17(r.e_te) + "," + g17(r.e_re) + "," + g17(r.e_mssd) + "," + g17(r.visib_fract) + "\n";
  return out;
}

std::vector<MetricRecord> parse_records_csv(const std::string &text) {
  std::vector<MetricRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line.rfind("scene_id,", 0) != 0) throw Error(Errc::kParseError, "line 1: expected a metrics CSV header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw Error(Errc::kParseError, "line " + std::to_string(lineno) + ": expected 7 fields");
    try {
      MetricRecord r;
      r.scene_id = std::stoi(f[0]);
      r.im_id = std::stoi(f[1]);
      r.obj_id = std::stoi(f[2]);
      r.e_te = std::stod(f[3]);
      r.e_re = std::stod(f[4]);
      r.e_mssd = std::stod(f[5]);
      r.visib_fract = std::stod(f[6]);
      out.push_back(r);
    } catch (const std::exception &) {
      throw Error(Errc::kParseError, "line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

std::string histogram_csv(const MetricSummary &summary) {
  std::string out = "metric,bin_lo,bin_hi,count\n";
  auto emit = [&out](const char *name, const Histogram &h) {
    for (int b = 0; b < h.bins; ++b)
      out += std::string(name) + "," + g17(b * h.bin_width()) + "," + g17((b + 1) * h.bin_width()) + "," +
             std::to_string(h.counts[b]) + "\n";
    out += std::string(name) + "," + g17(h.truncation) + ",inf," + std::to_string(h.counts.back()) + "\n";
  };
  emit("e_mssd", summary.mssd_hist);
  emit("e_re", summary.re_hist);
  emit("e_te", summary.te_hist);
  return out;
}

std::string summary_json(const MetricSummary &summary, const EvaluationResult &result) {
  detail::Json j;
  j["evaluated"] = result.evaluated();
  j["excluded_by_visibility"] = result.excluded;
  j["missing"] = result.missing;
  j["total_gt"] = result.total_gt;
  j["e_mssd_mm"] = stats_json(summary.mssd);
  j["e_re_deg"] = stats_json(summary.re);
  j["e_te_mm"] = stats_json(summary.te);
  j["histograms"] = {{"e_mssd_mm", hist_json(summary.mssd_hist)},
                     {"e_re_deg", hist_json(summary.re_hist)},
                     {"e_te_mm", hist_json(summary.te_hist)}};
  return j.dump(2) + "\n";
}

std::string format_table(const MetricSummary &s, int n) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %14s %14s %14s\n", ("N=" + std::to_string(n)).c_str(), "e_MSSD [mm]",
                "e_RE [deg]", "e_TE [mm]");
  out += line;
  struct Row {
    const char *name;
    double SummaryStats::*field;
  };
  const Row rows[] = {{"mean", &SummaryStats::mean},
                      {"std", &SummaryStats::std},
                      {"median", &SummaryStats::median},
                      {"min", &SummaryStats::min},
                      {"max", &SummaryStats::max}};
  for (const auto &r : rows) {
    std::snprintf(line, sizeof(line), "%-8s %14.2f %14.2f %14.2f\n", r.name, s.mssd.*r.field, s.re.*r.field,
                  s.te.*r.field);
    out += line;
  }
  return out;
}

}  // namespace surgsynth
