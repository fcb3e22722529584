#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "surgsynth/bop_io.hpp"
#include "surgsynth/geometry.hpp"

namespace surgsynth {

// Euclidean translation error, mm.
double e_te(const Vec3 &t_gt, const Vec3 &t_est);

// Rotation angle of R_gt * R_est^T in degrees, in [0, 180].
double e_re(const Mat3 &r_gt, const Mat3 &r_est);

// min over S of max over x of |P_est x - P_gt S x|. symmetries must contain
// the identity (not checked); an empty set is treated as {identity}.
double e_mssd(const Pose &p_gt, const Pose &p_est, std::span<const Vec3> vertices,
              std::span<const Pose> symmetries);

struct MetricRecord {
  int scene_id = 0;
  int im_id = 0;
  int obj_id = 0;
  double e_te = 0.0;    // mm
  double e_re = 0.0;    // deg
  double e_mssd = 0.0;  // mm
  double visib_fract = 0.0;
};

struct GtKey {
  int scene_id = 0;
  int im_id = 0;
  int obj_id = 0;
  auto operator<=>(const GtKey &) const = default;
};

struct EvaluationResult {
  std::vector<MetricRecord> records;
  int total_gt = 0;   // GT instances in the dataset
  int excluded = 0;   // below min_visib
  int missing = 0;    // visible enough but no estimate
  std::vector<GtKey> missing_keys;

  int evaluated() const { return static_cast<int>(records.size()); }
};

// Joins estimates to GT instances on (scene_id, im_id, obj_id). GT below
// min_visib is excluded first; remaining GT without an estimate counts as
// missing. When several estimates share a key the highest score wins (ties:
// first in file order); several GT instances of one key are matched greedily
// by score then smallest e_mssd. Throws MissingGt for an estimate without a GT
// key; ParseError and SchemaError pass through.
EvaluationResult evaluate_run(const std::filesystem::path &gt_root, const std::filesystem::path &est_csv,
                              double min_visib = 0.3);
EvaluationResult evaluate_estimates(const std::filesystem::path &gt_root,
                                    const std::vector<PoseEstimate> &estimates, double min_visib = 0.3);

struct SummaryStats {
  int n = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Throws EmptyInput.
SummaryStats summarize(std::span<const double> values);

// bins equal-width bins over [0, truncation) plus a final overflow bin for
// values >= truncation.
struct Histogram {
  double truncation = 0.0;
  int bins = 0;
  std::vector<std::int64_t> counts;  // bins + 1 entries

  double bin_width() const { return truncation / bins; }
};

Histogram histogram(std::span<const double> values, int bins, double truncation);

struct Truncations {
  double e_mssd = 70.0;  // mm
  double e_re = 15.0;    // deg
  double e_te = 10.0;    // mm
};

struct MetricSummary {
  SummaryStats mssd, re, te;
  Histogram mssd_hist, re_hist, te_hist;
};

// Throws EmptyInput when records is empty, InvalidParam for bins < 1 or a
// non-positive truncation.
MetricSummary summarize_and_histogram(std::span<const MetricRecord> records, int bins,
                                      const Truncations &trunc = {});

std::string records_csv(std::span<const MetricRecord> records);
// Inverse of records_csv. Throws ParseError naming the line.
std::vector<MetricRecord> parse_records_csv(const std::string &text);
// Columns: metric,bin_lo,bin_hi,count; the overflow bin has bin_hi "inf".
std::string histogram_csv(const MetricSummary &summary);
std::string summary_json(const MetricSummary &summary, const EvaluationResult &result);
// Aligned text table: rows mean/std/median/min/max, columns e_MSSD, e_RE, e_TE.
std::string format_table(const MetricSummary &summary, int n);

}  // namespace surgsynth
