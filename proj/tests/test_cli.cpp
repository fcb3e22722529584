#include <gtest/gtest.h>

#include <sstream>
#include <sys/wait.h>

#include "pnp_helpers.hpp"
#include "support.hpp"
#include "surgsynth/bop_io.hpp"
#include "surgsynth/cli.hpp"
#include "surgsynth/manifest.hpp"
#include "surgsynth/metrics.hpp"

using namespace surgsynth;
using namespace surgsynth::testing;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

const std::filesystem::path kFixtures = SURGSYNTH_FIXTURE_DIR;

// GT poses of a generated dataset written back as estimates.
void write_perfect_estimates(const std::filesystem::path &root, const std::filesystem::path &csv) {
  std::vector<PoseEstimate> est;
  for (int sid : list_scene_ids(root)) {
    const BopScene s = read_scene(scene_dir(root, sid));
    for (const auto &[im, gts] : s.record().gt)
      for (const auto &g : gts) {
        PoseEstimate e;
        e.scene_id = sid;
        e.im_id = im;
        e.obj_id = g.obj_id;
        e.rotation = g.pose.rotation;
        e.translation = g.pose.translation;
        est.push_back(e);
      }
  }
  write_results_csv(csv, est);
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  const CliRun r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("generate"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"eval", "--gt"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, BinaryExitCodes) {
  const std::string cli = SURGSYNTH_CLI_PATH;
  int status = std::system((cli + " frobnicate > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
  status = std::system((cli + " --version > /dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

TEST(Cli, GenerateValidateEvalStats) {
  TempDir dir;
  const auto data = dir / "data";
  CliRun r = run({"generate", "--job", (kFixtures / "job.json").string(), "--out", data.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("replay 1/2 scene_id 0: 3 kept, 0 dropped"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("replay 2/2"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(data / "manifest.json"));
  EXPECT_EQ(load_manifest(data / "manifest.json").seed, 5u);

  r = run({"validate", "--gt", data.string()});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("0 violation(s)"), std::string::npos);

  write_perfect_estimates(data, dir / "est.csv");
  r = run({"eval", "--gt", data.string(), "--est", (dir / "est.csv").string(), "--min-visib", "0.3", "--out",
           (dir / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "eval/metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "eval/summary.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "eval/histograms.csv"));
  EXPECT_NE(r.out.find("e_MSSD"), std::string::npos);
  for (const auto &m : parse_records_csv(read_bytes(dir / "eval/metrics.csv"))) EXPECT_EQ(m.e_te, 0.0);

  r = run({"stats", "--metrics", (dir / "eval/metrics.csv").string(), "--bins", "5", "--out", (dir / "h.csv").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "h.csv"));
}

TEST(Cli, DomainErrorsExitOne) {
  TempDir dir;
  write_bytes(dir / "job.json", "{\"scene\": \"nope.json\"}");
  CliRun r = run({"generate", "--job", (dir / "job.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);

  std::filesystem::create_directories(dir / "data/000000");
  write_bytes(dir / "data/000000/scene_gt.json", "{}");
  r = run({"validate", (dir / "data").string()});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, PnpWritesResultRow) {
  TempDir dir;
  const SceneConfig scene = load_scene_config(kFixtures / "scene.json");
  SplitMix64 rng(9);
  std::vector<Vec3> pts;
  for (int k = 0; k < 10; ++k) pts.push_back({rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8)});
  const Pose truth{Rx(0.3) * Rz(0.2), Vec3(1, -1, 90)};
  std::string csv = "x,y,z,u,v\n";
  char line[256];
  for (const auto &c : project_points(truth, pts, scene.camera)) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g\n", c.model_point.x(), c.model_point.y(),
                  c.model_point.z(), c.image_point.x(), c.image_point.y());
    csv += line;
  }
  write_bytes(dir / "corr.csv", csv);
  const CliRun r = run({"pnp", "--corr", (dir / "corr.csv").string(), "--scene", (kFixtures / "scene.json").string(),
                     "--scene-id", "4", "--im-id", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto est = parse_results_csv(r.out);
  ASSERT_EQ(est.size(), 1u);
  EXPECT_EQ(est[0].scene_id, 4);
  EXPECT_EQ(est[0].im_id, 7);
  EXPECT_LT(e_te(est[0].translation, truth.translation), 1e-3);
}
