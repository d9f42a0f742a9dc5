#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hartl/harness/report.hpp"
#include "test_util.hpp"

using namespace hartl;
using namespace hartl::harness;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json tiny_doc(const fs::path& out, std::uint64_t shift_seed = 3) {
  return {{"schema_version", 1},
          {"name", "tiny"},
          {"method", "baseline"},
          {"output_dir", out.string()},
          {"split",
           {{"kind", "synthetic"},
            {"shift_spec",
             {{"n_classes", 3},
              {"n_channels", 3},
              {"seq_length", 240},
              {"prototype_generator", {{"seed", 1}, {"components", 2}}},
              {"shift", {{{"gain", 1.0}, {"offset", 0.4}}, {{"gain", 1.0}, {"offset", -0.4}}, {{"gain", 1.0}, {"offset", 0.2}}}},
              {"seed", shift_seed}}}}},
          {"model",
           {{"channels", 3},
            {"n_classes", 3},
            {"conv", {{{"kernel_length", 5}, {"feature_maps", 3}}, {{"kernel_length", 5}, {"feature_maps", 3}},
                      {{"kernel_length", 5}, {"feature_maps", 3}}, {{"kernel_length", 5}, {"feature_maps", 3}}}},
            {"recurrent", {6}}}},
          {"train", {{"max_iterations", 2}, {"batch_size", 50}}}};
}

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, ParsesAndHashesStably) {
  testutil::TempDir dir("cfg");
  const auto a = parse_config(tiny_doc(dir.path()));
  const auto b = parse_config(tiny_doc(dir.path()));
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.model.input_length, 24);
  EXPECT_NE(a.hash(), parse_config(tiny_doc(dir.path(), 4)).hash());
}

TEST(Config, UnknownKeysRejected) {
  testutil::TempDir dir("cfg");
  auto doc = tiny_doc(dir.path());
  doc["methd"] = "dann";
  EXPECT_NE(error_of(doc).find("methd"), std::string::npos);

  doc = tiny_doc(dir.path());
  doc["train"]["learning_rat"] = 0.1;
  EXPECT_NE(error_of(doc).find("learning_rat"), std::string::npos);

  doc = tiny_doc(dir.path());
  doc["params"] = {{"kapa", 1}};
  EXPECT_NE(error_of(doc).find("kapa"), std::string::npos);
}

TEST(Config, ReportsEveryProblemAtOnce) {
  testutil::TempDir dir("cfg");
  auto doc = tiny_doc(dir.path());
  doc["schema_version"] = 7;
  doc["name"] = "has space";
  const std::string err = error_of(doc);
  EXPECT_NE(err.find("schema_version"), std::string::npos);
  EXPECT_NE(err.find("name"), std::string::npos);

  doc = tiny_doc(dir.path());
  doc["model"]["channels"] = 0;
  doc["train"]["max_iterations"] = 0;
  const std::string err2 = error_of(doc);
  EXPECT_NE(err2.find("model"), std::string::npos);
  EXPECT_NE(err2.find("max_iterations"), std::string::npos);
}

TEST(Config, ClassicalMethodsTakeNoNetworkSections) {
  json doc = {{"schema_version", 1}, {"method", "kmm"}, {"params", {{"source", "a.txt"}, {"target", "b.txt"}}}};
  EXPECT_NO_THROW(parse_config(doc));
  doc["model"] = json::object();
  EXPECT_NE(error_of(doc).find("not used by kmm"), std::string::npos);
  json tb = {{"schema_version", 1}, {"method", "tradaboost"}, {"params", {{"source", "a.txt"}}}};
  EXPECT_NE(error_of(tb).find("needs"), std::string::npos);
}

TEST(Config, SetPathEditsNestedKeys) {
  json doc = {{"train", {{"seed", 1}}}};
  set_path(doc, "train.seed", 5);
  set_path(doc, "params.kappa", 0.5);
  EXPECT_EQ(doc["train"]["seed"], 5);
  EXPECT_EQ(doc["params"]["kappa"], 0.5);
}

TEST(Run, DirectoryHoldsEverythingNeededToReproduce) {
  testutil::TempDir dir("run");
  const auto ref = run(parse_config(tiny_doc(dir / "runs")));
  for (const char* f : {"config.json", "reproduce.sh", "best.snapshot", "best.snapshot.json", "record.jsonl", "run.json"}) {
    EXPECT_TRUE(fs::exists(ref.dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(ref.dir / "INCOMPLETE"));
  const json meta = json::parse(slurp(ref.dir / "run.json"));
  EXPECT_EQ(meta["status"], "complete");
  EXPECT_EQ(meta["config_hash"], ref.config_hash);
  EXPECT_NE(slurp(ref.dir / "reproduce.sh").find(ref.config_hash), std::string::npos);

  // the stored config reproduces the hash
  const auto again = load_config(ref.dir / "config.json");
  EXPECT_EQ(again.hash(), ref.config_hash);

  const auto loaded = load_record(ref.dir / "record.jsonl");
  EXPECT_EQ(loaded.record.method, "baseline");
  EXPECT_EQ(loaded.record.rows.size(), 3u);
}

TEST(Run, SameConfigTwiceGivesSameRecordAndNewId) {
  testutil::TempDir dir("twice");
  const auto cfg = parse_config(tiny_doc(dir / "runs"));
  const auto a = run(cfg);
  const auto b = run(cfg);
  EXPECT_NE(a.run_id, b.run_id);
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_EQ(slurp(a.dir / "record.jsonl"), slurp(b.dir / "record.jsonl"));
  EXPECT_EQ(slurp(a.dir / "best.snapshot"), slurp(b.dir / "best.snapshot"));
}

TEST(Run, MissingDatasetFailsBeforeAnyOutput) {
  testutil::TempDir dir("nodata");
  fs::create_directories(dir / "data");
  testutil::write_file(dir / "data" / "S3-ADL1.dat", "1 2 3\n");
  json doc = {{"schema_version", 1},
              {"name", "paper"},
              {"method", "baseline"},
              {"output_dir", (dir / "runs").string()},
              {"split",
               {{"kind", "paper-default"},
                {"manifest", (testutil::source_dir() / "configs" / "opportunity_113.json").string()},
                {"data_root", (dir / "data").string()}}},
              {"model", {{"channels", 113}}}};
  const auto cfg = parse_config(doc);
  try {
    run(cfg);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(3, ADL2)"), std::string::npos);
    EXPECT_NE(msg.find("(4, ADL5)"), std::string::npos);
    EXPECT_EQ(msg.find("(3, ADL1)"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(dir / "runs"));
}

TEST(Run, ClassicalKmmWritesWeights) {
  testutil::TempDir dir("kmm");
  testutil::write_file(dir / "s.txt", "0.0\n0.5\n1.0\n-0.5\n");
  testutil::write_file(dir / "t.txt", "0.8\n1.1\n");
  json doc = {{"schema_version", 1},
              {"name", "kmm"},
              {"method", "kmm"},
              {"output_dir", "runs"},
              {"params", {{"source", "s.txt"}, {"target", "t.txt"}}}};
  const auto ref = run(parse_config(doc, dir.path()));
  const json r = json::parse(slurp(ref.dir / "result.json"));
  EXPECT_EQ(r["beta"].size(), 4u);
  // the stored config points at absolute paths
  EXPECT_TRUE(fs::path(json::parse(slurp(ref.dir / "config.json"))["params"]["source"].get<std::string>()).is_absolute());
}

class Reports : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testutil::TempDir("reports");
    baseline_ = run(parse_config(tiny_doc(*dir_ / "runs"))).dir;
    auto doc = tiny_doc(*dir_ / "runs");
    doc["method"] = "dann";
    doc["name"] = "tiny-dann";
    doc["params"] = {{"head", {{"recurrent_units", 4}}}};
    dann_ = run(parse_config(doc)).dir;
    other_split_ = run(parse_config(tiny_doc(*dir_ / "runs", 9))).dir;
  }
  static void TearDownTestSuite() { delete dir_; }

  static testutil::TempDir* dir_;
  static fs::path baseline_, dann_, other_split_;
};

testutil::TempDir* Reports::dir_ = nullptr;
fs::path Reports::baseline_, Reports::dann_, Reports::other_split_;

TEST_F(Reports, CompareOneRun) {
  const auto t = compare({baseline_});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].method, "baseline");
  const auto rec = load_record(baseline_ / "record.jsonl").record;
  EXPECT_EQ(t.rows[0].max_target_f1, rec.max_target_f1());
  EXPECT_NE(t.to_text().find("highest F1"), std::string::npos);
}

TEST_F(Reports, CompareSameSplitTogether) {
  const auto t = compare({baseline_, dann_});
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1].method, "dann");
}

TEST_F(Reports, CompareRefusesMixedSplits) {
  try {
    compare({baseline_, other_split_});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("different split"), std::string::npos);
  }
}

TEST_F(Reports, LambdaPlotOfBaselineIsAnError) {
  try {
    plot({baseline_}, PlotKind::kLambdaTrace, *dir_ / "plots");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'lambda'"), std::string::npos);
  }
}

TEST_F(Reports, PlotsAreWritten) {
  const auto f1 = plot({baseline_, dann_}, PlotKind::kF1Curve, *dir_ / "plots");
  ASSERT_EQ(f1.size(), 2u);
  for (const auto& p : f1) {
    ASSERT_TRUE(fs::exists(p));
    EXPECT_NE(slurp(p).find("<svg"), std::string::npos);
  }
  const auto lam = plot({dann_}, PlotKind::kLambdaTrace, *dir_ / "plots");
  EXPECT_NE(lam[0].filename().string().find("lambda_trace"), std::string::npos);
}

TEST(Sweep, EmptyGridIsAnError) {
  EXPECT_THROW(expand_grid(json::object()), ValidationError);
  EXPECT_THROW(expand_grid(json{{"train.seed", json::array()}}), ValidationError);
  const auto pts = expand_grid(json{{"a", {1, 2}}, {"b", {"x", "y", "z"}}});
  EXPECT_EQ(pts.size(), 6u);
}

TEST(Sweep, InvalidPointStopsBeforeRunning) {
  testutil::TempDir dir("sweep-bad");
  EXPECT_THROW(sweep(tiny_doc(dir / "runs"), {}, json{{"train.max_iterations", {1, 0}}}), ValidationError);
  EXPECT_FALSE(fs::exists(dir / "runs"));
}

TEST(Sweep, FailingPointIsRecordedAndOthersRun) {
  testutil::TempDir dir("sweep");
  // 5 channels passes validation but does not match the 3-channel data
  const auto t = sweep(tiny_doc(dir / "runs"), {}, json{{"model.channels", {3, 5}}});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_TRUE(t.rows[0].error.empty());
  EXPECT_NE(t.rows[1].error.find("channels"), std::string::npos);
  EXPECT_NE(t.to_text().find("failed"), std::string::npos);
}
