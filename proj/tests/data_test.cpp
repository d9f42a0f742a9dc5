#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hartl/data/cache.hpp"
#include "hartl/data/preprocess.hpp"
#include "hartl/data/split.hpp"
#include "hartl/synthgen.hpp"
#include "test_util.hpp"

using namespace hartl;
using namespace hartl::data;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

json two_channel_manifest(const char* delimiter = "whitespace") {
  return {{"schema_version", 1},
          {"name", "toy"},
          {"delimiter", delimiter},
          {"column_count", 4},
          {"channels", {{{"column", 2}, {"name", "a"}}, {{"column", 3}, {"name", "b"}}}},
          {"label_column", 4},
          {"null_codes", {0}},
          {"classes", {{{"code", 5}, {"id", 1}, {"name", "five"}}, {{"code", 7}, {"id", 2}, {"name", "seven"}}}}};
}

SensorRecording make_rec(const Matrix& x, std::vector<int> labels) {
  SensorRecording r;
  r.subject_id = 1;
  r.run_id = "R";
  r.channels = x;
  r.labels = std::move(labels);
  r.channel_mask.assign(x.cols(), true);
  return r;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST(LoadRecording, MinimalFile) {
  testutil::TempDir dir("load");
  testutil::write_file(dir / "r.dat", "0 1.5 2.5 0\n1 3 4 0\n2 5 6 5\n");
  const auto rec = load_recording(dir / "r.dat", parse_manifest(two_channel_manifest()), 3, "ADL1");
  EXPECT_EQ(rec.length(), 3);
  EXPECT_EQ(rec.channel_count(), 2);
  EXPECT_EQ(rec.labels, (std::vector<int>{0, 0, 1}));
  EXPECT_DOUBLE_EQ(rec.channels(2, 1), 6.0);
  EXPECT_EQ(rec.channel_names[0], "a");
}

TEST(LoadRecording, BlankCellIsMissing) {
  testutil::TempDir dir("blank");
  testutil::write_file(dir / "r.csv", "0,1,2,5\n1,,4,5\n2,5,NaN,7\n");
  const auto rec = load_recording(dir / "r.csv", parse_manifest(two_channel_manifest(",")), 3, "ADL1");
  EXPECT_TRUE(std::isnan(rec.channels(1, 0)));
  EXPECT_TRUE(std::isnan(rec.channels(2, 1)));
  EXPECT_FALSE(std::isnan(rec.channels(1, 1)));
}

TEST(LoadRecording, WrongColumnCountNamesLine) {
  testutil::TempDir dir("cols");
  testutil::write_file(dir / "r.dat", "0 1 2 5\n1 3 4\n");
  try {
    load_recording(dir / "r.dat", parse_manifest(two_channel_manifest()), 3, "ADL1");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(LoadRecording, UnknownCodeIsMappingError) {
  testutil::TempDir dir("code");
  testutil::write_file(dir / "r.dat", "0 1 2 5\n1 3 4 9\n");
  EXPECT_THROW(load_recording(dir / "r.dat", parse_manifest(two_channel_manifest()), 3, "ADL1"), MappingError);
}

TEST(Manifest, RejectsUnknownKeysAndDuplicates) {
  auto m = two_channel_manifest();
  m["colums"] = 3;
  EXPECT_THROW(parse_manifest(m), ValidationError);
  auto d = two_channel_manifest();
  d["classes"].push_back({{"code", 5}, {"id", 3}});
  EXPECT_THROW(parse_manifest(d), MappingError);
  auto gap = two_channel_manifest();
  gap["classes"][1]["id"] = 3;
  EXPECT_THROW(parse_manifest(gap), MappingError);
}

TEST(Manifest, ShippedDefaultHas113ChannelsAnd17Classes) {
  const auto m = load_manifest(testutil::source_dir() / "configs" / "opportunity_113.json");
  EXPECT_EQ(m.channel_columns.size(), 113u);
  EXPECT_EQ(m.labels.class_count(), 17);
  EXPECT_EQ(m.label_column, 250);
  EXPECT_EQ(m.labels.map(0), 0);
  EXPECT_EQ(m.labels.map(406516), 1);
  EXPECT_EQ(m.labels.map(405506), 17);
}

TEST(Clean, InterpolatesMidpoint) {
  Matrix x(3, 1);
  x << 1, kNaN, 3;
  const auto r = fill_missing(make_rec(x, {1, 1, 1}));
  EXPECT_DOUBLE_EQ(r.channels(1, 0), 2.0);
}

TEST(Clean, BoundaryGapsTakeNearestValue) {
  Matrix x(5, 1);
  x << kNaN, kNaN, 4, 6, kNaN;
  const auto r = fill_missing(make_rec(x, {1, 1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(r.channels(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(r.channels(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(r.channels(4, 0), 6.0);
}

TEST(Clean, MinMaxAndConstantChannels) {
  Matrix x(3, 2);
  x << 0, 4, 5, 4, 10, 4;
  const auto r = clean_and_normalize(make_rec(x, {1, 1, 1}));
  EXPECT_DOUBLE_EQ(r.channels(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(r.channels(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(r.channels(2, 0), 1.0);
  for (int t = 0; t < 3; ++t) EXPECT_DOUBLE_EQ(r.channels(t, 1), 0.0);
}

TEST(Clean, FullyMissingChannelIsMaskedNotFatal) {
  Matrix x(3, 2);
  x << 1, kNaN, 2, kNaN, 3, kNaN;
  std::vector<int> masked;
  const auto r = clean_and_normalize(make_rec(x, {1, 1, 1}), &masked);
  EXPECT_EQ(masked, std::vector<int>{1});
  EXPECT_FALSE(r.channel_mask[1]);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(r.channels(t, 1), 0.0);
}

TEST(Clean, IsAFixedPoint) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = 1 + static_cast<int>(u(rng) * 60);
    const int C = 1 + static_cast<int>(u(rng) * 5);
    Matrix x(T, C);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = u(rng) < 0.2 ? kNaN : g(rng);
    if (u(rng) < 0.2) x.col(0).setConstant(2.5);
    const auto once = clean_and_normalize(make_rec(x, std::vector<int>(T, 1)));
    const auto twice = clean_and_normalize(once);
    ASSERT_TRUE(bit_equal(once.channels, twice.channels)) << "trial " << trial;
    ASSERT_EQ(once.channel_mask, twice.channel_mask);
  }
}

TEST(Segment, Examples) {
  auto rec = [](int T, int label) { return make_rec(Matrix::Zero(T, 2), std::vector<int>(T, label)); };
  const auto a = segment(rec(36, 1), 24, 12);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.windows[0].origin.start, 0);
  EXPECT_EQ(a.windows[1].origin.start, 12);
  EXPECT_EQ(segment(rec(24, 1), 24, 12).size(), 1u);
  EXPECT_EQ(segment(rec(48, 0), 24, 12, true).size(), 0u);
  std::ostringstream warn;
  EXPECT_EQ(segment(rec(10, 1), 24, 12, true, Domain::kSource, &warn).size(), 0u);
  EXPECT_NE(warn.str().find("shorter than window length"), std::string::npos);
}

TEST(Segment, LabelIsLastInstance) {
  std::vector<int> labels(24, 2);
  labels.back() = 1;
  const auto ws = segment(make_rec(Matrix::Zero(24, 1), labels), 24, 12);
  ASSERT_EQ(ws.size(), 1u);
  EXPECT_EQ(ws.windows[0].label, 1);
  labels.back() = 0;
  EXPECT_EQ(segment(make_rec(Matrix::Zero(24, 1), labels), 24, 12).size(), 0u);
}

TEST(Segment, CountMatchesEnumeration) {
  for (int T = 1; T <= 100; ++T) {
    const auto rec = make_rec(Matrix::Zero(T, 1), std::vector<int>(T, 1));
    for (int L = 1; L <= 30; ++L) {
      for (int S = 1; S <= 15; ++S) {
        int n = 0;
        for (int start = 0; start < T; ++start) {
          if (start % S == 0 && start + L <= T) ++n;
        }
        ASSERT_EQ(window_count(T, L, S), n) << T << " " << L << " " << S;
        ASSERT_EQ(static_cast<int>(segment(rec, L, S, true, Domain::kSource, nullptr).size()), n);
      }
    }
  }
}

TEST(Segment, NeverEmitsNullAndIsDeterministic) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> lab(0, 3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 30 + trial * 3;
    Matrix x(T, 3);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    std::vector<int> labels(T);
    for (auto& l : labels) l = lab(rng);
    const auto rec = make_rec(x, labels);
    const auto a = segment(rec, 24, 12);
    const auto b = segment(rec, 24, 12);
    ASSERT_EQ(encode_windows(a), encode_windows(b));
    for (const auto& w : a.windows) ASSERT_NE(w.label, 0);
  }
}

TEST(Split, PaperLayoutOverTwelveRecordings) {
  synth::ShiftSpec s;
  s.seq_length = 600;
  s.class_prototypes = synth::random_prototypes(s.n_classes, s.n_channels, 1);
  const auto recs = synth::generate_subjects(s);
  ASSERT_EQ(recs.size(), 12u);
  const auto split = build_split(recs, SplitSpec::paper_default());
  EXPECT_FALSE(split.source_train.empty());
  EXPECT_FALSE(split.source_val.empty());
  EXPECT_FALSE(split.target_train.empty());
  EXPECT_FALSE(split.target_test.empty());
  for (const auto& w : split.target_test.windows) EXPECT_EQ(w.domain, Domain::kTarget);

  // statistics come from the source training runs only
  std::vector<SensorRecording> src;
  for (const auto& r : recs) {
    for (const auto& run : split.spec.source_train_runs) {
      if (r.subject_id == 3 && r.run_id == run) src.push_back(fill_missing(r));
    }
  }
  const auto range = fit_range(src);
  EXPECT_TRUE(bit_equal(range.lo, split.normalization.lo));
  EXPECT_TRUE(bit_equal(range.hi, split.normalization.hi));
}

TEST(Split, WithinSubjectAndErrors) {
  synth::ShiftSpec s;
  s.seq_length = 400;
  s.class_prototypes = synth::random_prototypes(s.n_classes, s.n_channels, 1);
  const auto recs = synth::generate_subjects(s);
  auto spec = SplitSpec::paper_default();
  spec.source_subject = spec.target_subject = 4;
  EXPECT_NO_THROW(build_split(recs, spec));

  EXPECT_THROW(build_split(recs, SplitSpec{}), ValidationError);

  auto missing = SplitSpec::paper_default();
  missing.target_test_runs.push_back("ADL9");
  try {
    build_split(recs, missing);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(4, ADL9)"), std::string::npos);
  }
}

TEST(Cache, RoundTripIsLossless) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  WindowSet ws;
  ws.length = 6;
  ws.stride = 3;
  ws.channels = 2;
  ws.manifest_hash = "abc";
  for (int i = 0; i < 7; ++i) {
    Window w;
    w.values = Matrix(6, 2);
    for (int k = 0; k < w.values.size(); ++k) w.values.data()[k] = g(rng);
    w.values(0, 0) = -0.0;
    w.label = 1 + i % 3;
    w.domain = i % 2 ? Domain::kTarget : Domain::kSource;
    w.origin = {3 + i % 2, "ADL" + std::to_string(i), 3 * i};
    ws.windows.push_back(w);
  }
  testutil::TempDir dir("cache");
  save_windows(dir / "w.bin", ws);
  const auto back = load_windows(dir / "w.bin");
  ASSERT_EQ(back.size(), ws.size());
  EXPECT_EQ(back.manifest_hash, "abc");
  EXPECT_EQ(encode_windows(back), encode_windows(ws));
  for (std::size_t i = 0; i < ws.size(); ++i) {
    EXPECT_TRUE(bit_equal(back.windows[i].values, ws.windows[i].values));
    EXPECT_EQ(back.windows[i].origin.run_id, ws.windows[i].origin.run_id);
  }

  // tampered payload is refused
  std::string bytes = encode_windows(ws);
  bytes[bytes.size() - 1] ^= 1;
  testutil::write_file(dir / "w.bin", bytes);
  EXPECT_THROW(load_windows(dir / "w.bin"), ValidationError);
}
