#include <gtest/gtest.h>

#include "hartl/synthgen.hpp"

using namespace hartl;
using namespace hartl::synth;

namespace {

ShiftSpec small(std::uint64_t seed = 1) {
  ShiftSpec s;
  s.n_classes = 3;
  s.n_channels = 4;
  s.seq_length = 500;
  s.class_prototypes = random_prototypes(3, 4, 2);
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Synthgen, ZeroShiftGivesIdenticalDomains) {
  auto s = small();
  s.shift.assign(4, {});
  const auto g = generate(s);
  EXPECT_TRUE(g.source.channels == g.target.channels);
  EXPECT_EQ(g.source.labels, g.target.labels);
}

TEST(Synthgen, GainScalesTheCleanSignal) {
  auto s = small();
  s.noise_sigma = 0.0;
  s.shift.assign(4, {});
  s.shift[0].gain = 2.0;
  const auto g = generate(s);
  EXPECT_TRUE(g.source.channels.isApprox(g.clean, 0.0));
  for (Eigen::Index t = 0; t < g.clean.rows(); ++t) {
    ASSERT_DOUBLE_EQ(g.target.channels(t, 0), 2.0 * g.clean(t, 0));
    ASSERT_EQ(g.target.channels(t, 1), g.clean(t, 1));
  }
}

TEST(Synthgen, NoiseIsSharedBetweenDomains) {
  auto s = small();
  s.shift.assign(4, {1.0, 0.25});
  const auto g = generate(s);
  const Matrix diff = g.target.channels - g.source.channels;
  EXPECT_NEAR(diff.minCoeff(), 0.25, 1e-12);
  EXPECT_NEAR(diff.maxCoeff(), 0.25, 1e-12);
}

TEST(Synthgen, RotationKeepsPairNorms) {
  auto s = small();
  s.noise_sigma = 0.0;
  s.rotation_pairs = 2;
  s.rotation_angle = 0.7;
  const auto g = generate(s);
  for (Eigen::Index t = 0; t < g.clean.rows(); t += 7) {
    for (int p = 0; p < 2; ++p) {
      ASSERT_NEAR(g.target.channels.row(t).segment(2 * p, 2).norm(), g.clean.row(t).segment(2 * p, 2).norm(), 1e-12);
    }
  }
}

TEST(Synthgen, Deterministic) {
  const auto a = generate(small(5));
  const auto b = generate(small(5));
  EXPECT_TRUE(a.target.channels == b.target.channels);
  EXPECT_EQ(a.target.labels, b.target.labels);
  EXPECT_FALSE(a.source.channels == generate(small(6)).source.channels);

  const auto sa = generate_subjects(small(5));
  const auto sb = generate_subjects(small(5));
  ASSERT_EQ(sa.size(), 12u);
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_TRUE(sa[i].channels == sb[i].channels);
}

TEST(Synthgen, LabelsCoverEveryClassAndNull) {
  const auto g = generate(small());
  std::vector<int> seen(4, 0);
  for (int y : g.source.labels) ++seen.at(y);
  for (int k = 0; k < 4; ++k) EXPECT_GT(seen[k], 0) << k;
}

TEST(Synthgen, ValidationErrors) {
  auto s = small();
  s.n_channels = 0;
  EXPECT_THROW(generate(s), ValidationError);
  s = small();
  s.shift.assign(3, {});
  EXPECT_THROW(generate(s), ValidationError);
  s = small();
  s.rotation_pairs = 3;
  EXPECT_THROW(generate(s), ValidationError);
}

TEST(Synthgen, JsonRoundTrip) {
  const json j = {{"n_classes", 3},
                  {"n_channels", 4},
                  {"seq_length", 300},
                  {"prototype_generator", {{"seed", 2}}},
                  {"shift", {{{"gain", 2.0}}, json::object(), json::object(), {{"offset", 1.0}}}},
                  {"seed", 9}};
  const auto s = ShiftSpec::from_json(j);
  EXPECT_EQ(s.class_prototypes.size(), 3u);
  EXPECT_EQ(s.shift[0].gain, 2.0);
  EXPECT_EQ(s.shift[3].offset, 1.0);
  const auto back = ShiftSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
  EXPECT_TRUE(generate(back).target.channels == generate(s).target.channels);

  json bad = j;
  bad["nosie_sigma"] = 0.2;
  EXPECT_THROW(ShiftSpec::from_json(bad), ValidationError);
}
