// Checks on the committed synthetic fixture. Slow: trains the baseline and
// one adaptive DANN run at fixture size.

#include <iostream>

#include <gtest/gtest.h>

#include "hartl/harness/desk.hpp"
#include "test_util.hpp"

using namespace hartl;

namespace {

struct Desk {
  harness::DeskFixture fx;
  harness::LoadedData data;
  data::DomainSplit split;
  train::TrainResult baseline;
  std::optional<train::DannResult> dann;
};

Desk& desk() {
  static Desk* d = [] {
    auto* p = new Desk;
    p->fx = harness::DeskFixture::load(testutil::source_dir() / "fixtures" / "desk_fixture.json");
    const auto cfg = p->fx.config("baseline");
    p->data = harness::load_data(cfg);
    p->split = data::build_split(p->data.recordings, cfg.split.spec, p->data.manifest_hash);
    p->baseline = train::train_baseline(p->split, cfg.model, cfg.train);
    return p;
  }();
  return *d;
}

const train::DannResult& adaptive_dann() {
  Desk& d = desk();
  if (!d.dann) {
    const auto cfg = d.fx.config("dann");
    d.dann = train::train_dann(d.split, cfg.model, harness::dann_head(cfg.params), cfg.train,
                               harness::dann_options(cfg.params));
  }
  return *d.dann;
}

}  // namespace

TEST(Desk, BaselineLeavesASourceTargetGap) {
  const auto& best = desk().baseline.record.best_row();
  std::cout << "baseline val_f1 " << best.val_f1 << " target_f1 " << best.target_f1 << " val_acc "
            << best.val_accuracy << " target_acc " << best.target_accuracy << "\n";
  EXPECT_GE(best.val_f1, 0.9);
  EXPECT_GE(best.val_f1 - best.target_f1, 0.15);
  EXPECT_GE(best.val_accuracy - best.target_accuracy, desk().fx.min_gap);
}

TEST(Desk, DomainClassifierSeparatesTheDomains) {
  const Desk& d = desk();
  const auto src = train::window_ptrs(d.split.source_train);
  const auto tgt = train::window_ptrs(d.split.target_train);
  const auto scorer = train::pretrain_domain_classifier(src, tgt, d.fx.model, d.fx.scorer);
  std::cout << "domain classifier held-out accuracy " << scorer.heldout_accuracy() << "\n";
  EXPECT_GE(scorer.heldout_accuracy(), 0.9);
}

TEST(Desk, RotationNeverHelpsTheFrozenBaseline) {
  const Desk& d = desk();
  model::DeepConvLstm m(d.fx.model, 0);
  model::restore(m, d.baseline.best);
  double previous = 2.0;
  for (double angle : d.fx.angles) {
    synth::ShiftSpec s = d.fx.shift;
    s.rotation_angle = angle;
    const auto recs = synth::generate_subjects(s);
    const auto split = data::build_split(recs, d.fx.config("baseline").split.spec);
    const double acc = train::evaluate(m, split.target_test).accuracy;
    std::cout << "rotation " << angle << " target_acc " << acc << "\n";
    EXPECT_LE(acc, previous) << "angle " << angle;
    previous = acc;
  }
}

TEST(Desk, AdaptiveDannClosesTheGap) {
  const auto& base = desk().baseline.record.best_row();
  const auto& r = adaptive_dann().train.record.best_row();
  std::cout << "dann target_acc " << r.target_accuracy << " baseline " << base.target_accuracy << "\n";
  EXPECT_GE(r.target_accuracy - base.target_accuracy, desk().fx.min_closed);
}

// The controller is meant to hold A_d between 0.5 and 0.8 most of the time
// once training has settled (first quarter of iterations excluded).
TEST(Desk, AdaptiveDannKeepsDomainAccuracyInBand) {
  const auto& rows = adaptive_dann().train.record.rows;
  const int warmup = desk().fx.dann.max_iterations / 4;
  int in_band = 0, counted = 0;
  for (const auto& r : rows) {
    if (!r.domain_accuracy || r.iteration <= warmup) continue;
    ++counted;
    in_band += *r.domain_accuracy >= 0.5 && *r.domain_accuracy <= 0.8;
    std::cout << "it " << r.iteration << " A_d " << *r.domain_accuracy << " lambda " << *r.lambda << "\n";
  }
  ASSERT_GT(counted, 0);
  EXPECT_GE(static_cast<double>(in_band) / counted, 0.6);
}
