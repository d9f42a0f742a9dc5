// Trains the baseline and the transfer methods on the committed synthetic
// fixture and prints the checkpoint-selected scores of each.
//
//   desk_benchmark --fixture fixtures/desk_fixture.json --methods baseline,dann

#include <chrono>
#include <iostream>

#include <CLI11.hpp>

#include "hartl/harness/desk.hpp"

using namespace hartl;

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale transfer benchmark on synthetic data"};
  std::string fixture_path = "fixtures/desk_fixture.json";
  std::string methods = "baseline,loss_weighted,dann,ganin,finetune";
  bool verbose = false;
  app.add_option("--fixture", fixture_path, "fixture JSON");
  app.add_option("--methods", methods, "subset of baseline,loss_weighted,dann,ganin,finetune");
  app.add_flag("-v,--verbose", verbose, "print every evaluation row");
  CLI11_PARSE(app, argc, argv);

  const auto fx = harness::DeskFixture::load(fixture_path);
  const auto data = harness::load_data(fx.config("baseline"));
  auto has = [&](const std::string& m) { return ("," + methods + ",").find("," + m + ",") != std::string::npos; };
  train::RowCallback cb;
  if (verbose) {
    cb = [](const train::RunRow& r) {
      std::cout << "  it " << r.iteration << " val_f1 " << r.val_f1 << " tgt_f1 " << r.target_f1;
      if (r.domain_accuracy) std::cout << " A_d " << *r.domain_accuracy << " lambda " << *r.lambda;
      std::cout << "\n";
    };
  }

  std::optional<model::ParameterSnapshot> base;
  auto go = [&](const char* label, const harness::ExperimentConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = harness::run_network_method(c, data, cb, base ? &*base : nullptr);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto s = harness::score(out.train->record, fx.ganin_domain_accuracy);
    std::cout << label << ": val_acc " << s.val_accuracy << "  target_acc " << s.target_accuracy << "  target_f1 "
              << s.target_f1 << "  max_target_f1 " << s.max_target_f1 << "  best_it " << s.best_iteration;
    if (s.first_high_domain_accuracy) std::cout << "  A_d>=" << fx.ganin_domain_accuracy << " at " << *s.first_high_domain_accuracy;
    std::cout << "  (" << dt << " s)" << std::endl;
    return out;
  };

  if (has("baseline") || has("finetune")) base = go("baseline", fx.config("baseline")).train->best;
  if (has("loss_weighted")) go("loss_weighted", fx.config("loss_weighted"));
  if (has("dann")) go("dann", fx.config("dann"));
  if (has("ganin")) go("dann/ganin", fx.config("dann", "ganin"));
  if (has("finetune")) go("finetune", fx.config("finetune"));
  return 0;
}
