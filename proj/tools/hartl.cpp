// hartl command line: ingest, generate, train, finetune, classical, compare,
// plot, sweep. Exit status 0 on success, 1 on invalid input, 2 when a run
// fails.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hartl/classical/toy.hpp"
#include "hartl/data/cache.hpp"
#include "hartl/harness/report.hpp"

using namespace hartl;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void print_row(const train::RunRow& r) {
  std::cerr << "it " << r.iteration << "  val_f1 " << r.val_f1 << "  target_f1 " << r.target_f1;
  if (r.domain_accuracy) std::cerr << "  A_d " << *r.domain_accuracy;
  if (r.lambda) std::cerr << "  lambda " << *r.lambda;
  std::cerr << "  loss " << r.mean_loss << "\n";
}

/// "path=value"; value is parsed as JSON, falling back to a plain string.
void apply_overrides(json& doc, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects path=value, got '" + s + "'");
    json v;
    try {
      v = json::parse(s.substr(eq + 1));
    } catch (const json::parse_error&) {
      v = s.substr(eq + 1);
    }
    harness::set_path(doc, s.substr(0, eq), v);
  }
}

void write_matrix(const fs::path& p, const Matrix& x, const std::vector<int>* y = nullptr) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) out << (k ? " " : "") << x(i, k);
    if (y) out << " " << (*y)[i];
    out << "\n";
  }
}

json parse_json_arg(const std::string& s) {
  if (fs::exists(s)) return harness::read_json(s);
  try {
    return json::parse(s);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + s + "' is neither a file nor valid JSON");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-learning experiments for wearable activity recognition"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no per-iteration progress");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "segment dataset recordings into window caches");
  std::string in_manifest, in_root, in_split, in_out, in_pattern = "S{subject}-{run}.dat";
  ingest->add_option("--manifest", in_manifest, "column manifest JSON")->required();
  ingest->add_option("--data-root", in_root, "dataset directory (default $HARTL_DATA_ROOT)");
  ingest->add_option("--split", in_split, "split spec JSON (default: subject 3 -> 4 protocol)");
  ingest->add_option("--file-pattern", in_pattern, "recording file name, {subject} and {run} substituted");
  ingest->add_option("--out", in_out, "output directory")->required();

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic shifted corpus or classical toy samples");
  std::string gen_spec, gen_out;
  bool gen_toy = false;
  std::uint64_t gen_seed = 1;
  gen->add_option("--spec", gen_spec, "shift spec JSON, or a fixture file holding one under 'shift_spec'");
  gen->add_flag("--classical-toy", gen_toy, "write KMM and TrAdaBoost sample files instead");
  gen->add_option("--seed", gen_seed, "seed for --classical-toy");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train / finetune
  std::string cfg_path;
  std::vector<std::string> sets;
  auto* trn = app.add_subcommand("train", "run an experiment config");
  trn->add_option("--config", cfg_path, "experiment config JSON")->required()->check(CLI::ExistingFile);
  trn->add_option("--set", sets, "override a config field, e.g. --set train.seed=3");
  std::string method_override;
  trn->add_option("--method", method_override, "override the config's method");

  auto* ft = app.add_subcommand("finetune", "fine-tune a source model on labelled target runs");
  std::string ft_ckpt;
  std::vector<std::string> ft_frozen, ft_runs;
  ft->add_option("--config", cfg_path, "experiment config JSON")->required()->check(CLI::ExistingFile);
  ft->add_option("--source-checkpoint", ft_ckpt, "source model snapshot (default: train one)");
  ft->add_option("--frozen", ft_frozen, "layer groups to freeze")->delimiter(',');
  ft->add_option("--tuning-runs", ft_runs, "labelled target runs")->delimiter(',');
  ft->add_option("--set", sets, "override a config field");

  // classical
  auto* cl = app.add_subcommand("classical", "KMM weights or a TrAdaBoost ensemble on sample files");
  std::string cl_method, cl_src, cl_tgt, cl_test, cl_out = "runs";
  double cl_sigma = 0.0, cl_B = 1000.0;
  std::optional<double> cl_eps;
  int cl_rounds = 20;
  cl->add_option("--method", cl_method, "kmm or tradaboost")->required()->check(CLI::IsMember({"kmm", "tradaboost"}));
  cl->add_option("--source", cl_src, "source samples")->required();
  cl->add_option("--target", cl_tgt, "target samples")->required();
  cl->add_option("--test", cl_test, "target test samples (tradaboost)");
  cl->add_option("--sigma", cl_sigma, "kernel bandwidth, <= 0 for the median heuristic");
  cl->add_option("--B", cl_B, "upper bound on the weights");
  cl->add_option("--eps", cl_eps, "mean tolerance (default B/sqrt(m))");
  cl->add_option("--rounds", cl_rounds, "boosting rounds");
  cl->add_option("--output-dir", cl_out, "where the run directory goes");

  // compare / plot / sweep
  std::vector<std::string> runs;
  std::string json_out;
  auto* cmp = app.add_subcommand("compare", "table of highest target F1 over runs");
  cmp->add_option("runs", runs, "run directories")->required();
  cmp->add_option("--json", json_out, "also write the table as JSON");

  auto* plt = app.add_subcommand("plot", "SVG line charts from run records");
  std::string kind = "f1_curve", plot_out = ".";
  plt->add_option("runs", runs, "run directories")->required();
  plt->add_option("--kind", kind, "f1_curve, lambda_trace or domain_accuracy");
  plt->add_option("--out", plot_out, "output directory");

  auto* swp = app.add_subcommand("sweep", "run a config over a parameter grid");
  std::string grid_arg;
  swp->add_option("--config", cfg_path, "base experiment config")->required()->check(CLI::ExistingFile);
  swp->add_option("--grid", grid_arg, "grid JSON (file or inline), e.g. {\"params.kappa\": [0, 1, 2]}")->required();
  swp->add_option("--json", json_out, "also write the table as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const harness::Progress progress = quiet ? harness::Progress{} : harness::Progress(print_row);
  auto load = [&](std::vector<std::string> extra) {
    json doc = harness::read_json(cfg_path);
    apply_overrides(doc, extra);
    return harness::parse_config(doc, fs::path(cfg_path).parent_path());
  };

  try {
    if (*ingest) {
      json mj = harness::read_json(in_manifest);
      harness::ExperimentConfig c;
      c.base_dir = fs::path(in_manifest).parent_path();
      c.method = "baseline";
      c.split.kind = in_split.empty() ? "paper-default" : "custom";
      if (!in_split.empty()) c.split.spec = data::SplitSpec::from_json(harness::read_json(in_split));
      c.split.manifest = fs::path(in_manifest).filename().string();
      c.split.data_root = in_root;
      c.split.file_pattern = in_pattern;
      harness::check_data_available(c);
      const auto manifest = data::parse_manifest(mj);
      std::vector<data::SensorRecording> recs;
      for (const auto& [s, r] : harness::required_runs(c)) {
        recs.push_back(data::load_recording(c.split.run_file(s, r), manifest, s, r));
      }
      const auto& sp = c.split.spec;
      const auto split = data::build_split(recs, sp, manifest.hash());
      fs::create_directories(in_out);
      auto save = [&](const char* name, data::WindowSet ws) {
        ws.manifest_hash = manifest.hash();
        data::save_windows(fs::path(in_out) / (std::string(name) + ".bin"), ws);
        std::cout << name << ": " << ws.size() << " windows\n";
      };
      save("source_train", split.source_train);
      save("source_val", split.source_val);
      save("target_train", data::prepare_runs(recs, sp.target_subject, sp.target_train_runs, split.normalization,
                                              sp.window_length, sp.window_stride, data::Domain::kTarget));
      save("target_test", split.target_test);
      std::ofstream(fs::path(in_out) / "split.json") << json{{"spec", sp.to_json()}, {"manifest_hash", manifest.hash()}}.dump(2) << "\n";
    } else if (*gen) {
      fs::create_directories(gen_out);
      const fs::path out(gen_out);
      if (gen_toy) {
        write_matrix(out / "kmm_source.txt", classical::gaussian_samples(200, 0.0, derive_seed(gen_seed, "kmm-source")));
        write_matrix(out / "kmm_target.txt", classical::gaussian_samples(200, 0.5, derive_seed(gen_seed, "kmm-target")));
        const auto s = classical::shifted_binary(400, false, derive_seed(gen_seed, "boost-source"));
        const auto t = classical::shifted_binary(20, true, derive_seed(gen_seed, "boost-target"));
        const auto e = classical::shifted_binary(1000, true, derive_seed(gen_seed, "boost-test"));
        write_matrix(out / "boost_source.txt", s.x, &s.y);
        write_matrix(out / "boost_target.txt", t.x, &t.y);
        write_matrix(out / "boost_test.txt", e.x, &e.y);
        std::cout << "wrote classical samples to " << out.string() << "\n";
      } else {
        if (gen_spec.empty()) throw ValidationError("generate: --spec is required unless --classical-toy is given");
        json j = harness::read_json(gen_spec);
        const auto spec = synth::ShiftSpec::from_json(j.contains("shift_spec") ? j.at("shift_spec") : j);
        const auto codes = synth::synthetic_codes(spec);
        for (const auto& rec : synth::generate_subjects(spec)) {
          const auto name = "S" + std::to_string(rec.subject_id) + "-" + rec.run_id + ".dat";
          data::write_recording(out / name, rec, codes);
        }
        std::ofstream(out / "manifest.json") << synth::synthetic_manifest(spec).dump(2) << "\n";
        std::ofstream(out / "shift_spec.json") << spec.to_json().dump(2) << "\n";
        std::cout << "wrote synthetic corpus to " << out.string() << "\n";
      }
    } else if (*trn) {
      if (!method_override.empty()) sets.push_back("method=\"" + method_override + "\"");
      const auto ref = harness::run(load(sets), progress, &std::cerr);
      std::cout << ref.dir.string() << "\n";
    } else if (*ft) {
      std::vector<std::string> extra = {"method=\"finetune\""};
      if (!ft_ckpt.empty()) extra.push_back("params.source_checkpoint=" + json(fs::absolute(ft_ckpt).string()).dump());
      if (!ft_frozen.empty()) extra.push_back("params.frozen=" + json(ft_frozen).dump());
      if (!ft_runs.empty()) extra.push_back("params.tuning_runs=" + json(ft_runs).dump());
      extra.insert(extra.end(), sets.begin(), sets.end());
      const auto ref = harness::run(load(extra), progress, &std::cerr);
      std::cout << ref.dir.string() << "\n";
    } else if (*cl) {
      json p = {{"source", fs::absolute(cl_src).string()}, {"target", fs::absolute(cl_tgt).string()}};
      if (cl_method == "kmm") {
        p["sigma"] = cl_sigma;
        p["B"] = cl_B;
        if (cl_eps) p["eps"] = *cl_eps;
      } else {
        if (cl_test.empty()) throw ValidationError("classical: tradaboost needs --test");
        p["test"] = fs::absolute(cl_test).string();
        p["rounds"] = cl_rounds;
      }
      const auto c = harness::parse_config(
          {{"schema_version", 1}, {"name", cl_method}, {"method", cl_method}, {"params", p}, {"output_dir", cl_out}});
      const auto ref = harness::run(c, {}, &std::cerr);
      const json res = harness::read_json(ref.dir / "result.json");
      if (cl_method == "kmm") {
        std::cout << "objective " << res.at("objective") << "  sigma " << res.at("sigma") << "  eps " << res.at("eps") << "\n";
      } else {
        std::cout << "rounds " << res.at("rounds").size() << "  test accuracy " << res.value("test_accuracy", json())
                  << "  source-only stump " << res.at("source_only_stump_accuracy") << "\n";
      }
      std::cout << ref.dir.string() << "\n";
    } else if (*cmp) {
      const auto t = harness::compare(std::vector<fs::path>(runs.begin(), runs.end()));
      std::cout << t.to_text();
      if (!json_out.empty()) std::ofstream(json_out) << t.to_json().dump(2) << "\n";
    } else if (*plt) {
      for (const auto& p : harness::plot(std::vector<fs::path>(runs.begin(), runs.end()), harness::parse_plot_kind(kind), plot_out)) {
        std::cout << p.string() << "\n";
      }
    } else if (*swp) {
      const auto t = harness::sweep(harness::read_json(cfg_path), fs::path(cfg_path).parent_path(),
                                    parse_json_arg(grid_arg), progress, &std::cerr);
      std::cout << t.to_text();
      if (!json_out.empty()) std::ofstream(json_out) << t.to_json().dump(2) << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
