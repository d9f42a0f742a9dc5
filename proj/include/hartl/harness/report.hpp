#ifndef HARTL_HARNESS_REPORT_HPP_
#define HARTL_HARNESS_REPORT_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartl/harness/runner.hpp"

namespace hartl::harness {

struct ComparisonRow {
  std::string label;  // method, or the sweep point
  std::string method;
  double max_target_f1 = 0.0;       // max over evaluation points
  double target_f1_at_best_val = 0.0;
  int best_iteration = -1;
  std::string config_hash;
  std::string run;    // run directory
  std::string error;  // sweep points that failed

  json to_json() const {
    json j = {{"label", label}, {"method", method}, {"config_hash", config_hash}, {"run", run}};
    if (error.empty()) {
      j["max_target_f1"] = max_target_f1;
      j["target_f1_at_best_val"] = target_f1_at_best_val;
      j["best_iteration"] = best_iteration;
    } else {
      j["error"] = error;
    }
    return j;
  }
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::string split_hash;

  json to_json() const {
    json r = json::array();
    for (const auto& row : rows) r.push_back(row.to_json());
    return {{"split_hash", split_hash}, {"rows", r}};
  }

  std::string to_text() const {
    const std::vector<std::string> head = {"run", "method", "highest F1", "F1 @ best val", "best it", "config"};
    std::vector<std::vector<std::string>> cells;
    auto num = [](double v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << v;
      return s.str();
    };
    for (const auto& r : rows) {
      if (r.error.empty()) {
        cells.push_back({r.label, r.method, num(r.max_target_f1), num(r.target_f1_at_best_val),
                         std::to_string(r.best_iteration), r.config_hash.substr(0, 12)});
      } else {
        cells.push_back({r.label, r.method, "failed", r.error, "", r.config_hash.substr(0, 12)});
      }
    }
    std::vector<std::size_t> w(head.size());
    for (std::size_t k = 0; k < head.size(); ++k) {
      w[k] = head[k].size();
      for (const auto& c : cells) w[k] = std::max(w[k], c[k].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& c) {
      std::ostringstream l;
      for (std::size_t k = 0; k < c.size(); ++k) {
        l << (k ? "  " : "") << std::left << std::setw(static_cast<int>(w[k])) << c[k];
      }
      std::string s = l.str();
      s.erase(s.find_last_not_of(' ') + 1);
      out << s << "\n";
    };
    line(head);
    std::vector<std::string> rule;
    for (auto x : w) rule.push_back(std::string(x, '-'));
    line(rule);
    for (const auto& c : cells) line(c);
    return out.str();
  }
};

inline ComparisonRow row_from_run(const fs::path& dir, std::string* split_hash) {
  if (fs::exists(dir / "INCOMPLETE")) throw ValidationError("run " + dir.string() + " is incomplete");
  if (!fs::exists(dir / "record.jsonl")) {
    throw ValidationError("run " + dir.string() + " has no training record (classical runs are not compared)");
  }
  const auto loaded = load_record(dir / "record.jsonl");
  if (split_hash) *split_hash = loaded.split_hash;
  const auto& rec = loaded.record;
  ComparisonRow r;
  r.label = dir.filename().string();
  r.method = rec.method;
  r.max_target_f1 = rec.max_target_f1();
  r.target_f1_at_best_val = rec.best_row().target_f1;
  r.best_iteration = rec.best_iteration;
  r.config_hash = rec.config_hash;
  r.run = dir.string();
  return r;
}

/// Reads persisted records only; never retrains.
inline ComparisonTable compare(const std::vector<fs::path>& runs) {
  if (runs.empty()) throw ValidationError("compare: no runs given");
  ComparisonTable t;
  for (const auto& dir : runs) {
    std::string split;
    t.rows.push_back(row_from_run(dir, &split));
    if (t.rows.size() == 1) {
      t.split_hash = split;
    } else if (split != t.split_hash) {
      throw ValidationError("compare: " + dir.string() + " was trained on a different split than " +
                            runs.front().string());
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// plots

enum class PlotKind { kF1Curve, kLambdaTrace, kDomainAccuracy };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "f1_curve") return PlotKind::kF1Curve;
  if (s == "lambda_trace") return PlotKind::kLambdaTrace;
  if (s == "domain_accuracy") return PlotKind::kDomainAccuracy;
  throw ValidationError("unknown plot kind '" + s + "' (f1_curve, lambda_trace, domain_accuracy)");
}

struct Series {
  std::string name;
  std::vector<double> x, y;
  bool log_scale = false;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

/// Minimal line chart; `right` series (if any) use a secondary axis.
inline std::string line_chart(const std::string& title, const std::vector<Series>& left,
                              const std::vector<Series>& right, const std::string& left_label,
                              const std::string& right_label) {
  const double W = 720, H = 420, ml = 60, mr = right.empty() ? 20 : 70, mt = 40, mb = 50;
  const double pw = W - ml - mr, ph = H - mt - mb;
  auto range = [](const std::vector<Series>& ss, bool xs) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : ss) {
      for (double v : xs ? s.x : s.y) {
        double u = (!xs && s.log_scale) ? std::log10(std::max(v, 1e-12)) : v;
        lo = std::min(lo, u);
        hi = std::max(hi, u);
      }
    }
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    return std::pair{lo, hi};
  };
  std::vector<Series> all = left;
  all.insert(all.end(), right.begin(), right.end());
  const auto [x0, x1] = range(all, true);
  const auto [l0, l1] = range(left, false);
  const auto [r0, r1] = right.empty() ? std::pair{0.0, 1.0} : range(right, false);
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream s;
  s << std::setprecision(6);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << svg_escape(title) << "</text>\n";
  s << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fy = mt + ph - ph * k / 4.0;
    s << "<text x=\"" << ml - 6 << "\" y=\"" << fy + 4 << "\" text-anchor=\"end\">" << l0 + (l1 - l0) * k / 4.0 << "</text>\n";
    if (!right.empty()) {
      s << "<text x=\"" << ml + pw + 6 << "\" y=\"" << fy + 4 << "\">" << r0 + (r1 - r0) * k / 4.0 << "</text>\n";
    }
    const double fx = ml + pw * k / 4.0;
    s << "<text x=\"" << fx << "\" y=\"" << mt + ph + 18 << "\" text-anchor=\"middle\">" << x0 + (x1 - x0) * k / 4.0 << "</text>\n";
  }
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">iteration</text>\n";
  s << "<text x=\"16\" y=\"" << mt + ph / 2 << "\" transform=\"rotate(-90 16 " << mt + ph / 2
    << ")\" text-anchor=\"middle\">" << svg_escape(left_label) << "</text>\n";
  if (!right.empty()) {
    s << "<text x=\"" << W - 12 << "\" y=\"" << mt + ph / 2 << "\" transform=\"rotate(90 " << W - 12 << " " << mt + ph / 2
      << ")\" text-anchor=\"middle\">" << svg_escape(right_label) << "</text>\n";
  }
  int ci = 0;
  auto draw = [&](const Series& ser, double y0, double y1, bool dashed) {
    const char* col = colors[ci % 6];
    s << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"6 4\"" : "")
      << " points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      const double v = ser.log_scale ? std::log10(std::max(ser.y[i], 1e-12)) : ser.y[i];
      s << ml + pw * (ser.x[i] - x0) / (x1 - x0) << "," << mt + ph - ph * (v - y0) / (y1 - y0) << " ";
    }
    s << "\"/>\n";
    s << "<text x=\"" << ml + 10 << "\" y=\"" << mt + 16 + 16 * ci << "\" fill=\"" << col << "\">" << svg_escape(ser.name)
      << (ser.log_scale ? " (log10)" : "") << "</text>\n";
    ++ci;
  };
  for (const auto& ser : left) draw(ser, l0, l1, false);
  for (const auto& ser : right) draw(ser, r0, r1, true);
  s << "</svg>\n";
  return s.str();
}

}  // namespace detail

/// Writes one SVG per run into `out_dir`; returns the written paths.
inline std::vector<fs::path> plot(const std::vector<fs::path>& runs, PlotKind kind, const fs::path& out_dir) {
  if (runs.empty()) throw ValidationError("plot: no runs given");
  std::vector<fs::path> written;
  fs::create_directories(out_dir);
  for (const auto& dir : runs) {
    const auto rec = load_record(dir / "record.jsonl").record;
    auto column = [&](const char* name, auto get) {
      Series s{name, {}, {}};
      for (const auto& r : rec.rows) {
        const std::optional<double> v = get(r);
        if (!v) continue;
        s.x.push_back(r.iteration);
        s.y.push_back(*v);
      }
      if (s.x.empty()) throw ValidationError("plot: run " + dir.string() + " has no '" + name + "' column");
      return s;
    };
    auto lambda = [&] {
      auto s = column("lambda", [](const train::RunRow& r) { return r.lambda; });
      s.log_scale = true;
      return s;
    };
    auto dom = [&] { return column("domain_accuracy", [](const train::RunRow& r) { return r.domain_accuracy; }); };
    std::string svg, suffix;
    const std::string title = dir.filename().string() + " (" + rec.method + ")";
    switch (kind) {
      case PlotKind::kF1Curve: {
        std::vector<Series> left = {
            column("val_f1", [](const train::RunRow& r) { return std::optional<double>(r.val_f1); }),
            column("target_f1", [](const train::RunRow& r) { return std::optional<double>(r.target_f1); })};
        std::vector<Series> right;
        bool has_dann = false;
        for (const auto& r : rec.rows) has_dann = has_dann || r.lambda.has_value();
        if (has_dann) {
          left.push_back(dom());
          right.push_back(lambda());
        }
        svg = detail::line_chart(title, left, right, "weighted F1", "lambda");
        suffix = "f1_curve";
        break;
      }
      case PlotKind::kLambdaTrace:
        svg = detail::line_chart(title, {lambda()}, {}, "lambda", "");
        suffix = "lambda_trace";
        break;
      case PlotKind::kDomainAccuracy:
        svg = detail::line_chart(title, {dom()}, {}, "domain accuracy", "");
        suffix = "domain_accuracy";
        break;
    }
    const fs::path p = out_dir / (dir.filename().string() + "." + suffix + ".svg");
    write_text(p, svg);
    written.push_back(p);
  }
  return written;
}

// ---------------------------------------------------------------------------
// sweeps

struct GridPoint {
  std::string label;
  json assignments = json::object();  // path -> value
};

/// Cartesian product of `grid` ({"params.kappa": [0, 1, 2], ...}); keys vary
/// in lexical order, the last key fastest.
inline std::vector<GridPoint> expand_grid(const json& grid) {
  if (!grid.is_object() || grid.empty()) throw ValidationError("sweep: empty parameter grid");
  std::vector<GridPoint> points = {GridPoint{}};
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    if (!it.value().is_array() || it.value().empty()) {
      throw ValidationError("sweep: grid entry '" + it.key() + "' must be a non-empty list");
    }
    std::vector<GridPoint> next;
    for (const auto& p : points) {
      for (const auto& v : it.value()) {
        GridPoint q = p;
        q.assignments[it.key()] = v;
        q.label += (q.label.empty() ? "" : " ") + it.key() + "=" + v.dump();
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

/// Every point is validated before the first one runs; a point that fails at
/// run time is recorded in its row and the sweep continues.
inline ComparisonTable sweep(const json& base_doc, const fs::path& base_dir, const json& grid,
                             const Progress& cb = {}, std::ostream* log = nullptr) {
  const auto points = expand_grid(grid);
  std::vector<ExperimentConfig> configs;
  Problems probs;
  for (const auto& p : points) {
    json doc = base_doc;
    probs.check(p.label, [&] {
      for (auto it = p.assignments.begin(); it != p.assignments.end(); ++it) set_path(doc, it.key(), it.value());
      configs.push_back(parse_config(doc, base_dir));
    });
  }
  probs.raise("sweep: invalid grid");

  ComparisonTable t;
  for (std::size_t i = 0; i < points.size(); ++i) {
    ComparisonRow row;
    row.label = points[i].label;
    row.method = configs[i].method;
    row.config_hash = configs[i].hash();
    try {
      const auto ref = run(configs[i], cb, log);
      std::string split;
      ComparisonRow r = row_from_run(ref.dir, &split);
      r.label = row.label;
      if (t.split_hash.empty()) t.split_hash = split;
      row = r;
    } catch (const std::exception& e) {
      row.error = e.what();
      if (log) *log << "sweep point '" << row.label << "' failed: " << e.what() << "\n";
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace hartl::harness

#endif  // HARTL_HARNESS_REPORT_HPP_
