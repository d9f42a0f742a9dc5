#ifndef HARTL_SYNTHGEN_HPP_
#define HARTL_SYNTHGEN_HPP_

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hartl/data/recording.hpp"

namespace hartl::synth {

using json = nlohmann::json;

struct Sinusoid {
  double frequency = 1.0;  // Hz
  double amplitude = 1.0;
  double phase = 0.0;
};

/// Latent waveform of one class on one channel: a constant level (posture /
/// gravity component) plus a sum of sinusoids.
struct ChannelPrototype {
  double level = 0.0;
  std::vector<Sinusoid> components;
};

struct ClassPrototype {
  std::vector<ChannelPrototype> channels;
};

/// Random prototypes: per channel a level in [-level_spread, level_spread]
/// and `components` sinusoids with frequencies in [0.5, 4] Hz.
inline std::vector<ClassPrototype> random_prototypes(int n_classes, int n_channels, std::uint64_t seed,
                                                     int components = 2, double level_spread = 0.5) {
  std::mt19937_64 rng(derive_seed(seed, "prototypes"));
  std::uniform_real_distribution<double> freq(0.5, 4.0), amp(0.3, 1.0), phase(0.0, 2.0 * std::numbers::pi),
      level(-level_spread, level_spread);
  std::vector<ClassPrototype> out(n_classes);
  for (auto& p : out) {
    p.channels.resize(n_channels);
    for (auto& c : p.channels) {
      c.level = level(rng);
      for (int k = 0; k < components; ++k) c.components.push_back({freq(rng), amp(rng), phase(rng)});
    }
  }
  return out;
}

struct ChannelShift {
  double gain = 1.0;
  double offset = 0.0;
};

/// Two-domain generator description. The target domain applies, per channel,
/// x -> gain * x + offset, then rotates the first `rotation_pairs` channel
/// pairs (0,1), (2,3), ... by `rotation_angle` radians. Noise is added after
/// the shift.
struct ShiftSpec {
  int n_classes = 4;
  int n_channels = 8;
  int seq_length = 2400;
  int segment_min = 36;
  int segment_max = 72;
  double null_fraction = 0.25;
  double sample_rate = 30.0;
  std::vector<ClassPrototype> class_prototypes;
  std::vector<ChannelShift> shift;  // empty = identity
  double rotation_angle = 0.0;
  int rotation_pairs = 0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_classes < 2) throw ValidationError("synth: n_classes must be >= 2");
    if (n_channels < 1) throw ValidationError("synth: n_channels must be >= 1");
    if (seq_length < 1) throw ValidationError("synth: seq_length must be >= 1");
    if (segment_min < 1 || segment_max < segment_min) throw ValidationError("synth: bad segment length range");
    if (!(noise_sigma >= 0.0)) throw ValidationError("synth: noise_sigma must be >= 0");
    if (null_fraction < 0.0 || null_fraction >= 1.0) throw ValidationError("synth: null_fraction must be in [0, 1)");
    if (static_cast<int>(class_prototypes.size()) != n_classes) {
      throw ValidationError("synth: need one prototype per class");
    }
    for (const auto& p : class_prototypes) {
      if (static_cast<int>(p.channels.size()) != n_channels) {
        throw ValidationError("synth: prototype channel count differs from n_channels");
      }
    }
    if (!shift.empty() && static_cast<int>(shift.size()) != n_channels) {
      throw ValidationError("synth: shift must list every channel or be empty");
    }
    if (rotation_pairs < 0 || 2 * rotation_pairs > n_channels) {
      throw ValidationError("synth: rotation_pairs exceeds the channel count");
    }
  }

  json to_json() const {
    json protos = json::array();
    for (const auto& p : class_prototypes) {
      json chans = json::array();
      for (const auto& c : p.channels) {
        json comps = json::array();
        for (const auto& s : c.components) comps.push_back({s.frequency, s.amplitude, s.phase});
        chans.push_back({{"level", c.level}, {"components", comps}});
      }
      protos.push_back(chans);
    }
    json sh = json::array();
    for (const auto& s : shift) sh.push_back({{"gain", s.gain}, {"offset", s.offset}});
    return {{"n_classes", n_classes},         {"n_channels", n_channels},
            {"seq_length", seq_length},       {"segment_min", segment_min},
            {"segment_max", segment_max},     {"null_fraction", null_fraction},
            {"sample_rate", sample_rate},     {"class_prototypes", protos},
            {"shift", sh},                    {"rotation_angle", rotation_angle},
            {"rotation_pairs", rotation_pairs}, {"noise_sigma", noise_sigma},
            {"seed", seed}};
  }

  static ShiftSpec from_json(const json& j) {
    static const char* allowed[] = {"n_classes",   "n_channels",  "seq_length",     "segment_min",
                                    "segment_max", "null_fraction", "sample_rate",  "class_prototypes",
                                    "shift",       "rotation_angle", "rotation_pairs", "noise_sigma",
                                    "seed",        "prototype_generator"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) throw ValidationError("synth: unknown key '" + it.key() + "'");
    }
    ShiftSpec s;
    s.n_classes = j.value("n_classes", s.n_classes);
    s.n_channels = j.value("n_channels", s.n_channels);
    s.seq_length = j.value("seq_length", s.seq_length);
    s.segment_min = j.value("segment_min", s.segment_min);
    s.segment_max = j.value("segment_max", s.segment_max);
    s.null_fraction = j.value("null_fraction", s.null_fraction);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    if (j.contains("prototype_generator")) {
      const json& g = j.at("prototype_generator");
      s.class_prototypes = random_prototypes(s.n_classes, s.n_channels, g.at("seed").get<std::uint64_t>(),
                                             g.value("components", 2), g.value("level_spread", 0.5));
    }
    for (const auto& p : j.value("class_prototypes", json::array())) {
      ClassPrototype cp;
      for (const auto& c : p) {
        ChannelPrototype ch;
        ch.level = c.value("level", 0.0);
        for (const auto& s3 : c.at("components")) {
          ch.components.push_back({s3.at(0).get<double>(), s3.at(1).get<double>(), s3.at(2).get<double>()});
        }
        cp.channels.push_back(std::move(ch));
      }
      s.class_prototypes.push_back(std::move(cp));
    }
    for (const auto& sh : j.value("shift", json::array())) {
      s.shift.push_back({sh.value("gain", 1.0), sh.value("offset", 0.0)});
    }
    s.rotation_angle = j.value("rotation_angle", 0.0);
    s.rotation_pairs = j.value("rotation_pairs", 0);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
  }
};

/// Applies the target-domain transform to one clean time instant (in place).
inline void apply_shift(const ShiftSpec& spec, Eigen::Ref<RowVector> x) {
  if (!spec.shift.empty()) {
    for (int c = 0; c < spec.n_channels; ++c) x(c) = spec.shift[c].gain * x(c) + spec.shift[c].offset;
  }
  if (spec.rotation_pairs > 0 && spec.rotation_angle != 0.0) {
    const double cs = std::cos(spec.rotation_angle);
    const double sn = std::sin(spec.rotation_angle);
    for (int p = 0; p < spec.rotation_pairs; ++p) {
      const double a = x(2 * p);
      const double b = x(2 * p + 1);
      x(2 * p) = cs * a - sn * b;
      x(2 * p + 1) = sn * a + cs * b;
    }
  }
}

struct GeneratedPair {
  data::SensorRecording source;
  data::SensorRecording target;
  Matrix clean;  // noiseless, unshifted signal
};

/// Pure function of `spec`: segment layout, phases and noise all come from
/// streams derived from spec.seed, shared by both domains.
inline GeneratedPair generate(const ShiftSpec& spec) {
  spec.validate();
  std::mt19937_64 layout_rng(derive_seed(spec.seed, "layout"));
  std::mt19937_64 noise_rng(derive_seed(spec.seed, "noise"));
  std::uniform_int_distribution<int> seg_len(spec.segment_min, spec.segment_max);
  std::uniform_int_distribution<int> cls(1, spec.n_classes);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> jitter(0.85, 1.15);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int T = spec.seq_length;
  const int C = spec.n_channels;
  GeneratedPair out;
  out.clean = Matrix::Zero(T, C);
  std::vector<int> labels(T, data::kNullClass);
  int t = 0;
  while (t < T) {
    const int len = std::min(seg_len(layout_rng), T - t);
    const bool is_null = unit(layout_rng) < spec.null_fraction;
    const int label = is_null ? data::kNullClass : cls(layout_rng);
    const double shift_phase = phase(layout_rng);
    const double scale = jitter(layout_rng);
    // Null segments blend two random class prototypes at low amplitude.
    const int mix_a = cls(layout_rng) - 1;
    const int mix_b = cls(layout_rng) - 1;
    for (int u = 0; u < len; ++u) {
      const double time = (t + u) / spec.sample_rate;
      for (int c = 0; c < C; ++c) {
        double v = 0.0;
        if (is_null) {
          for (int which : {mix_a, mix_b}) {
            const auto& ch = spec.class_prototypes[which].channels[c];
            v += 0.5 * ch.level;
            for (const auto& s : ch.components) {
              v += 0.3 * s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * time + s.phase + shift_phase);
            }
          }
        } else {
          const auto& ch = spec.class_prototypes[label - 1].channels[c];
          v = ch.level;
          for (const auto& s : ch.components) {
            v += scale * s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * time + s.phase + shift_phase);
          }
        }
        out.clean(t + u, c) = v;
      }
      labels[t + u] = label;
    }
    t += len;
  }

  Matrix noise(T, C);
  for (int r = 0; r < T; ++r) {
    for (int c = 0; c < C; ++c) noise(r, c) = spec.noise_sigma * gauss(noise_rng);
  }

  auto make = [&](bool shifted) {
    data::SensorRecording rec;
    rec.sample_rate = spec.sample_rate;
    rec.channels = out.clean;
    if (shifted) {
      for (int r = 0; r < T; ++r) {
        RowVector row = rec.channels.row(r);
        apply_shift(spec, row);
        rec.channels.row(r) = row;
      }
    }
    rec.channels += noise;
    rec.labels = labels;
    rec.channel_mask.assign(C, true);
    for (int c = 0; c < C; ++c) rec.channel_names.push_back("synth" + std::to_string(c + 1));
    return rec;
  };
  out.source = make(false);
  out.target = make(true);
  return out;
}

inline const std::vector<std::string>& fixture_runs() {
  static const std::vector<std::string> runs = {"ADL1", "ADL2", "ADL3", "ADL4", "ADL5", "Drill"};
  return runs;
}

/// Two synthetic "subjects" laid out like the real corpus: every run of
/// `source_subject` is the source side of one generate() call, every run of
/// `target_subject` the target side of an independent call, so the two
/// subjects share prototypes and shift but not segment layout or noise.
inline std::vector<data::SensorRecording> generate_subjects(const ShiftSpec& spec, int source_subject = 3,
                                                            int target_subject = 4) {
  std::vector<data::SensorRecording> out;
  for (const auto& run : fixture_runs()) {
    ShiftSpec s = spec;
    s.seed = derive_seed(spec.seed, "source/" + run);
    auto src = generate(s).source;
    src.subject_id = source_subject;
    src.run_id = run;
    out.push_back(std::move(src));
    s.seed = derive_seed(spec.seed, "target/" + run);
    auto tgt = generate(s).target;
    tgt.subject_id = target_subject;
    tgt.run_id = run;
    out.push_back(std::move(tgt));
  }
  return out;
}

/// Manifest describing files written by `data::write_recording` for a
/// synthetic spec: channels in columns 1..C, label code 100 + k in C + 1.
inline json synthetic_manifest(const ShiftSpec& spec) {
  json classes = json::array();
  for (int k = 1; k <= spec.n_classes; ++k) {
    classes.push_back({{"code", 100 + k}, {"id", k}, {"name", "class" + std::to_string(k)}});
  }
  json chans = json::array();
  for (int c = 1; c <= spec.n_channels; ++c) chans.push_back({{"column", c}, {"name", "synth" + std::to_string(c)}});
  return {{"schema_version", 1},           {"name", "synthetic"},          {"delimiter", "whitespace"},
          {"column_count", spec.n_channels + 1}, {"channels", chans},     {"label_column", spec.n_channels + 1},
          {"null_codes", {0}},             {"classes", classes},           {"sample_rate", spec.sample_rate}};
}

inline std::vector<std::int64_t> synthetic_codes(const ShiftSpec& spec) {
  std::vector<std::int64_t> codes;
  for (int k = 1; k <= spec.n_classes; ++k) codes.push_back(100 + k);
  return codes;
}

}  // namespace hartl::synth

#endif  // HARTL_SYNTHGEN_HPP_
