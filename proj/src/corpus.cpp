#include "nbsmooth/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "nbsmooth/csv.hpp"
#include "nbsmooth/error.hpp"
#include "nbsmooth/parallel.hpp"
#include "nbsmooth/random.hpp"

namespace nbs {

std::string_view to_string(Domain d) {
  return d == Domain::Source ? "source" : "target";
}
std::string_view to_string(Label l) {
  return l == Label::Normal ? "normal" : "anomaly";
}
std::string_view to_string(Split s) {
  return s == Split::Train ? "train" : "test";
}
std::string_view to_string(EvalSplit s) {
  return s == EvalSplit::Validation ? "validation" : "evaluation";
}

Domain parse_domain(std::string_view s) {
  if (s == "source") return Domain::Source;
  if (s == "target") return Domain::Target;
  throw FormatError("unknown domain '" + std::string(s) + "'");
}
Label parse_label(std::string_view s) {
  if (s == "normal") return Label::Normal;
  if (s == "anomaly") return Label::Anomalous;
  throw FormatError("unknown label '" + std::string(s) + "'");
}
Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

EvalSplit eval_split_of(int section) {
  return section < 3 ? EvalSplit::Validation : EvalSplit::Evaluation;
}

namespace {

std::vector<double> geometric_sections(double base, double step, int n) {
  std::vector<double> f0(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) f0[s] = base * std::pow(step, s);
  return f0;
}

}  // namespace

CorpusSpec default_corpus_spec() {
  CorpusSpec spec;
  MachineDescriptor fan;
  fan.name = "fan";
  fan.section_f0 = geometric_sections(118.0, 1.06, 6);
  fan.n_harmonics = 14;
  fan.harmonic_rolloff = 0.7;
  fan.noise_level = 0.35;
  fan.noise_color = 0.5;

  MachineDescriptor pump;
  pump.name = "pump";
  pump.section_f0 = geometric_sections(152.0, 1.06, 6);
  pump.n_harmonics = 10;
  pump.harmonic_rolloff = 1.0;
  pump.noise_level = 0.3;
  pump.noise_color = 0.8;

  MachineDescriptor slider;
  slider.name = "slider";
  slider.section_f0 = geometric_sections(86.0, 1.06, 6);
  slider.n_harmonics = 18;
  slider.harmonic_rolloff = 0.5;
  slider.noise_level = 0.4;
  slider.noise_color = 0.3;

  spec.machines = {fan, pump, slider};
  return spec;
}

void validate(const CorpusSpec& spec) {
  if (spec.machines.empty()) throw ConfigError("corpus has zero machines");
  if (spec.n_sections < 0 || spec.n_sections > 6) {
    throw ConfigError("corpus.n_sections must lie in [0, 6], got " +
                      std::to_string(spec.n_sections));
  }
  if (spec.n_train_source < 0 || spec.n_train_target < 0 || spec.n_test < 0) {
    throw ConfigError("corpus counts must be non-negative");
  }
  if (!(spec.duration_seconds > 0.0)) {
    throw ConfigError("corpus.duration_seconds must be positive");
  }
  if (spec.sample_rate <= 0) {
    throw ConfigError("corpus.sample_rate must be positive");
  }
  for (const auto& m : spec.machines) {
    if (m.name.empty() || m.name.find_first_of(",_ \n") != std::string::npos) {
      throw ConfigError("invalid machine name '" + m.name + "'");
    }
    if (static_cast<int>(m.section_f0.size()) < spec.n_sections) {
      throw ConfigError("machine '" + m.name + "' defines " +
                        std::to_string(m.section_f0.size()) +
                        " section fundamentals, corpus needs " +
                        std::to_string(spec.n_sections));
    }
    if (m.n_harmonics < 1) {
      throw ConfigError("machine '" + m.name + "' needs >= 1 harmonic");
    }
    if (m.noise_color < 0.0 || m.noise_color >= 1.0) {
      throw ConfigError("machine '" + m.name + "' noise_color outside [0, 1)");
    }
  }
  for (std::size_t i = 0; i < spec.machines.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.machines.size(); ++j) {
      if (spec.machines[i].name == spec.machines[j].name) {
        throw ConfigError("duplicate machine name '" + spec.machines[i].name +
                          "'");
      }
    }
  }
}

std::vector<ClipMeta> plan_corpus(const CorpusSpec& spec) {
  validate(spec);
  std::vector<ClipMeta> plan;
  auto add = [&](const std::string& machine, int section, Split split,
                 Domain domain, Label label, int count) {
    for (int i = 0; i < count; ++i) {
      char id[128];
      std::snprintf(id, sizeof id, "%s_sec%02d_%s_%s_%s_%04d", machine.c_str(),
                    section, std::string(to_string(split)).c_str(),
                    std::string(to_string(domain)).c_str(),
                    std::string(to_string(label)).c_str(), i);
      plan.push_back({id, machine, section, domain, label, split});
    }
  };
  for (const auto& m : spec.machines) {
    for (int s = 0; s < spec.n_sections; ++s) {
      add(m.name, s, Split::Train, Domain::Source, Label::Normal,
          spec.n_train_source);
      add(m.name, s, Split::Train, Domain::Target, Label::Normal,
          spec.n_train_target);
      for (Domain d : {Domain::Source, Domain::Target}) {
        for (Label l : {Label::Normal, Label::Anomalous}) {
          add(m.name, s, Split::Test, d, l, spec.n_test);
        }
      }
    }
  }
  std::sort(plan.begin(), plan.end(),
            [](const ClipMeta& a, const ClipMeta& b) {
              return a.clip_id < b.clip_id;
            });
  return plan;
}

namespace {

/// One-pole low-pass filtered Gaussian noise, scaled to the given RMS.
Eigen::VectorXd colored_noise(Rng& rng, Eigen::Index n, double color,
                              double rms) {
  Eigen::VectorXd out(n);
  double state = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    state = color * state + (1.0 - color) * rng.normal();
    out[i] = state;
  }
  const double current = std::sqrt(out.squaredNorm() / static_cast<double>(n));
  if (current > 0.0) out *= rms / current;
  return out;
}

struct HarmonicPlan {
  double freq;
  double amplitude;
  double phase;
};

Eigen::VectorXd render_harmonics(const std::vector<HarmonicPlan>& partials,
                                 Eigen::Index n, int sample_rate) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (const auto& p : partials) {
    const double w = 2.0 * std::numbers::pi * p.freq / sample_rate;
    const std::complex<double> step(std::cos(w), std::sin(w));
    std::complex<double> phasor(std::cos(p.phase), std::sin(p.phase));
    for (Eigen::Index i = 0; i < n; ++i) {
      out[i] += p.amplitude * phasor.imag();
      phasor *= step;
      if ((i & 4095) == 4095) phasor /= std::abs(phasor);
    }
  }
  return out;
}

int machine_index(const CorpusSpec& spec, const std::string& name) {
  for (std::size_t i = 0; i < spec.machines.size(); ++i) {
    if (spec.machines[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("clip refers to unknown machine '" + name + "'");
}

}  // namespace

AudioClip synthesize_clip(const CorpusSpec& spec, const ClipMeta& meta) {
  const int mi = machine_index(spec, meta.machine);
  const MachineDescriptor& machine = spec.machines[mi];
  if (meta.section < 0 || meta.section >= spec.n_sections) {
    throw ConfigError("clip section out of range: " + meta.clip_id);
  }
  Rng rng(derive_seed(spec.seed, meta.clip_id));
  const auto n = static_cast<Eigen::Index>(
      std::llround(spec.duration_seconds * spec.sample_rate));
  const double nyquist_guard = std::min(7600.0, 0.475 * spec.sample_rate);

  // Which recording conditions apply to this clip.
  const bool reversal_cell = spec.discrepancy_mode == DiscrepancyMode::Reversal &&
                             mi == spec.reversal.machine &&
                             meta.section == spec.reversal.section &&
                             meta.split == Split::Test &&
                             meta.domain == Domain::Target;
  double shift_scale = meta.domain == Domain::Target ? 1.0 : 0.0;
  if (reversal_cell && meta.label == Label::Anomalous) shift_scale = 0.0;
  if (reversal_cell && meta.label == Label::Normal) shift_scale = spec.reversal.shift_scale;
  const DomainShift& shift = spec.domain_shift;

  const double f0 = machine.section_f0[meta.section] *
                    (1.0 + machine.f0_jitter * rng.normal()) *
                    (1.0 + shift_scale * shift.f0_detune);

  std::vector<HarmonicPlan> partials;
  for (int h = 1; h <= machine.n_harmonics; ++h) {
    const double amp =
        std::pow(static_cast<double>(h), -machine.harmonic_rolloff) *
        std::pow(10.0, machine.amplitude_jitter_db * rng.normal() / 20.0);
    partials.push_back({f0 * h, amp, rng.uniform(0.0, 2.0 * std::numbers::pi)});
  }

  // Each (machine, section) has one fault signature; clips differ only in
  // severity and timing. Per-clip draws happen for every clip so the random
  // stream layout does not depend on the label.
  Rng fault(derive_seed(derive_seed(spec.seed, "fault/" + meta.machine),
                        static_cast<std::uint64_t>(meta.section)));
  // Weights of the detune, burst and modulation components: the section's
  // primary kind at full strength, the others weaker.
  std::array<double, 3> weight{};
  const std::size_t primary = fault.index(3);
  for (std::size_t k = 0; k < weight.size(); ++k) {
    weight[k] = k == primary ? 1.0 : fault.uniform(0.2, 0.5);
  }
  std::vector<double> detune(partials.size(), 0.0);
  for (auto& d : detune) {
    if (fault.uniform() < 1.0 / 3.0) d = fault.uniform() < 0.5 ? -1.0 : 1.0;
  }
  if (std::all_of(detune.begin(), detune.end(), [](double d) { return d == 0.0; })) {
    detune[fault.index(detune.size())] = 1.0;
  }
  const double am_rate = fault.uniform(3.0, 10.0);
  const double severity = rng.uniform(0.5, 1.0);
  const bool anomalous = meta.label == Label::Anomalous;
  const AnomalyModel& am = spec.anomaly_model;

  if (anomalous) {
    for (std::size_t h = 0; h < partials.size(); ++h) {
      partials[h].freq *= 1.0 + detune[h] * am.harmonic_detune * severity * weight[0];
    }
  }
  std::erase_if(partials,
                [&](const HarmonicPlan& p) { return p.freq >= nyquist_guard; });

  Eigen::VectorXd harmonic = render_harmonics(partials, n, spec.sample_rate);
  const double harmonic_rms =
      std::sqrt(harmonic.squaredNorm() / static_cast<double>(n));
  if (harmonic_rms > 0.0) harmonic /= harmonic_rms;
  harmonic *= std::pow(10.0, shift_scale * shift.gain_db / 20.0);

  if (anomalous) {
    const double rate = am_rate;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double depth = am.am_depth * severity * weight[2];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / spec.sample_rate;
      harmonic[i] *=
          1.0 + depth * std::sin(2.0 * std::numbers::pi * rate * t + phase);
    }
  }

  const double load = rng.uniform(0.85, 1.15);
  Eigen::VectorXd signal =
      harmonic + colored_noise(rng, n, machine.noise_color,
                               machine.noise_level * load);
  if (shift_scale > 0.0 && shift.noise_level > 0.0) {
    signal += colored_noise(rng, n, shift.noise_color,
                            shift.noise_level * shift_scale);
  }

  if (anomalous) {
    const int bursts = 3 + static_cast<int>(rng.index(6));
    for (int b = 0; b < bursts; ++b) {
      const auto len = static_cast<Eigen::Index>(
          rng.uniform(0.02, 0.08) * spec.sample_rate);
      if (len >= n) continue;
      const auto start = static_cast<Eigen::Index>(
          rng.index(static_cast<std::size_t>(n - len)));
      const double gain = am.burst_energy * severity * weight[1] * std::sqrt(2.0);
      for (Eigen::Index i = 0; i < len; ++i) {
        const double env =
            std::sin(std::numbers::pi * static_cast<double>(i) / len);
        signal[start + i] += gain * env * rng.normal();
      }
    }
  }

  // Fixed output level, quantized to the 16-bit PCM grid so that a WAV
  // round trip reproduces the clip exactly.
  const double rms = std::sqrt(signal.squaredNorm() / static_cast<double>(n));
  if (rms > 0.0) signal *= 0.1 / rms;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = std::clamp(std::round(signal[i] * 32768.0), -32768.0,
                                32767.0);
    signal[i] = q / 32768.0;
  }

  AudioClip clip;
  clip.meta = meta;
  clip.samples = std::move(signal);
  clip.sample_rate = spec.sample_rate;
  return clip;
}

std::vector<AudioClip> generate_corpus(const CorpusSpec& spec) {
  const auto plan = plan_corpus(spec);
  std::vector<AudioClip> clips(plan.size());
  parallel_for(plan.size(),
               [&](std::size_t i) { clips[i] = synthesize_clip(spec, plan[i]); });
  return clips;
}

AudioClip standardize(const AudioClip& clip) {
  const auto n = clip.samples.size();
  if (n == 0) throw DegenerateInputError("cannot standardize an empty clip");
  const double mean = clip.samples.mean();
  const double var =
      (clip.samples.array() - mean).square().sum() / static_cast<double>(n);
  if (!(var > 1e-12)) {
    throw DegenerateInputError("clip '" + clip.meta.clip_id +
                               "' is (near-)constant; variance " +
                               csv::format_number(var));
  }
  AudioClip out;
  out.meta = clip.meta;
  out.sample_rate = clip.sample_rate;
  out.samples = (clip.samples.array() - mean) / std::sqrt(var);
  return out;
}

void write_manifest(const std::filesystem::path& file,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << "clip_id,machine,section,domain,label,split,path\n";
  for (const auto& e : entries) {
    out << csv::checked_field(e.meta.clip_id) << ','
        << csv::checked_field(e.meta.machine) << ',' << e.meta.section << ','
        << to_string(e.meta.domain) << ',' << to_string(e.meta.label) << ','
        << to_string(e.meta.split) << ',' << csv::checked_field(e.path)
        << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& file) {
  const auto doc = csv::read(file);
  const auto c_id = doc.column("clip_id");
  const auto c_machine = doc.column("machine");
  const auto c_section = doc.column("section");
  const auto c_domain = doc.column("domain");
  const auto c_label = doc.column("label");
  const auto c_split = doc.column("split");
  const auto c_path = doc.column("path");
  std::vector<ManifestEntry> entries;
  entries.reserve(doc.rows.size());
  for (const auto& row : doc.rows) {
    ManifestEntry e;
    e.meta.clip_id = row[c_id];
    e.meta.machine = row[c_machine];
    try {
      e.meta.section = std::stoi(row[c_section]);
    } catch (const std::exception&) {
      throw FormatError("bad section '" + row[c_section] + "' for clip " +
                        row[c_id]);
    }
    e.meta.domain = parse_domain(row[c_domain]);
    e.meta.label = parse_label(row[c_label]);
    e.meta.split = parse_split(row[c_split]);
    if (e.meta.split == Split::Train && e.meta.label == Label::Anomalous) {
      throw DataIntegrityError("anomalous clip in train split: " +
                               e.meta.clip_id);
    }
    e.path = row[c_path];
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace nbs
