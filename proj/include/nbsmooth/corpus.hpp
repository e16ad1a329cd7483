#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nbs {

enum class Domain { Source, Target };
enum class Label { Normal, Anomalous };
enum class Split { Train, Test };

std::string_view to_string(Domain d);
std::string_view to_string(Label l);
std::string_view to_string(Split s);
Domain parse_domain(std::string_view s);
Label parse_label(std::string_view s);
Split parse_split(std::string_view s);

struct ClipMeta {
  std::string clip_id;
  std::string machine;
  int section = 0;
  Domain domain = Domain::Source;
  Label label = Label::Normal;
  Split split = Split::Train;

  bool operator==(const ClipMeta&) const = default;
};

struct AudioClip {
  ClipMeta meta;
  Eigen::VectorXd samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Acoustic character of one synthetic machine type. Free parameters; they
/// make no claim about any recorded machine.
struct MachineDescriptor {
  std::string name;
  std::vector<double> section_f0;  // fundamental per section, Hz
  int n_harmonics = 12;
  double harmonic_rolloff = 0.8;   // amplitude of harmonic h ~ h^-rolloff
  double noise_level = 0.3;        // noise RMS relative to harmonic RMS
  double noise_color = 0.6;        // one-pole low-pass coefficient in [0, 1)
  double f0_jitter = 0.006;        // per-clip relative f0 spread
  double amplitude_jitter_db = 1.5;  // per-harmonic, per-clip level spread

  bool operator==(const MachineDescriptor&) const = default;
};

/// Recording-condition change applied to Target-domain clips.
struct DomainShift {
  double gain_db = -2.0;        // machine component relative to background
  double noise_level = 0.25;    // extra background noise RMS (relative)
  double noise_color = 0.0;     // colour of the extra background noise
  double f0_detune = 0.02;      // relative fundamental shift

  bool operator==(const DomainShift&) const = default;
};

struct AnomalyModel {
  double harmonic_detune = 0.04;   // relative shift of perturbed harmonics
  double burst_energy = 0.8;       // burst RMS relative to harmonic RMS
  double am_depth = 0.5;           // amplitude-modulation depth

  bool operator==(const AnomalyModel&) const = default;
};

enum class DiscrepancyMode { None, Reversal };

/// Parameters for the Reversal scenario: in one (machine, section) the
/// Target-normal test clips get the domain shift multiplied by shift_scale
/// while Target-anomalous test clips are recorded under Source conditions.
struct ReversalSettings {
  int machine = 0;
  int section = 5;
  double shift_scale = 3.0;

  bool operator==(const ReversalSettings&) const = default;
};

struct CorpusSpec {
  std::vector<MachineDescriptor> machines;
  int n_sections = 6;
  int n_train_source = 24;   // per section
  int n_train_target = 3;    // per section
  int n_test = 100;          // per (section, domain, label)
  double duration_seconds = 6.0;
  int sample_rate = 16000;
  DomainShift domain_shift;
  AnomalyModel anomaly_model;
  DiscrepancyMode discrepancy_mode = DiscrepancyMode::None;
  ReversalSettings reversal;
  std::uint64_t seed = 7;

  bool operator==(const CorpusSpec&) const = default;
};

/// Three-machine corpus used by the demo and the acceptance suite.
CorpusSpec default_corpus_spec();

/// Throws ConfigError on zero machines, negative counts or more than six
/// sections.
void validate(const CorpusSpec& spec);

/// Metadata for every clip the spec describes, sorted by clip_id.
std::vector<ClipMeta> plan_corpus(const CorpusSpec& spec);

/// Synthesizes one clip. Depends only on (spec, meta.clip_id), so clips can
/// be produced lazily, in any order or in parallel.
AudioClip synthesize_clip(const CorpusSpec& spec, const ClipMeta& meta);

/// All clips of the spec, in plan order.
std::vector<AudioClip> generate_corpus(const CorpusSpec& spec);

/// Zero mean, unit population variance. Throws DegenerateInputError when
/// the variance is at most 1e-12.
AudioClip standardize(const AudioClip& clip);

/// Sections 0-2 of the test data are validation, 3-5 evaluation.
enum class EvalSplit { Validation, Evaluation };
std::string_view to_string(EvalSplit s);
EvalSplit eval_split_of(int section);

struct ManifestEntry {
  ClipMeta meta;
  std::string path;  // relative to the manifest's directory; may be empty
};

/// Manifest CSV: clip_id,machine,section,domain,label,split,path
void write_manifest(const std::filesystem::path& file,
                    const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& file);

}  // namespace nbs
