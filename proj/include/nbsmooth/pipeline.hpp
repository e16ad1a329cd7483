#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nbsmooth/config.hpp"
#include "nbsmooth/corpus.hpp"
#include "nbsmooth/evaluation.hpp"
#include "nbsmooth/gmm.hpp"
#include "nbsmooth/tables.hpp"

namespace nbs {

/// Clip metadata plus a loader. Clips are produced on demand so a corpus
/// never has to sit in memory at once.
struct ClipSource {
  std::vector<ClipMeta> metas;
  std::function<AudioClip(const ClipMeta&)> load;

  std::vector<std::string> machines() const;
  std::vector<ClipMeta> select(Split split, const std::string& machine = "") const;
};

ClipSource synthetic_source(const CorpusSpec& spec);
ClipSource manifest_source(const std::filesystem::path& manifest);
/// Manifest when config.manifest is set, otherwise the synthetic corpus.
ClipSource make_source(const RunConfig& config);

/// Writes every clip as WAV next to a manifest with relative paths.
void write_corpus(const ClipSource& source, const std::filesystem::path& dir);

struct MachineModels {
  std::string machine;
  MlpModel ae;
  std::optional<DiscModel> disc;
  std::optional<GmmModel> gmm;
};

MlpModel train_ae_for(const ClipSource& source, const std::string& machine,
                      const RunConfig& config);

/// Pooled discriminative inputs of every training clip (one matrix of
/// segment rows per clip, same order as `clips`).
struct PooledClips {
  std::vector<ClipMeta> clips;
  std::vector<Eigen::MatrixXd> pooled;
};
PooledClips pool_train_clips(const ClipSource& source, const RunConfig& config);

/// One discriminative model per machine, trained against all others.
std::vector<DiscModel> train_disc_models(const PooledClips& train, const RunConfig& config);

/// Inlier model h on the clip embeddings of the machine's training clips.
GmmModel fit_gmm_baseline(const DiscModel& disc, const PooledClips& train,
                          const RunConfig& config);

/// Trains AE, discriminative model and GMM for every machine.
/// Progress lines go to `log` when given.
std::vector<MachineModels> train_all(const ClipSource& source, const RunConfig& config,
                                     std::ostream* log = nullptr);

struct TestOutputs {
  ScoreTable scores;  // score_gen, plus score_gmm when GMMs are present
  EmbeddingTable embeddings;
};

/// Scores and embeds every test clip whose machine has models.
TestOutputs score_test(const ClipSource& source, const std::vector<MachineModels>& models,
                       const RunConfig& config);

std::vector<ScoredSample> scored_samples(const TestOutputs& outputs);

/// Everything the demo reports.
struct ExperimentResult {
  TestOutputs outputs;  // scores gain score_smooth and score_oracle
  SweepResult sweep;
  EvalReport ae;
  EvalReport gmm;
  EvalReport proposed;
  EvalReport oracle;
  std::string summary;
};

/// Sweep, smoothing with the chosen and oracle settings, and evaluation on
/// the evaluation sections.
ExperimentResult run_experiment(TestOutputs outputs, const RunConfig& config);

/// Writes scores.csv, embeddings.csv, sweep.csv, choice.csv, report_*.csv,
/// summary.txt.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result);

void save_models(const std::filesystem::path& dir, const std::vector<MachineModels>& models);
/// Reads whatever of ae_/disc_/gmm_<machine>.json exists in `dir`.
std::vector<MachineModels> load_models(const std::filesystem::path& dir);

}  // namespace nbs
