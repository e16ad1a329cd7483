#pragma once

#include <cstdint>
#include <vector>

#include "nbsmooth/corpus.hpp"
#include "nbsmooth/dsp.hpp"
#include "nbsmooth/tinynet.hpp"

namespace nbs {

struct AeConfig {
  int context = 5;
  /// Hidden widths between the input and the reconstruction layer. The
  /// default is the ten-layer bottleneck network.
  std::vector<int> hidden = {128, 128, 128, 128, 8, 128, 128, 128, 128};
  int epochs = 20;
  int batch_size = 16;           // segments per mini-batch
  int frames_per_segment = 16;   // context vectors drawn per segment; 0 = all
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  bool operator==(const AeConfig&) const = default;
};

void validate(const AeConfig& config);

struct AeTrainResult {
  MlpModel model;
  std::vector<double> epoch_losses;  // mean mini-batch loss per epoch
};

/// Autoencoder on context vectors drawn from per-segment log-mel
/// spectrograms. Inputs are standardized per mel bin with statistics of the
/// training frames; the standardization is stored in the model.
AeTrainResult train_ae_on_segments(const std::vector<Eigen::MatrixXd>& segments,
                                   const AeConfig& config);

/// Standardizes, segments and featurizes the clips, then trains. All clips
/// must be Normal.
AeTrainResult train_ae(const std::vector<AudioClip>& train_clips,
                       const MelConfig& mel, const AeConfig& config);

/// Mean squared reconstruction error of one context vector, measured on the
/// standardized input.
double score_frame(const MlpModel& model,
                   const Eigen::Ref<const Eigen::RowVectorXd>& frame_vector);

/// score_frame for every row.
Eigen::VectorXd score_frames(const MlpModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& vectors);

/// Mean frame score over the segment's context vectors.
double score_segment(const MlpModel& model,
                     const Eigen::Ref<const Eigen::MatrixXd>& segment_logmel,
                     int context);

struct ClipScore {
  double score = 0.0;
  std::vector<double> segment_scores;
};

ClipScore score_segments(const MlpModel& model,
                         const std::vector<Eigen::MatrixXd>& segment_logmels,
                         int context);

/// Standardize, split into 4 s segments with 75 % overlap, score each
/// segment and average.
ClipScore score_clip(const MlpModel& model, const AudioClip& clip,
                     const MelConfig& mel, const AeConfig& config);

/// Log-mel spectrogram of each 4 s segment of a standardized clip.
std::vector<Eigen::MatrixXd> segment_features(const AudioClip& standardized,
                                              const LogMelExtractor& extractor);

}  // namespace nbs
