#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nbsmooth/corpus.hpp"
#include "nbsmooth/dsp.hpp"
#include "nbsmooth/tinynet.hpp"

namespace nbs {

struct DiscConfig {
  int embed_dim = 128;
  std::vector<int> hidden = {256};  // trunk widths before the embedding layer
  double lambda_id = 5.0;
  int epochs = 40;
  int batch_size = 128;  // segments; half target machine, half other machines
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;

  bool operator==(const DiscConfig&) const = default;
};

void validate(const DiscConfig& config);

/// Feature extractor f_D (trunk) with the machine head g_mac (one logit) and
/// the section head g_id (one logit per section class). Both heads carry a
/// sigmoid output activation.
struct DiscModel {
  MlpModel trunk;
  MlpModel head_mac;
  MlpModel head_id;
  std::string machine;
  std::vector<int> sections;  // class index -> section number

  int n_classes() const { return static_cast<int>(sections.size()); }
  Eigen::Index embed_dim() const { return trunk.output_dim(); }
};

/// Per-mel temporal mean followed by per-mel population standard deviation.
Eigen::VectorXd pool_spectrogram(const Spectrogram& spec);
Eigen::RowVectorXd pool_frames(const Eigen::Ref<const Eigen::MatrixXd>& frames);

/// Segment-level pooled inputs for training.
struct DiscTrainingSet {
  Eigen::MatrixXd features;            // one pooled segment per row
  std::vector<std::string> machine;    // per row
  std::vector<int> section;            // per row
};

struct SerialOeLoss {
  double total = 0.0;
  double machine = 0.0;
  double id = 0.0;
  Gradients trunk;
  Gradients head_mac;
  Gradients head_id;
};

/// L_machine + lambda_id * L_id for one batch. t_mac[i] is 1 for target
/// machine rows and 0 for pseudo-anomalies; id_class[i] is the section class
/// of target rows and -1 otherwise. L_id averages over target rows and
/// classes only.
SerialOeLoss serialoe_loss(const DiscModel& model,
                           const Eigen::Ref<const Eigen::MatrixXd>& batch,
                           const Eigen::Ref<const Eigen::VectorXd>& t_mac,
                           const std::vector<int>& id_class, double lambda_id);

/// Untrained model with input standardization fitted on `features`.
DiscModel init_disc(const std::string& machine, const std::vector<int>& sections,
                    const Eigen::Ref<const Eigen::MatrixXd>& features,
                    const DiscConfig& config);

struct DiscTrainResult {
  DiscModel model;
  std::vector<double> epoch_losses;
};

/// Other machines' segments serve as pseudo-anomalies. Throws ConfigError
/// when the set holds no other machine.
DiscTrainResult train_disc_on_features(const std::string& target_machine,
                                       const DiscTrainingSet& data,
                                       const DiscConfig& config);

DiscModel train_disc(const std::string& target_machine,
                     const std::vector<AudioClip>& train_clips,
                     const MelConfig& mel, const DiscConfig& config);

/// Segment embeddings f_D for pooled segment rows.
Eigen::MatrixXd embed_rows(const DiscModel& model,
                           const Eigen::Ref<const Eigen::MatrixXd>& pooled);

/// Clip embedding: mean of the segment embeddings.
Eigen::VectorXd embed_segments(const DiscModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& pooled);

Eigen::VectorXd embed(const DiscModel& model, const AudioClip& clip,
                      const MelConfig& mel);

/// sigma(g_mac(f_D(x))) per pooled row.
Eigen::VectorXd machine_probability(const DiscModel& model,
                                    const Eigen::Ref<const Eigen::MatrixXd>& pooled);

/// Pooled log-mel of every 4 s segment of a standardized clip, one per row.
Eigen::MatrixXd pooled_segments(const AudioClip& standardized,
                                const LogMelExtractor& extractor);

nlohmann::json to_json(const DiscModel& model);
DiscModel disc_from_json(const nlohmann::json& doc);

}  // namespace nbs
