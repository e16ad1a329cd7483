#include "nbsmooth/disc_embedder.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "nbsmooth/error.hpp"

namespace nbs {

void validate(const DiscConfig& c) {
  if (c.embed_dim < 2) throw ConfigError("disc.embed_dim must be >= 2");
  if (c.lambda_id < 0.0) throw ConfigError("disc.lambda_id must be >= 0");
  if (c.epochs < 0) throw ConfigError("disc.epochs must be >= 0");
  if (c.batch_size < 2) throw ConfigError("disc.batch_size must be >= 2");
  if (!(c.learning_rate > 0.0)) throw ConfigError("disc.learning_rate must be > 0");
  if (c.weight_decay < 0.0) throw ConfigError("disc.weight_decay must be >= 0");
  for (int h : c.hidden) {
    if (h < 1) throw ConfigError("disc.hidden widths must be >= 1");
  }
}

Eigen::RowVectorXd pool_frames(const Eigen::Ref<const Eigen::MatrixXd>& frames) {
  if (frames.rows() < 2) {
    throw SizeError("pooling needs >= 2 frames, got " +
                    std::to_string(frames.rows()));
  }
  const Eigen::Index mels = frames.cols();
  const double n = static_cast<double>(frames.rows());
  Eigen::RowVectorXd out(2 * mels);
  const Eigen::RowVectorXd mean = frames.colwise().sum() / n;
  out.head(mels) = mean;
  out.tail(mels) =
      ((frames.rowwise() - mean).array().square().colwise().sum() / n).sqrt();
  return out;
}

Eigen::VectorXd pool_spectrogram(const Spectrogram& spec) {
  return pool_frames(spec.values).transpose();
}

Eigen::MatrixXd pooled_segments(const AudioClip& standardized,
                                const LogMelExtractor& extractor) {
  const auto segs = segment_clip(standardized);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(segs.size()),
                      2 * extractor.config().n_mels);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        pool_frames(extractor.compute(segs[i].samples));
  }
  return out;
}

DiscModel init_disc(const std::string& machine, const std::vector<int>& sections,
                    const Eigen::Ref<const Eigen::MatrixXd>& features,
                    const DiscConfig& config) {
  validate(config);
  if (sections.empty()) {
    throw ConfigError("machine '" + machine + "' has no sections to classify");
  }
  if (features.rows() < 1) throw ConfigError("discriminative training set is empty");
  Rng rng(config.seed);
  const int in_dim = static_cast<int>(features.cols());
  std::vector<LayerSpec> trunk_layers;
  for (int h : config.hidden) trunk_layers.push_back({h, Activation::ReLU});
  trunk_layers.push_back({config.embed_dim, Activation::ReLU});

  DiscModel model;
  model.machine = machine;
  model.sections = sections;
  model.trunk = make_mlp(in_dim, trunk_layers, rng);
  model.head_mac = make_mlp(config.embed_dim, {{1, Activation::Sigmoid}}, rng);
  model.head_id = make_mlp(config.embed_dim,
                           {{static_cast<int>(sections.size()), Activation::Sigmoid}},
                           rng);

  const Eigen::RowVectorXd mean = features.colwise().mean();
  const Eigen::RowVectorXd stdev =
      ((features.rowwise() - mean).array().square().colwise().sum() /
       static_cast<double>(features.rows()))
          .sqrt()
          .matrix()
          .cwiseMax(1e-3);
  model.trunk.input_shift = mean;
  model.trunk.input_scale = stdev;
  return model;
}

SerialOeLoss serialoe_loss(const DiscModel& model,
                           const Eigen::Ref<const Eigen::MatrixXd>& batch,
                           const Eigen::Ref<const Eigen::VectorXd>& t_mac,
                           const std::vector<int>& id_class, double lambda_id) {
  const Eigen::Index m = batch.rows();
  if (t_mac.size() != m || static_cast<Eigen::Index>(id_class.size()) != m) {
    throw ShapeError("SerialOE targets do not match batch size");
  }
  const int classes = model.n_classes();
  const ForwardTrace trunk = forward_trace(model.trunk, batch);
  const Eigen::MatrixXd& emb = trunk.output();

  SerialOeLoss out;
  const ForwardTrace mac = forward_trace(model.head_mac, emb);
  LossValue mac_loss = evaluate_loss(LossKind::Bce, mac.output(), t_mac);
  out.machine = mac_loss.value;
  Eigen::MatrixXd d_emb;
  out.head_mac = backpropagate(model.head_mac, mac, std::move(mac_loss.d_output), &d_emb);

  std::vector<Eigen::Index> target_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int c = id_class[static_cast<std::size_t>(i)];
    if (c >= classes) throw ShapeError("section class index out of range");
    if (c >= 0) target_rows.push_back(i);
  }
  out.head_id = Gradients::zeros_like(model.head_id);
  if (!target_rows.empty()) {
    const auto mt = static_cast<Eigen::Index>(target_rows.size());
    Eigen::MatrixXd emb_t(mt, emb.cols());
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(mt, classes);
    for (Eigen::Index r = 0; r < mt; ++r) {
      const Eigen::Index row = target_rows[static_cast<std::size_t>(r)];
      emb_t.row(r) = emb.row(row);
      onehot(r, id_class[static_cast<std::size_t>(row)]) = 1.0;
    }
    const ForwardTrace id = forward_trace(model.head_id, emb_t);
    LossValue id_loss = evaluate_loss(LossKind::Bce, id.output(), onehot);
    out.id = id_loss.value;
    if (lambda_id != 0.0) {
      Eigen::MatrixXd d_emb_t;
      out.head_id = backpropagate(model.head_id, id,
                                  lambda_id * id_loss.d_output, &d_emb_t);
      for (Eigen::Index r = 0; r < mt; ++r) {
        d_emb.row(target_rows[static_cast<std::size_t>(r)]) += d_emb_t.row(r);
      }
    }
  }
  out.trunk = backpropagate(model.trunk, trunk, std::move(d_emb));
  out.total = lambda_id == 0.0 ? out.machine : out.machine + lambda_id * out.id;
  return out;
}

DiscTrainResult train_disc_on_features(const std::string& target_machine,
                                       const DiscTrainingSet& data,
                                       const DiscConfig& config) {
  validate(config);
  const auto n = static_cast<std::size_t>(data.features.rows());
  if (data.machine.size() != n || data.section.size() != n) {
    throw ShapeError("discriminative training set columns disagree in length");
  }
  std::vector<std::size_t> target, others;
  std::map<int, int> section_class;
  for (std::size_t i = 0; i < n; ++i) {
    if (data.machine[i] == target_machine) {
      target.push_back(i);
      section_class.emplace(data.section[i], 0);
    } else {
      others.push_back(i);
    }
  }
  if (target.empty()) {
    throw ConfigError("no training segments for machine '" + target_machine + "'");
  }
  if (others.empty()) {
    throw ConfigError("corpus holds a single machine; pseudo-anomalies need "
                      "at least one other machine");
  }
  std::vector<int> sections;
  for (auto& [section, cls] : section_class) {
    cls = static_cast<int>(sections.size());
    sections.push_back(section);
  }

  DiscTrainResult result;
  result.model = init_disc(target_machine, sections, data.features, config);
  const AdamOptions adam{.learning_rate = config.learning_rate,
                         .weight_decay = config.weight_decay};
  auto opt_trunk = OptimizerState::for_model(result.model.trunk, adam);
  auto opt_mac = OptimizerState::for_model(result.model.head_mac, adam);
  auto opt_id = OptimizerState::for_model(result.model.head_id, adam);

  Rng rng(derive_seed(config.seed, "disc-sampler"));
  const std::size_t half = static_cast<std::size_t>(config.batch_size) / 2;
  std::size_t other_pos = others.size();
  const Eigen::Index dim = data.features.cols();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(target);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < target.size(); begin += half) {
      const std::size_t n_t = std::min(half, target.size() - begin);
      // 1:1 ratio of target-machine and pseudo-anomalous segments.
      const std::size_t rows = 2 * n_t;
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(rows), dim);
      Eigen::VectorXd t_mac(static_cast<Eigen::Index>(rows));
      std::vector<int> id_class(rows, -1);
      for (std::size_t r = 0; r < n_t; ++r) {
        const std::size_t i = target[begin + r];
        batch.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(i));
        t_mac[static_cast<Eigen::Index>(r)] = 1.0;
        id_class[r] = section_class.at(data.section[i]);
      }
      for (std::size_t r = n_t; r < rows; ++r) {
        if (other_pos >= others.size()) {
          rng.shuffle(others);
          other_pos = 0;
        }
        const std::size_t i = others[other_pos++];
        batch.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(i));
        t_mac[static_cast<Eigen::Index>(r)] = 0.0;
      }
      SerialOeLoss loss =
          serialoe_loss(result.model, batch, t_mac, id_class, config.lambda_id);
      optimizer_step(result.model.trunk, loss.trunk, opt_trunk);
      optimizer_step(result.model.head_mac, loss.head_mac, opt_mac);
      optimizer_step(result.model.head_id, loss.head_id, opt_id);
      loss_sum += loss.total;
      ++batches;
    }
    result.epoch_losses.push_back(loss_sum / batches);
  }
  return result;
}

DiscModel train_disc(const std::string& target_machine,
                     const std::vector<AudioClip>& train_clips,
                     const MelConfig& mel, const DiscConfig& config) {
  if (train_clips.empty()) throw ConfigError("discriminative training set is empty");
  const LogMelExtractor extractor(mel, train_clips.front().sample_rate);
  DiscTrainingSet data;
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::Index rows = 0;
  for (const auto& clip : train_clips) {
    blocks.push_back(pooled_segments(standardize(clip), extractor));
    rows += blocks.back().rows();
    for (Eigen::Index r = 0; r < blocks.back().rows(); ++r) {
      data.machine.push_back(clip.meta.machine);
      data.section.push_back(clip.meta.section);
    }
  }
  data.features.resize(rows, 2 * mel.n_mels);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    data.features.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return train_disc_on_features(target_machine, data, config).model;
}

Eigen::MatrixXd embed_rows(const DiscModel& model,
                           const Eigen::Ref<const Eigen::MatrixXd>& pooled) {
  return forward(model.trunk, pooled);
}

Eigen::VectorXd embed_segments(const DiscModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& pooled) {
  if (pooled.rows() < 1) throw SizeError("clip has no segments");
  return embed_rows(model, pooled).colwise().mean().transpose();
}

Eigen::VectorXd embed(const DiscModel& model, const AudioClip& clip,
                      const MelConfig& mel) {
  const LogMelExtractor extractor(mel, clip.sample_rate);
  return embed_segments(model, pooled_segments(standardize(clip), extractor));
}

Eigen::VectorXd machine_probability(const DiscModel& model,
                                    const Eigen::Ref<const Eigen::MatrixXd>& pooled) {
  return forward(model.head_mac, embed_rows(model, pooled)).col(0);
}

nlohmann::json to_json(const DiscModel& model) {
  return {{"format", "nbsmooth-disc"},
          {"version", 1},
          {"machine", model.machine},
          {"sections", model.sections},
          {"trunk", to_json(model.trunk)},
          {"head_mac", to_json(model.head_mac)},
          {"head_id", to_json(model.head_id)}};
}

DiscModel disc_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "nbsmooth-disc") {
    throw FormatError("not an nbsmooth-disc document");
  }
  DiscModel m;
  m.machine = doc.at("machine").get<std::string>();
  m.sections = doc.at("sections").get<std::vector<int>>();
  m.trunk = mlp_from_json(doc.at("trunk"));
  m.head_mac = mlp_from_json(doc.at("head_mac"));
  m.head_id = mlp_from_json(doc.at("head_id"));
  if (m.head_mac.input_dim() != m.trunk.output_dim() ||
      m.head_id.input_dim() != m.trunk.output_dim() || m.head_mac.output_dim() != 1 ||
      m.head_id.output_dim() != m.n_classes()) {
    throw ShapeError("discriminative model heads do not match the trunk");
  }
  return m;
}

}  // namespace nbs
