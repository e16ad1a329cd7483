#include "nbsmooth/gen_scorer.hpp"

#include <algorithm>
#include <numeric>

#include "nbsmooth/error.hpp"

namespace nbs {

void validate(const AeConfig& c) {
  if (c.context < 1) throw ConfigError("ae.context must be >= 1");
  if (c.epochs < 0) throw ConfigError("ae.epochs must be >= 0");
  if (c.batch_size < 1) throw ConfigError("ae.batch_size must be >= 1");
  if (c.frames_per_segment < 0) {
    throw ConfigError("ae.frames_per_segment must be >= 0");
  }
  if (!(c.learning_rate > 0.0)) throw ConfigError("ae.learning_rate must be > 0");
  for (int h : c.hidden) {
    if (h < 1) throw ConfigError("ae.hidden widths must be >= 1");
  }
}

std::vector<Eigen::MatrixXd> segment_features(const AudioClip& standardized,
                                              const LogMelExtractor& extractor) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& seg : segment_clip(standardized)) {
    out.push_back(extractor.compute(seg.samples));
  }
  return out;
}

namespace {

void copy_context(const Eigen::MatrixXd& frames, Eigen::Index start,
                  int context, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> dst) {
  const Eigen::Index mels = frames.cols();
  for (int c = 0; c < context; ++c) {
    dst.segment(c * mels, mels) = frames.row(start + c);
  }
}

}  // namespace

AeTrainResult train_ae_on_segments(const std::vector<Eigen::MatrixXd>& segments,
                                   const AeConfig& config) {
  validate(config);
  if (segments.empty()) throw ConfigError("AE training set is empty");
  const Eigen::Index mels = segments.front().cols();
  for (const auto& s : segments) {
    if (s.cols() != mels) throw ShapeError("segments disagree on n_mels");
    if (s.rows() < config.context) {
      throw SizeError("segment has fewer frames than the AE context");
    }
  }
  const int dim = static_cast<int>(mels) * config.context;

  // Per-mel standardization from all training frames.
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(mels);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(mels);
  double count = 0.0;
  for (const auto& s : segments) {
    mean += s.colwise().sum();
    sq += s.array().square().matrix().colwise().sum();
    count += static_cast<double>(s.rows());
  }
  mean /= count;
  Eigen::RowVectorXd stdev =
      (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  stdev = stdev.cwiseMax(1e-3);

  Rng rng(config.seed);
  std::vector<LayerSpec> layers;
  for (int h : config.hidden) layers.push_back({h, Activation::ReLU});
  layers.push_back({dim, Activation::Linear});
  AeTrainResult result;
  result.model = make_mlp(dim, layers, rng);
  result.model.input_shift = mean.replicate(1, config.context);
  result.model.input_scale = stdev.replicate(1, config.context);

  OptimizerState opt = OptimizerState::for_model(
      result.model, AdamOptions{.learning_rate = config.learning_rate});

  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<std::pair<std::size_t, Eigen::Index>> picks;
      for (std::size_t b = begin; b < end; ++b) {
        const auto& seg = segments[order[b]];
        const Eigen::Index available = seg.rows() - config.context + 1;
        std::vector<Eigen::Index> starts(static_cast<std::size_t>(available));
        std::iota(starts.begin(), starts.end(), Eigen::Index{0});
        Eigen::Index take = available;
        if (config.frames_per_segment > 0 && config.frames_per_segment < available) {
          // Partial Fisher-Yates: first `take` entries are a uniform sample.
          take = config.frames_per_segment;
          for (Eigen::Index i = 0; i < take; ++i) {
            const auto j = i + static_cast<Eigen::Index>(
                                   rng.index(static_cast<std::size_t>(available - i)));
            std::swap(starts[static_cast<std::size_t>(i)],
                      starts[static_cast<std::size_t>(j)]);
          }
        }
        for (Eigen::Index i = 0; i < take; ++i) {
          picks.emplace_back(order[b], starts[static_cast<std::size_t>(i)]);
        }
      }
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(picks.size()), dim);
      for (std::size_t r = 0; r < picks.size(); ++r) {
        copy_context(segments[picks[r].first], picks[r].second, config.context,
                     batch.row(static_cast<Eigen::Index>(r)));
      }
      const Eigen::MatrixXd target = result.model.transform_input(batch);
      BackwardResult br = backward(result.model, batch, LossKind::Mse, target);
      optimizer_step(result.model, br.gradients, opt);
      loss_sum += br.loss;
      ++batches;
    }
    result.epoch_losses.push_back(loss_sum / batches);
  }
  return result;
}

AeTrainResult train_ae(const std::vector<AudioClip>& train_clips,
                       const MelConfig& mel, const AeConfig& config) {
  if (train_clips.empty()) throw ConfigError("AE training set is empty");
  const LogMelExtractor extractor(mel, train_clips.front().sample_rate);
  std::vector<Eigen::MatrixXd> segments;
  for (const auto& clip : train_clips) {
    if (clip.meta.label != Label::Normal) {
      throw ConfigError("AE training clip '" + clip.meta.clip_id +
                        "' is not Normal");
    }
    for (auto& s : segment_features(standardize(clip), extractor)) {
      segments.push_back(std::move(s));
    }
  }
  return train_ae_on_segments(segments, config);
}

Eigen::VectorXd score_frames(const MlpModel& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& vectors) {
  if (vectors.cols() != model.input_dim() ||
      model.output_dim() != model.input_dim()) {
    throw ShapeError("frame vector has " + std::to_string(vectors.cols()) +
                     " entries, autoencoder expects " +
                     std::to_string(model.input_dim()));
  }
  const Eigen::MatrixXd z = model.transform_input(vectors);
  const Eigen::MatrixXd recon = forward(model, vectors);
  return (z - recon).rowwise().squaredNorm() / static_cast<double>(vectors.cols());
}

double score_frame(const MlpModel& model,
                   const Eigen::Ref<const Eigen::RowVectorXd>& frame_vector) {
  return score_frames(model, frame_vector)[0];
}

double score_segment(const MlpModel& model,
                     const Eigen::Ref<const Eigen::MatrixXd>& segment_logmel,
                     int context) {
  return score_frames(model, frame_context(segment_logmel, context)).mean();
}

ClipScore score_segments(const MlpModel& model,
                         const std::vector<Eigen::MatrixXd>& segment_logmels,
                         int context) {
  if (segment_logmels.empty()) throw SizeError("clip has no segments");
  ClipScore cs;
  double sum = 0.0;
  for (const auto& s : segment_logmels) {
    cs.segment_scores.push_back(score_segment(model, s, context));
    sum += cs.segment_scores.back();
  }
  cs.score = sum / static_cast<double>(cs.segment_scores.size());
  return cs;
}

ClipScore score_clip(const MlpModel& model, const AudioClip& clip,
                     const MelConfig& mel, const AeConfig& config) {
  const LogMelExtractor extractor(mel, clip.sample_rate);
  return score_segments(model, segment_features(standardize(clip), extractor),
                        config.context);
}

}  // namespace nbs
