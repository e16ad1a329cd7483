#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nbsmooth/corpus.hpp"
#include "nbsmooth/tables.hpp"

namespace nbs {

/// A clip's discriminative feature paired with its generative score.
struct ScoredSample {
  ClipMeta meta;
  Eigen::VectorXd feature;
  double score_gen = 0.0;
};

enum class DomainFilter { SourceOnly, All };
enum class Metric { Euclidean, Cosine };

std::string_view to_string(DomainFilter f);
std::string_view to_string(Metric m);
DomainFilter parse_domain_filter(std::string_view s);
Metric parse_metric(std::string_view s);

struct SmoothConfig {
  int k = 1;
  DomainFilter domain_filter = DomainFilter::All;
  Metric metric = Metric::Euclidean;

  bool operator==(const SmoothConfig&) const = default;
};

/// Distance between two features. Sums run in index order so results are
/// reproducible bit for bit.
double feature_distance(Metric metric, const Eigen::Ref<const Eigen::VectorXd>& a,
                        const Eigen::Ref<const Eigen::VectorXd>& b);

/// Immutable pool of scored samples, ordered by clip_id, answering exact
/// nearest-neighbor queries by exhaustive scan.
class FeaturePool {
 public:
  FeaturePool(std::vector<ScoredSample> samples, DomainFilter filter, Metric metric);

  std::size_t size() const { return samples_.size(); }
  Eigen::Index dim() const { return features_.cols(); }
  DomainFilter domain_filter() const { return filter_; }
  Metric metric() const { return metric_; }
  const ScoredSample& sample(std::size_t i) const { return samples_[i]; }
  const std::vector<ScoredSample>& samples() const { return samples_; }

  std::optional<std::size_t> index_of(std::string_view clip_id) const;

  /// Indices of the k nearest pool samples, nearest first. The query itself
  /// (matched by clip_id) is never returned; equal distances resolve to the
  /// smaller clip_id.
  std::vector<std::size_t> knn(const ScoredSample& query, int k) const;

  /// Largest k accepted by knn() for this query.
  std::size_t max_neighbors(const ScoredSample& query) const;

 private:
  std::vector<ScoredSample> samples_;
  Eigen::MatrixXd features_;  // row per sample, same order as samples_
  DomainFilter filter_;
  Metric metric_;
};

/// Applies the domain filter and sorts by clip_id. Throws ConfigError when
/// nothing survives the filter.
FeaturePool build_pool(std::vector<ScoredSample> samples, const SmoothConfig& config);

/// For every query: (score_gen(query) + sum of the K-1 nearest pool scores)/K.
/// Queries are independent of one another.
std::vector<double> smooth(const FeaturePool& pool,
                           std::span<const ScoredSample> queries, int k);
std::vector<double> smooth(const FeaturePool& pool,
                           std::span<const ScoredSample> queries,
                           const SmoothConfig& config);

/// Joins score rows with embeddings by clip_id and returns the ScoredSamples
/// of the score table (row order). Throws DataIntegrityError listing clip_ids
/// without an embedding.
std::vector<ScoredSample> join_scores(const ScoreTable& scores,
                                      const EmbeddingTable& embeddings,
                                      const std::string& score_column = "score_gen");

/// Smooths every row using a pool of the rows of the same machine and adds a
/// `score_smooth` column. Other columns are kept.
ScoreTable batch_smooth_table(const ScoreTable& scores,
                              const EmbeddingTable& embeddings,
                              const SmoothConfig& config);

/// Per-machine variant: settings[machine] selects (k, filter, metric).
/// Machines without an entry use `fallback`.
struct MachineSmoothing {
  std::string machine;
  SmoothConfig config;
};
std::vector<double> smooth_by_machine(std::span<const ScoredSample> samples,
                                      const std::vector<MachineSmoothing>& settings,
                                      const SmoothConfig& fallback);

}  // namespace nbs
