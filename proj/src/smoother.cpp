#include "nbsmooth/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "nbsmooth/error.hpp"
#include "nbsmooth/parallel.hpp"

namespace nbs {

std::string_view to_string(DomainFilter f) {
  return f == DomainFilter::SourceOnly ? "source" : "all";
}

std::string_view to_string(Metric m) {
  return m == Metric::Euclidean ? "euclidean" : "cosine";
}

DomainFilter parse_domain_filter(std::string_view s) {
  if (s == "source" || s == "source-only") return DomainFilter::SourceOnly;
  if (s == "all") return DomainFilter::All;
  throw ConfigError("unknown domain filter '" + std::string(s) +
                    "' (expected source or all)");
}

Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::Euclidean;
  if (s == "cosine") return Metric::Cosine;
  throw ConfigError("unknown metric '" + std::string(s) +
                    "' (expected euclidean or cosine)");
}

double feature_distance(Metric metric, const Eigen::Ref<const Eigen::VectorXd>& a,
                        const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("feature dimensions differ: " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
  if (metric == Metric::Euclidean) {
    // Squared distance: same ordering as the Euclidean distance.
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

FeaturePool::FeaturePool(std::vector<ScoredSample> samples, DomainFilter filter,
                         Metric metric)
    : filter_(filter), metric_(metric) {
  if (filter == DomainFilter::SourceOnly) {
    std::erase_if(samples, [](const ScoredSample& s) {
      return s.meta.domain != Domain::Source;
    });
  }
  if (samples.empty()) {
    throw ConfigError(std::string("feature pool is empty after the '") +
                      std::string(to_string(filter)) + "' domain filter");
  }
  std::sort(samples.begin(), samples.end(),
            [](const ScoredSample& a, const ScoredSample& b) {
              return a.meta.clip_id < b.meta.clip_id;
            });
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].meta.clip_id == samples[i - 1].meta.clip_id) {
      throw DataIntegrityError("duplicate clip_id '" + samples[i].meta.clip_id +
                               "' in feature pool");
    }
  }
  const Eigen::Index dim = samples.front().feature.size();
  features_.resize(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.feature.size() != dim) {
      throw ShapeError("pool features disagree in dimension at '" +
                       s.meta.clip_id + "'");
    }
    if (!s.feature.allFinite() || !std::isfinite(s.score_gen)) {
      throw DataIntegrityError("non-finite feature or score for '" +
                               s.meta.clip_id + "'");
    }
    features_.row(static_cast<Eigen::Index>(i)) = s.feature.transpose();
  }
  samples_ = std::move(samples);
}

std::optional<std::size_t> FeaturePool::index_of(std::string_view clip_id) const {
  const auto it = std::lower_bound(
      samples_.begin(), samples_.end(), clip_id,
      [](const ScoredSample& s, std::string_view id) { return s.meta.clip_id < id; });
  if (it == samples_.end() || it->meta.clip_id != clip_id) return std::nullopt;
  return static_cast<std::size_t>(it - samples_.begin());
}

std::size_t FeaturePool::max_neighbors(const ScoredSample& query) const {
  return size() - (index_of(query.meta.clip_id) ? 1 : 0);
}

std::vector<std::size_t> FeaturePool::knn(const ScoredSample& query, int k) const {
  if (query.feature.size() != dim()) {
    throw ShapeError("query '" + query.meta.clip_id + "' has dimension " +
                     std::to_string(query.feature.size()) + ", pool has " +
                     std::to_string(dim()));
  }
  const std::size_t limit = max_neighbors(query);
  if (k < 0 || static_cast<std::size_t>(k) > limit) {
    throw ConfigError("k=" + std::to_string(k) + " neighbors requested but pool of " +
                      std::to_string(size()) + " samples offers " +
                      std::to_string(limit) + " for query '" +
                      query.meta.clip_id + "'");
  }
  if (k == 0) return {};
  const auto self = index_of(query.meta.clip_id);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (self && *self == i) continue;
    cand.emplace_back(
        feature_distance(metric_, features_.row(static_cast<Eigen::Index>(i)).transpose(),
                         query.feature),
        i);
  }
  // Pool order is clip_id order, so (distance, index) breaks ties by clip_id.
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
  std::vector<std::size_t> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = cand[static_cast<std::size_t>(j)].second;
  return out;
}

FeaturePool build_pool(std::vector<ScoredSample> samples, const SmoothConfig& config) {
  return FeaturePool(std::move(samples), config.domain_filter, config.metric);
}

std::vector<double> smooth(const FeaturePool& pool,
                           std::span<const ScoredSample> queries, int k) {
  if (k < 1) throw ConfigError("smoothing needs K >= 1, got " + std::to_string(k));
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t q) {
    const auto& query = queries[q];
    double sum = query.score_gen;
    for (std::size_t i : pool.knn(query, k - 1)) sum += pool.sample(i).score_gen;
    out[q] = sum / static_cast<double>(k);
  });
  return out;
}

std::vector<double> smooth(const FeaturePool& pool,
                           std::span<const ScoredSample> queries,
                           const SmoothConfig& config) {
  if (pool.domain_filter() != config.domain_filter || pool.metric() != config.metric) {
    throw ConfigError("pool was built with a different domain filter or metric");
  }
  return smooth(pool, queries, config.k);
}

std::vector<ScoredSample> join_scores(const ScoreTable& scores,
                                      const EmbeddingTable& embeddings,
                                      const std::string& score_column) {
  const auto& col = scores.column(score_column);
  std::vector<ScoredSample> out;
  out.reserve(scores.size());
  std::vector<std::string> missing;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    const Eigen::Index e = embeddings.find(scores.rows[r].clip_id);
    if (e < 0) {
      missing.push_back(scores.rows[r].clip_id);
      continue;
    }
    out.push_back({scores.rows[r], embeddings.values.row(e).transpose(), col[r]});
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) +
                      " score rows have no embedding: ";
    const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
      msg += (i ? "," : "") + missing[i];
    }
    if (shown < missing.size()) msg += ",...";
    throw DataIntegrityError(msg);
  }
  return out;
}

std::vector<double> smooth_by_machine(std::span<const ScoredSample> samples,
                                      const std::vector<MachineSmoothing>& settings,
                                      const SmoothConfig& fallback) {
  std::map<std::string, std::vector<std::size_t>> by_machine;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_machine[samples[i].meta.machine].push_back(i);
  }
  std::vector<double> out(samples.size());
  for (const auto& [machine, idx] : by_machine) {
    SmoothConfig cfg = fallback;
    for (const auto& s : settings) {
      if (s.machine == machine) cfg = s.config;
    }
    std::vector<ScoredSample> group;
    group.reserve(idx.size());
    for (std::size_t i : idx) group.push_back(samples[i]);
    const FeaturePool pool = build_pool(group, cfg);
    const auto smoothed = smooth(pool, group, cfg);
    for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] = smoothed[j];
  }
  return out;
}

ScoreTable batch_smooth_table(const ScoreTable& scores,
                              const EmbeddingTable& embeddings,
                              const SmoothConfig& config) {
  const auto samples = join_scores(scores, embeddings);
  ScoreTable out = scores;
  out.set_column("score_smooth", smooth_by_machine(samples, {}, config));
  return out;
}

}  // namespace nbs
