#include <gtest/gtest.h>

#include <algorithm>

#include "nbsmooth/error.hpp"
#include "nbsmooth/random.hpp"
#include "nbsmooth/smoother.hpp"
#include "oracles.hpp"

namespace {

using nbs::ScoredSample;

ScoredSample sample(const std::string& id, std::vector<double> x, double score,
                    nbs::Domain d = nbs::Domain::Source, const std::string& machine = "m") {
  ScoredSample s;
  s.meta.clip_id = id;
  s.meta.machine = machine;
  s.meta.domain = d;
  s.meta.split = nbs::Split::Test;
  s.feature = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  s.score_gen = score;
  return s;
}

std::vector<ScoredSample> line_pool() {
  return {sample("a", {0.0}, 1), sample("b", {0.1}, 3), sample("c", {1.0}, 10),
          sample("d", {1.1}, 20)};
}

nbs::FeaturePool make_pool(std::vector<ScoredSample> s,
                           nbs::DomainFilter f = nbs::DomainFilter::All) {
  return nbs::build_pool(std::move(s), {1, f, nbs::Metric::Euclidean});
}

TEST(BuildPool, FilterCounts) {
  std::vector<ScoredSample> s;
  for (int i = 0; i < 10; ++i) {
    s.push_back(sample("c" + std::to_string(i), {double(i)}, 0.0,
                       i < 6 ? nbs::Domain::Source : nbs::Domain::Target));
  }
  EXPECT_EQ(make_pool(s).size(), 10u);
  const auto source = make_pool(s, nbs::DomainFilter::SourceOnly);
  EXPECT_EQ(source.size(), 6u);
  for (const auto& x : source.samples()) EXPECT_EQ(x.meta.domain, nbs::Domain::Source);
}

TEST(BuildPool, EmptyAfterFilterIsConfigError) {
  std::vector<ScoredSample> s{sample("t", {0.0}, 1.0, nbs::Domain::Target)};
  EXPECT_THROW(make_pool(s, nbs::DomainFilter::SourceOnly), nbs::ConfigError);
  EXPECT_THROW(make_pool({}), nbs::ConfigError);
}

TEST(BuildPool, SortedByClipId) {
  const auto pool = make_pool({sample("z", {0.0}, 1), sample("a", {1.0}, 2)});
  EXPECT_EQ(pool.sample(0).meta.clip_id, "a");
  EXPECT_EQ(pool.sample(1).meta.clip_id, "z");
}

TEST(Knn, NearestOnLine) {
  const auto pool = make_pool(line_pool());
  const auto nn = pool.knn(line_pool()[0], 1);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(pool.sample(nn[0]).meta.clip_id, "b");
}

TEST(Knn, TieGoesToSmallerClipId) {
  const auto pool = make_pool({sample("q", {0.0}, 0), sample("right", {1.0}, 0),
                               sample("left", {-1.0}, 0)});
  const auto nn = pool.knn(sample("q", {0.0}, 0), 1);
  EXPECT_EQ(pool.sample(nn[0]).meta.clip_id, "left");
}

TEST(Knn, ExhaustiveWhenKIsPoolMinusOne) {
  const auto pool = make_pool(line_pool());
  auto nn = pool.knn(line_pool()[2], 3);
  std::sort(nn.begin(), nn.end());
  ASSERT_EQ(nn.size(), 3u);
  std::vector<std::string> ids;
  for (auto i : nn) ids.push_back(pool.sample(i).meta.clip_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "b", "d"}));
}

TEST(Knn, TooLargeKNamesKAndPoolSize) {
  const auto pool = make_pool(line_pool());
  try {
    pool.knn(line_pool()[0], 4);
    FAIL();
  } catch (const nbs::ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("k=4"), std::string::npos);
    EXPECT_NE(msg.find("pool of 4"), std::string::npos);
  }
  // A non-member query may use every pool sample.
  EXPECT_EQ(pool.knn(sample("zz", {0.5}, 0), 4).size(), 4u);
}

TEST(Knn, DuplicateFeaturesOfDistinctClipsAreNeighbors) {
  const auto pool = make_pool({sample("a", {0.0}, 1), sample("b", {0.0}, 5), sample("c", {3.0}, 9)});
  const auto nn = pool.knn(sample("a", {0.0}, 1), 1);
  EXPECT_EQ(pool.sample(nn[0]).meta.clip_id, "b");
}

TEST(Smooth, KOneIsIdentity) {
  const auto s = line_pool();
  const auto out = nbs::smooth(make_pool(s), s, 1);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(out[i], s[i].score_gen);
}

TEST(Smooth, ConstantScoresStayConstant) {
  std::vector<ScoredSample> s;
  for (int i = 0; i < 7; ++i) s.push_back(sample("c" + std::to_string(i), {double(i * i)}, 4.5));
  const auto pool = make_pool(s);
  for (int k = 1; k <= 7; ++k) {
    for (double v : nbs::smooth(pool, s, k)) EXPECT_DOUBLE_EQ(v, 4.5);
  }
}

TEST(Smooth, LineExampleKTwo) {
  const auto s = line_pool();
  const auto out = nbs::smooth(make_pool(s), s, 2);
  EXPECT_EQ(out, (std::vector<double>{2, 2, 15, 15}));
}

TEST(Smooth, KEqualsPoolGivesGlobalMean) {
  nbs::Rng rng(3);
  std::vector<ScoredSample> s;
  double total = 0.0;
  for (int i = 0; i < 25; ++i) {
    s.push_back(sample("c" + std::to_string(100 + i), {rng.normal(), rng.normal()}, rng.uniform()));
    total += s.back().score_gen;
  }
  for (double v : nbs::smooth(make_pool(s), s, 25)) EXPECT_NEAR(v, total / 25, 1e-12);
}

TEST(Smooth, BoundedByNeighborhoodScores) {
  nbs::Rng rng(11);
  std::vector<ScoredSample> s;
  for (int i = 0; i < 60; ++i) {
    s.push_back(sample("c" + std::to_string(100 + i), {rng.normal(), rng.normal(), rng.normal()},
                       rng.normal()));
  }
  const auto pool = make_pool(s);
  for (int k : {2, 5, 17, 60}) {
    const auto out = nbs::smooth(pool, s, k);
    for (std::size_t q = 0; q < s.size(); ++q) {
      double lo = s[q].score_gen, hi = s[q].score_gen;
      for (auto i : pool.knn(s[q], k - 1)) {
        lo = std::min(lo, pool.sample(i).score_gen);
        hi = std::max(hi, pool.sample(i).score_gen);
      }
      EXPECT_LE(lo, out[q]);
      EXPECT_GE(hi, out[q]);
    }
  }
}

TEST(Smooth, PoolOrderDoesNotMatter) {
  nbs::Rng rng(5);
  std::vector<ScoredSample> s;
  for (int i = 0; i < 40; ++i) {
    // Coarse grid so that distance ties occur.
    s.push_back(sample("c" + std::to_string(100 + i),
                       {double(rng.index(4)), double(rng.index(4))}, rng.uniform()));
  }
  auto shuffled = s;
  rng.shuffle(shuffled);
  for (int k : {1, 3, 9, 40}) {
    EXPECT_EQ(nbs::smooth(make_pool(s), s, k), nbs::smooth(make_pool(shuffled), s, k));
  }
}

TEST(Smooth, TargetQueryAgainstSourcePool) {
  std::vector<ScoredSample> s{sample("a", {0.0}, 1), sample("b", {1.0}, 3),
                              sample("t", {0.2}, 9, nbs::Domain::Target)};
  const nbs::SmoothConfig cfg{2, nbs::DomainFilter::SourceOnly, nbs::Metric::Euclidean};
  const auto pool = nbs::build_pool(s, cfg);
  const auto out = nbs::smooth(pool, s, cfg);
  EXPECT_EQ(out[2], (9.0 + 1.0) / 2.0);
}

TEST(Smooth, MatchesBruteForceOracle) {
  nbs::Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(120));
    const int dim = 1 + static_cast<int>(rng.index(16));
    const bool grid = trial % 3 == 0;
    std::vector<ScoredSample> s;
    std::vector<oracle::Point> pts;
    for (int i = 0; i < n; ++i) {
      std::vector<double> x(static_cast<std::size_t>(dim));
      for (auto& v : x) v = grid ? double(rng.index(3)) : rng.normal();
      const std::string id = "clip" + std::to_string(rng.next_u64() % 100000) + "_" + std::to_string(i);
      const double score = rng.uniform(0, 10);
      s.push_back(sample(id, x, score));
      pts.push_back({id, x, score});
    }
    const int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    const auto out = nbs::smooth(make_pool(s), s, k);
    for (int q = 0; q < n; ++q) ASSERT_EQ(out[q], oracle::smooth(pts, pts[q], k));
  }
}

TEST(Smooth, CosineMetric) {
  std::vector<ScoredSample> s{sample("a", {1.0, 0.0}, 1), sample("b", {10.0, 1.0}, 3),
                              sample("c", {0.0, 1.0}, 7)};
  const nbs::SmoothConfig cfg{2, nbs::DomainFilter::All, nbs::Metric::Cosine};
  const auto out = nbs::smooth(nbs::build_pool(s, cfg), s, cfg);
  EXPECT_EQ(out[0], 2.0);  // b is nearly parallel to a
}

nbs::ScoreTable table_of(const std::vector<ScoredSample>& s) {
  nbs::ScoreTable t;
  std::vector<double> v;
  for (const auto& x : s) {
    t.rows.push_back(x.meta);
    v.push_back(x.score_gen);
  }
  t.set_column("score_gen", v);
  return t;
}

nbs::EmbeddingTable embeddings_of(const std::vector<ScoredSample>& s) {
  nbs::EmbeddingTable e;
  e.values.resize(static_cast<Eigen::Index>(s.size()), s.front().feature.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    e.clip_ids.push_back(s[i].meta.clip_id);
    e.values.row(static_cast<Eigen::Index>(i)) = s[i].feature.transpose();
  }
  e.rebuild_index();
  return e;
}

TEST(BatchSmooth, KOneCopiesScores) {
  const auto s = line_pool();
  const auto out = nbs::batch_smooth_table(table_of(s), embeddings_of(s), {});
  EXPECT_EQ(out.size(), s.size());
  EXPECT_EQ(out.column("score_smooth"), out.column("score_gen"));
}

TEST(BatchSmooth, MissingEmbeddingListsClipIds) {
  const auto s = line_pool();
  const std::vector<ScoredSample> other{sample("x", {0.0}, 0), sample("y", {1.0}, 0)};
  try {
    nbs::batch_smooth_table(table_of(s), embeddings_of(other), {});
    FAIL();
  } catch (const nbs::DataIntegrityError& e) {
    const std::string msg = e.what();
    for (const char* id : {"a", "b", "c", "d"}) EXPECT_NE(msg.find(id), std::string::npos);
  }
}

TEST(BatchSmooth, PoolsArePerMachine) {
  std::vector<ScoredSample> s{sample("a", {0.0}, 1, nbs::Domain::Source, "m1"),
                              sample("b", {0.0}, 5, nbs::Domain::Source, "m2"),
                              sample("c", {9.0}, 3, nbs::Domain::Source, "m1"),
                              sample("d", {4.0}, 7, nbs::Domain::Source, "m2")};
  const auto out = nbs::batch_smooth_table(table_of(s), embeddings_of(s),
                                           {2, nbs::DomainFilter::All, nbs::Metric::Euclidean});
  // a's nearest clip of its own machine is c, not the coincident b.
  EXPECT_EQ(out.column("score_smooth")[0], 2.0);
}

}  // namespace
