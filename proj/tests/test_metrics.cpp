#include <gtest/gtest.h>

#include <cmath>

#include "nbsmooth/error.hpp"
#include "nbsmooth/metrics.hpp"
#include "nbsmooth/random.hpp"
#include "oracles.hpp"

namespace {

// std::vector<bool> is not contiguous; metrics take spans of bool.
struct Labels {
  explicit Labels(const std::vector<bool>& v) : data(new bool[v.size()]), n(v.size()) {
    for (std::size_t i = 0; i < n; ++i) data[i] = v[i];
  }
  std::span<const bool> span() const { return {data.get(), n}; }
  std::unique_ptr<bool[]> data;
  std::size_t n;
};

double auc_of(const std::vector<double>& s, const std::vector<bool>& y) {
  return nbs::auc(s, Labels(y).span());
}
double pauc_of(const std::vector<double>& s, const std::vector<bool>& y, double p) {
  return nbs::pauc(s, Labels(y).span(), p);
}

TEST(Auc, PerfectSeparation) {
  EXPECT_EQ(auc_of({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}), 100.0);
}

TEST(Auc, ListedExample) {
  EXPECT_EQ(auc_of({0.1, 0.4, 0.35, 0.8}, {false, false, true, true}), 75.0);
}

TEST(Auc, TiesCountHalf) {
  EXPECT_EQ(auc_of({1.0, 1.0}, {false, true}), 50.0);
}

TEST(Auc, NegationReflects) {
  const std::vector<double> s{0.3, 0.1, 0.5, 0.2, 0.9, 0.5};
  const std::vector<bool> y{true, false, false, true, true, false};
  std::vector<double> neg;
  for (double v : s) neg.push_back(-v);
  EXPECT_DOUBLE_EQ(auc_of(neg, y), 100.0 - auc_of(s, y));
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_THROW(auc_of({1, 2}, {true, true}), nbs::MetricUndefinedError);
  EXPECT_THROW(pauc_of({1, 2}, {false, false}, 0.1), nbs::MetricUndefinedError);
}

std::pair<std::vector<double>, std::vector<bool>> random_instance(nbs::Rng& rng, bool coarse) {
  const std::size_t n = 2 + rng.index(499);
  std::vector<double> s(n);
  std::vector<bool> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.4;
    s[i] = coarse ? double(rng.index(8)) : rng.normal() + (y[i] ? 0.7 : 0.0);
  }
  y[0] = true;
  y[1] = false;
  return {s, y};
}

TEST(Auc, MatchesPairwiseOracleExactly) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    nbs::Rng rng(seed);
    const auto [s, y] = random_instance(rng, seed % 2 == 0);
    EXPECT_EQ(auc_of(s, y), oracle::pairwise_auc(s, y)) << "seed " << seed;
  }
}

TEST(Pauc, FullRangeEqualsAuc) {
  for (std::uint64_t seed = 100; seed < 150; ++seed) {
    nbs::Rng rng(seed);
    const auto [s, y] = random_instance(rng, seed % 2 == 0);
    EXPECT_EQ(pauc_of(s, y, 1.0), auc_of(s, y));
  }
}

TEST(Pauc, PerfectSeparationAnyP) {
  for (double p : {0.01, 0.1, 0.5, 1.0}) {
    EXPECT_EQ(pauc_of({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}, p), 100.0);
  }
}

TEST(Pauc, ListedTableMatchesThresholdOracle) {
  // 20 normals and 20 anomalies with a few cross-class ties.
  const std::vector<double> normal{0.12, 0.35, 0.41, 0.08, 0.55, 0.61, 0.29, 0.47, 0.73, 0.19,
                                   0.33, 0.66, 0.05, 0.52, 0.44, 0.38, 0.81, 0.27, 0.58, 0.15};
  const std::vector<double> anomalous{0.71, 0.62, 0.88, 0.45, 0.93, 0.77, 0.55, 0.84, 0.39, 0.97,
                                      0.68, 0.81, 0.59, 0.91, 0.74, 0.49, 0.86, 0.66, 0.79, 0.95};
  std::vector<double> s = normal;
  s.insert(s.end(), anomalous.begin(), anomalous.end());
  std::vector<bool> y(20, false);
  y.insert(y.end(), 20, true);
  for (double p : {0.1, 0.05, 0.13, 0.5}) {
    const double expected = oracle::threshold_pauc(s, y, p);
    EXPECT_NEAR(pauc_of(s, y, p), expected, 1e-9 * expected) << "p=" << p;
  }
}

TEST(Pauc, RandomInstancesMatchThresholdOracle) {
  for (std::uint64_t seed = 200; seed < 230; ++seed) {
    nbs::Rng rng(seed);
    const auto [s, y] = random_instance(rng, seed % 3 == 0);
    for (double p : {0.1, 0.37}) {
      const double expected = oracle::threshold_pauc(s, y, p);
      EXPECT_NEAR(pauc_of(s, y, p), expected, 1e-9 * std::max(1.0, expected));
    }
  }
}

TEST(Auc, InvariantUnderIncreasingTransform) {
  nbs::Rng rng(77);
  const auto [s, y] = random_instance(rng, false);
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3.0 * v) + 2.0);
  EXPECT_EQ(auc_of(s, y), auc_of(t, y));
  EXPECT_EQ(pauc_of(s, y, 0.1), pauc_of(t, y, 0.1));
}

TEST(Hmean, Constant) {
  const std::vector<double> v(5, 42.0);
  EXPECT_DOUBLE_EQ(nbs::hmean(v), 42.0);
}

TEST(Hmean, TwoValues) {
  const std::vector<double> v{80.0, 20.0};
  EXPECT_DOUBLE_EQ(nbs::hmean(v), 32.0);
}

TEST(Hmean, BelowArithmeticMean) {
  const std::vector<double> v{10.0, 55.0, 90.0};
  EXPECT_LT(nbs::hmean(v), (10.0 + 55.0 + 90.0) / 3.0);
}

TEST(Hmean, NonPositiveGivesZeroWithDiagnostic) {
  const std::vector<double> v{50.0, 0.0};
  std::vector<std::string> notes;
  EXPECT_EQ(nbs::hmean(v, &notes), 0.0);
  EXPECT_EQ(notes.size(), 1u);
}

}  // namespace
