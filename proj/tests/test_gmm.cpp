#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nbsmooth/error.hpp"
#include "nbsmooth/gmm.hpp"
#include "nbsmooth/random.hpp"

namespace {

Eigen::MatrixXd blobs(nbs::Rng& rng, int n, int dim, int centers) {
  Eigen::MatrixXd c(centers, dim);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = 4.0 * rng.normal();
  Eigen::MatrixXd x(n, dim);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(centers)));
    for (int j = 0; j < dim; ++j) x(i, j) = c(k, j) + rng.normal() * (0.5 + 0.3 * j);
  }
  return x;
}

TEST(Gmm, EmLogLikelihoodNeverDecreases) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    nbs::Rng rng(seed);
    const int dim = 1 + static_cast<int>(rng.index(6));
    const int k = 1 + static_cast<int>(rng.index(4));
    const Eigen::MatrixXd x = blobs(rng, 40 + static_cast<int>(rng.index(200)), dim, 1 + static_cast<int>(rng.index(4)));
    const auto fit = nbs::fit_gmm(x, k, seed);
    ASSERT_GE(fit.log_likelihood.size(), 2u);
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-9) << "seed " << seed;
    }
  }
}

TEST(Gmm, SingleComponentIsSampleMeanAndPopulationVariance) {
  nbs::Rng rng(3);
  const Eigen::MatrixXd x = blobs(rng, 100, 3, 1);
  const auto fit = nbs::fit_gmm(x, 1, 1);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
  EXPECT_TRUE(fit.model.means.row(0).isApprox(mean, 1e-10));
  EXPECT_TRUE(fit.model.variances.row(0).isApprox(var, 1e-8));
  EXPECT_NEAR(fit.model.weights[0], 1.0, 1e-12);
}

TEST(Gmm, ScoreIsNegativeLogDensity) {
  nbs::GmmModel m;
  m.weights = Eigen::Vector2d(0.3, 0.7);
  m.means = Eigen::MatrixXd(2, 2);
  m.means << 0.0, 0.0, 3.0, -1.0;
  m.variances = Eigen::MatrixXd(2, 2);
  m.variances << 1.0, 2.0, 0.5, 0.25;
  const Eigen::Vector2d x(1.0, -0.5);
  double density = 0.0;
  for (int k = 0; k < 2; ++k) {
    double p = m.weights[k];
    for (int j = 0; j < 2; ++j) {
      const double v = m.variances(k, j);
      const double d = x[j] - m.means(k, j);
      p *= std::exp(-d * d / (2 * v)) / std::sqrt(2 * std::numbers::pi * v);
    }
    density += p;
  }
  EXPECT_NEAR(nbs::gmm_score(m, x), -std::log(density), 1e-12);
}

TEST(Gmm, FarPointsScoreHigher) {
  nbs::Rng rng(9);
  const Eigen::MatrixXd x = blobs(rng, 200, 2, 2);
  const auto fit = nbs::fit_gmm(x, 2, 5);
  const Eigen::Vector2d far(100.0, -100.0);
  EXPECT_GT(nbs::gmm_score(fit.model, far), nbs::gmm_score(fit.model, x.row(0).transpose()));
}

TEST(Gmm, VarianceFloorHoldsForDuplicatePoints) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 2);
  const auto fit = nbs::fit_gmm(x, 2, 0);
  EXPECT_GE(fit.model.variances.minCoeff(), 1e-6);
  EXPECT_TRUE(std::isfinite(nbs::gmm_score(fit.model, Eigen::Vector2d(1.0, 1.0))));
}

TEST(Gmm, TooFewPointsRejected) {
  EXPECT_THROW(nbs::fit_gmm(Eigen::MatrixXd::Zero(2, 3), 3, 0), nbs::ConfigError);
}

TEST(Gmm, DeterministicInSeedAndJsonRoundTrip) {
  nbs::Rng rng(12);
  const Eigen::MatrixXd x = blobs(rng, 80, 3, 3);
  const auto a = nbs::fit_gmm(x, 3, 42);
  const auto b = nbs::fit_gmm(x, 3, 42);
  EXPECT_EQ(a.model.means, b.model.means);
  const auto back = nbs::gmm_from_json(nbs::to_json(a.model));
  EXPECT_EQ(back.weights, a.model.weights);
  EXPECT_EQ(back.means, a.model.means);
  EXPECT_EQ(back.variances, a.model.variances);
}

TEST(Gmm, RecoversTwoSeparatedBlobs) {
  nbs::Rng rng(21);
  const Eigen::Matrix2d centers{{-5.0, 2.0}, {6.0, -3.0}};
  Eigen::MatrixXd x(400, 2);
  for (int i = 0; i < 400; ++i) {
    x.row(i) = centers.row(i % 2) + Eigen::RowVector2d(0.5 * rng.normal(), 0.5 * rng.normal());
  }
  const auto fit = nbs::fit_gmm(x, 2, 3);
  for (int c = 0; c < 2; ++c) {
    const double d0 = (fit.model.means.row(0) - centers.row(c)).norm();
    const double d1 = (fit.model.means.row(1) - centers.row(c)).norm();
    EXPECT_LT(std::min(d0, d1), 0.1);
  }
}

TEST(Gmm, ScoreAtModeOfUnitGaussian) {
  for (int d : {1, 3, 7}) {
    nbs::GmmModel m;
    m.weights = Eigen::VectorXd::Ones(1);
    m.means = Eigen::MatrixXd::Constant(1, d, 0.7);
    m.variances = Eigen::MatrixXd::Ones(1, d);
    EXPECT_NEAR(nbs::gmm_score(m, Eigen::VectorXd::Constant(d, 0.7)),
                0.5 * d * std::log(2.0 * std::numbers::pi), 1e-12);
  }
}

}  // namespace
