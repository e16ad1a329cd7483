#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "json.hpp"

namespace nbs {

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  Eigen::VectorXd weights;    // n_components, sums to 1
  Eigen::MatrixXd means;      // n_components x dim
  Eigen::MatrixXd variances;  // n_components x dim, each >= var_floor

  Eigen::Index n_components() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }
};

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // on the mean per-point log-likelihood
  double var_floor = 1e-6;
};

struct GmmFit {
  GmmModel model;
  /// Total log-likelihood of the data under the initial parameters and after
  /// every EM iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

/// EM from k-means++ seeded means. Points are rows. Throws ConfigError when
/// there are fewer points than components.
GmmFit fit_gmm(const Eigen::Ref<const Eigen::MatrixXd>& points, int n_components,
               std::uint64_t seed, const GmmOptions& options = {});

/// log sum_k w_k N(x; mu_k, diag var_k), via log-sum-exp.
double gmm_log_likelihood(const GmmModel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

/// Negative log-likelihood anomaly score.
double gmm_score(const GmmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

nlohmann::json to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& doc);

}  // namespace nbs
