#include "nbsmooth/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "nbsmooth/error.hpp"
#include "nbsmooth/random.hpp"

namespace nbs {
namespace {

/// log N(x; mu, diag var) for every component, as a row.
Eigen::VectorXd component_log_densities(const GmmModel& m,
                                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  Eigen::VectorXd out(m.n_components());
  for (Eigen::Index k = 0; k < m.n_components(); ++k) {
    const auto var = m.variances.row(k).array();
    const auto diff = x.transpose().array() - m.means.row(k).array();
    out[k] = -0.5 * (static_cast<double>(m.dim()) * log_2pi + var.log().sum() +
                     (diff.square() / var).sum());
  }
  return out;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double hi = v.maxCoeff();
  if (!std::isfinite(hi)) return hi;
  return hi + std::log((v.array() - hi).exp().sum());
}

}  // namespace

double gmm_log_likelihood(const GmmModel& model,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.dim()) {
    throw ShapeError("GMM expects " + std::to_string(model.dim()) +
                     "-dimensional input, got " + std::to_string(x.size()));
  }
  Eigen::VectorXd terms = component_log_densities(model, x);
  terms.array() += model.weights.array().log();
  return log_sum_exp(terms);
}

double gmm_score(const GmmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return -gmm_log_likelihood(model, x);
}

GmmFit fit_gmm(const Eigen::Ref<const Eigen::MatrixXd>& points, int n_components,
               std::uint64_t seed, const GmmOptions& options) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (n_components < 1) throw ConfigError("n_components must be >= 1");
  if (n < n_components) {
    throw ConfigError("GMM with " + std::to_string(n_components) +
                      " components needs at least that many points, got " +
                      std::to_string(n));
  }
  if (d < 1) throw ShapeError("GMM points must have >= 1 dimension");
  const auto k_count = static_cast<Eigen::Index>(n_components);

  // k-means++ seeding of the means.
  Rng rng(seed);
  GmmModel model;
  model.means.resize(k_count, d);
  model.means.row(0) = points.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  Eigen::VectorXd nearest = (points.rowwise() - model.means.row(0)).rowwise().squaredNorm();
  for (Eigen::Index k = 1; k < k_count; ++k) {
    const double total = nearest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= nearest[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    model.means.row(k) = points.row(pick);
    nearest = nearest.cwiseMin((points.rowwise() - model.means.row(k)).rowwise().squaredNorm());
  }
  const Eigen::RowVectorXd global_mean = points.colwise().mean();
  const Eigen::RowVectorXd global_var =
      ((points.rowwise() - global_mean).array().square().colwise().sum() /
       static_cast<double>(n))
          .matrix()
          .cwiseMax(options.var_floor);
  model.variances = global_var.replicate(k_count, 1);
  model.weights = Eigen::VectorXd::Constant(k_count, 1.0 / static_cast<double>(k_count));

  GmmFit fit;
  Eigen::MatrixXd resp(n, k_count);
  auto e_step = [&]() {
    double total = 0.0;
    const Eigen::VectorXd log_w = model.weights.array().log();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd terms = component_log_densities(model, points.row(i).transpose());
      terms += log_w;
      const double lse = log_sum_exp(terms);
      total += lse;
      resp.row(i) = (terms.array() - lse).exp().transpose();
    }
    return total;
  };

  double ll = e_step();
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < options.max_iterations; ++it) {
    // M-step.
    const Eigen::VectorXd nk = resp.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (nk[k] <= 0.0) continue;  // empty component keeps its parameters
      model.means.row(k) = (resp.col(k).transpose() * points) / nk[k];
      const Eigen::MatrixXd centered = points.rowwise() - model.means.row(k);
      model.variances.row(k) =
          ((resp.col(k).transpose() * centered.array().square().matrix()) / nk[k])
              .cwiseMax(options.var_floor);
    }
    model.weights = nk / nk.sum();
    ++fit.iterations;
    const double next = e_step();
    fit.log_likelihood.push_back(next);
    const double gain = (next - ll) / static_cast<double>(n);
    ll = next;
    if (gain < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.model = std::move(model);
  return fit;
}

nlohmann::json to_json(const GmmModel& model) {
  auto matrix = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::json weights = nlohmann::json::array();
  for (Eigen::Index k = 0; k < model.weights.size(); ++k) weights.push_back(model.weights[k]);
  return {{"format", "nbsmooth-gmm"},
          {"version", 1},
          {"weights", weights},
          {"means", matrix(model.means)},
          {"variances", matrix(model.variances)}};
}

GmmModel gmm_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "nbsmooth-gmm") {
    throw FormatError("not an nbsmooth-gmm document");
  }
  const auto w = doc.at("weights").get<std::vector<double>>();
  const auto mu = doc.at("means").get<std::vector<std::vector<double>>>();
  const auto var = doc.at("variances").get<std::vector<std::vector<double>>>();
  if (w.empty() || mu.size() != w.size() || var.size() != w.size()) {
    throw FormatError("GMM JSON: component counts disagree");
  }
  GmmModel m;
  const auto k = static_cast<Eigen::Index>(w.size());
  const auto d = static_cast<Eigen::Index>(mu.front().size());
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), k);
  m.means.resize(k, d);
  m.variances.resize(k, d);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& mr = mu[static_cast<std::size_t>(i)];
    const auto& vr = var[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(mr.size()) != d || static_cast<Eigen::Index>(vr.size()) != d) {
      throw FormatError("GMM JSON: ragged mean/variance rows");
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      m.means(i, j) = mr[static_cast<std::size_t>(j)];
      m.variances(i, j) = vr[static_cast<std::size_t>(j)];
      if (!(m.variances(i, j) > 0.0)) throw FormatError("GMM JSON: non-positive variance");
    }
  }
  return m;
}

}  // namespace nbs
