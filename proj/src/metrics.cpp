#include "nbsmooth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "nbsmooth/error.hpp"

namespace nbs {
namespace {

struct RocStep {
  std::int64_t negatives = 0;  // normals sharing one score value
  std::int64_t positives = 0;  // anomalies sharing the same value
};

// ROC steps from the highest score down, one per distinct score value.
std::vector<RocStep> roc_steps(std::span<const double> scores,
                               std::span<const bool> labels,
                               std::int64_t& n_pos, std::int64_t& n_neg) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels differ in length: " +
                     std::to_string(scores.size()) + " vs " +
                     std::to_string(labels.size()));
  }
  n_pos = std::count(labels.begin(), labels.end(), true);
  n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricUndefinedError("ROC metrics need both classes (got " +
                               std::to_string(n_pos) + " anomalous, " +
                               std::to_string(n_neg) + " normal)");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw MetricUndefinedError("NaN score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocStep> steps;
  for (std::size_t i = 0; i < order.size();) {
    RocStep step;
    const double v = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == v; ++i) {
      (labels[order[i]] ? step.positives : step.negatives) += 1;
    }
    steps.push_back(step);
  }
  return steps;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const bool> labels) {
  return pauc(scores, labels, 1.0);
}

double pauc(std::span<const double> scores, std::span<const bool> labels, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ConfigError("pAUC range p must lie in (0, 1], got " + std::to_string(p));
  }
  std::int64_t n_pos = 0, n_neg = 0;
  const auto steps = roc_steps(scores, labels, n_pos, n_neg);

  // Trapezoid areas in units of 1/(2 n_pos n_neg) stay integral until the
  // FPR = p cut, which keeps p = 1 exact.
  const double fp_limit = p * static_cast<double>(n_neg);
  std::int64_t twice_area = 0;
  double partial = 0.0;
  std::int64_t fp = 0, tp = 0;
  for (const auto& s : steps) {
    if (p < 1.0 && static_cast<double>(fp + s.negatives) > fp_limit) {
      const double x = fp_limit - static_cast<double>(fp);
      const double tp_cut = static_cast<double>(tp) +
                            static_cast<double>(s.positives) * x /
                                static_cast<double>(s.negatives);
      partial = x * (static_cast<double>(tp) + tp_cut);
      break;
    }
    twice_area += s.negatives * (2 * tp + s.positives);
    fp += s.negatives;
    tp += s.positives;
  }
  const double denom = 2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg);
  const double value = 100.0 * (static_cast<double>(twice_area) + partial) / denom;
  return p < 1.0 ? value / p : value;
}

double hmean(std::span<const double> values, std::vector<std::string>* diagnostics) {
  if (values.empty()) {
    if (diagnostics) diagnostics->push_back("hmean of an empty set taken as 0");
    return 0.0;
  }
  double inv = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) {
      if (diagnostics) {
        diagnostics->push_back("hmean input " + std::to_string(v) +
                               " is not positive; result set to 0");
      }
      return 0.0;
    }
    inv += 1.0 / v;
  }
  return static_cast<double>(values.size()) / inv;
}

}  // namespace nbs
