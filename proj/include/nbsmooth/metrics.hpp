#pragma once

#include <span>
#include <string>
#include <vector>

namespace nbs {

/// ROC-AUC in percent: chance that an anomalous score exceeds a normal one,
/// ties counting one half. labels: true = anomalous. Throws
/// MetricUndefinedError unless both classes are present.
double auc(std::span<const double> scores, std::span<const bool> labels);

/// Partial AUC over false-positive rates [0, p], divided by p, in percent.
/// The ROC curve is interpolated linearly at FPR = p. pauc(.., 1) == auc.
double pauc(std::span<const double> scores, std::span<const bool> labels,
            double p = 0.1);

/// n / sum(1/v). Returns 0 and appends a note to `diagnostics` when any value
/// is nonpositive or the input is empty.
double hmean(std::span<const double> values,
             std::vector<std::string>* diagnostics = nullptr);

}  // namespace nbs
