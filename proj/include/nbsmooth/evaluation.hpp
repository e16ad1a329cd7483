#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nbsmooth/corpus.hpp"
#include "nbsmooth/smoother.hpp"
#include "nbsmooth/tables.hpp"

namespace nbs {

struct CellMetrics {
  std::string machine;
  int section = 0;
  Domain domain = Domain::Source;
  int n_normal = 0;
  int n_anomalous = 0;
  bool defined = false;  // both classes present
  double auc = 0.0;
  double pauc = 0.0;
};

struct MachineSummary {
  std::string machine;
  double hmean = 0.0;  // over AUC and pAUC of every defined cell
};

struct EvalReport {
  std::string score_column;
  std::optional<EvalSplit> split;  // nullopt: all sections
  double p = 0.1;
  std::vector<CellMetrics> cells;  // sorted by (machine, section, domain)
  std::vector<MachineSummary> machines;
  double all_hmean = 0.0;
  int undefined_cells = 0;
  std::vector<std::string> diagnostics;

  /// Throws ConfigError for an unknown machine.
  double machine_hmean(const std::string& machine) const;
  const CellMetrics* cell(const std::string& machine, int section, Domain domain) const;
};

/// Cells holding a single class are reported as undefined and left out of
/// the harmonic means. Throws MetricUndefinedError when no cell is defined.
EvalReport evaluate(std::span<const ClipMeta> rows, std::span<const double> scores,
                    const std::string& score_column,
                    std::optional<EvalSplit> split = std::nullopt, double p = 0.1);
EvalReport evaluate(const ScoreTable& table, const std::string& score_column,
                    std::optional<EvalSplit> split = std::nullopt, double p = 0.1);

/// Cell table: machine,section,domain,split,n_normal,n_anomalous,auc,pauc.
void write_report_csv(const std::filesystem::path& file, const EvalReport& report);
/// machine,hmean with a closing All row.
void write_summary_csv(const std::filesystem::path& file, const EvalReport& report);

struct NamedReport {
  std::string method;
  const EvalReport* report;
};
/// Fixed-width text table: one row per machine, one column per method, and a
/// final All-hmean row.
std::string format_summary(const std::vector<NamedReport>& reports);

struct SweepPoint {
  std::string machine;
  int k = 1;
  DomainFilter domain_filter = DomainFilter::All;
  bool feasible = true;  // false when K exceeds the pool
  double validation_hmean = 0.0;
  double evaluation_hmean = 0.0;
};

struct SweepChoice {
  std::string machine;
  SmoothConfig chosen;
  SmoothConfig oracle;
  double chosen_validation = 0.0;
  double chosen_evaluation = 0.0;
  double oracle_evaluation = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> grid;
  std::vector<SweepChoice> machines;

  std::vector<MachineSmoothing> chosen_settings() const;
  std::vector<MachineSmoothing> oracle_settings() const;
};

/// Per machine, smooths the test samples for every (K, filter) grid point
/// with a pool drawn from all of that machine's test sections and scores
/// the validation and evaluation sections separately. Chosen = best
/// validation hmean (ties: smaller K, then source-only); oracle = best
/// evaluation hmean under the same tie rule.
SweepResult sweep(std::span<const ScoredSample> samples, const std::vector<int>& k_grid,
                  const std::vector<DomainFilter>& domain_grid,
                  Metric metric = Metric::Euclidean, double p = 0.1);

/// machine,k,domain,feasible,validation_hmean,evaluation_hmean
void write_sweep_csv(const std::filesystem::path& file, const SweepResult& result);
/// machine,chosen_k,chosen_domain,oracle_k,oracle_domain,... per machine.
void write_choice_csv(const std::filesystem::path& file, const SweepResult& result);
/// Chosen (or, with `oracle`, oracle) settings from a choice CSV.
std::vector<MachineSmoothing> read_choice_csv(const std::filesystem::path& file,
                                              Metric metric = Metric::Euclidean,
                                              bool oracle = false);

struct SubsampleOptions {
  std::vector<double> fractions;  // empty: 0.05, 0.10, ..., 1.00
  int n_trials = 20;
  std::uint64_t seed = 0;
  EvalSplit split = EvalSplit::Evaluation;
  double p = 0.1;
};

std::vector<double> default_fractions();

struct SubsampleRow {
  double fraction = 0.0;
  std::string machine;  // or "All"
  double mean = 0.0;
  double std = 0.0;  // population std across trials
  std::vector<double> trials;
};

/// Shrinks each machine's pool to a stratified fraction of its test samples
/// (every (section, domain, label) cell keeps round(f*n) samples), smooths
/// the full test set against it and reports per-machine and All hmean over
/// trials. K is clamped to the shrunken pool size.
std::vector<SubsampleRow> subsample_experiment(std::span<const ScoredSample> samples,
                                               const std::vector<MachineSmoothing>& settings,
                                               const SmoothConfig& fallback,
                                               const SubsampleOptions& options);

/// fraction,machine,mean,std
void write_subsample_csv(const std::filesystem::path& file,
                         const std::vector<SubsampleRow>& rows);

}  // namespace nbs
