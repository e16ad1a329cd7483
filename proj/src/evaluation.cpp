#include "nbsmooth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <tuple>

#include "nbsmooth/csv.hpp"
#include "nbsmooth/error.hpp"
#include "nbsmooth/metrics.hpp"
#include "nbsmooth/parallel.hpp"
#include "nbsmooth/random.hpp"

namespace nbs {

double EvalReport::machine_hmean(const std::string& machine) const {
  for (const auto& m : machines) {
    if (m.machine == machine) return m.hmean;
  }
  throw ConfigError("report has no machine '" + machine + "'");
}

const CellMetrics* EvalReport::cell(const std::string& machine, int section,
                                    Domain domain) const {
  for (const auto& c : cells) {
    if (c.machine == machine && c.section == section && c.domain == domain) return &c;
  }
  return nullptr;
}

EvalReport evaluate(std::span<const ClipMeta> rows, std::span<const double> scores,
                    const std::string& score_column, std::optional<EvalSplit> split,
                    double p) {
  if (rows.size() != scores.size()) {
    throw ShapeError("evaluate: " + std::to_string(rows.size()) + " rows but " +
                     std::to_string(scores.size()) + " scores");
  }
  using Key = std::tuple<std::string, int, Domain>;
  std::map<Key, std::pair<std::vector<double>, std::vector<bool>>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& m = rows[i];
    if (split && eval_split_of(m.section) != *split) continue;
    auto& g = groups[{m.machine, m.section, m.domain}];
    g.first.push_back(scores[i]);
    g.second.push_back(m.label == Label::Anomalous);
  }

  EvalReport report;
  report.score_column = score_column;
  report.split = split;
  report.p = p;
  std::map<std::string, std::vector<double>> per_machine;
  std::vector<double> all;
  for (const auto& [key, g] : groups) {
    CellMetrics c;
    std::tie(c.machine, c.section, c.domain) = key;
    // std::vector<bool> has no contiguous storage; copy into a plain array.
    const std::unique_ptr<bool[]> labels(new bool[g.second.size()]);
    for (std::size_t i = 0; i < g.second.size(); ++i) labels[i] = g.second[i];
    const std::span<const bool> lab(labels.get(), g.second.size());
    c.n_anomalous = static_cast<int>(std::count(lab.begin(), lab.end(), true));
    c.n_normal = static_cast<int>(lab.size()) - c.n_anomalous;
    c.defined = c.n_anomalous > 0 && c.n_normal > 0;
    if (c.defined) {
      c.auc = auc(g.first, lab);
      c.pauc = pauc(g.first, lab, p);
      per_machine[c.machine].push_back(c.auc);
      per_machine[c.machine].push_back(c.pauc);
      all.push_back(c.auc);
      all.push_back(c.pauc);
    } else {
      ++report.undefined_cells;
      report.diagnostics.push_back("cell " + c.machine + "/section " +
                                   std::to_string(c.section) + "/" +
                                   std::string(to_string(c.domain)) +
                                   " holds a single class; skipped");
    }
    report.cells.push_back(std::move(c));
  }
  if (all.empty()) {
    throw MetricUndefinedError("no (machine, section, domain) cell holds both classes");
  }
  for (const auto& [machine, values] : per_machine) {
    report.machines.push_back({machine, hmean(values, &report.diagnostics)});
  }
  report.all_hmean = hmean(all, &report.diagnostics);
  return report;
}

EvalReport evaluate(const ScoreTable& table, const std::string& score_column,
                    std::optional<EvalSplit> split, double p) {
  return evaluate(table.rows, table.column(score_column), score_column, split, p);
}

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  return out;
}


}  // namespace

void write_report_csv(const std::filesystem::path& file, const EvalReport& report) {
  auto out = open_out(file);
  out << "machine,section,domain,split,n_normal,n_anomalous,auc,pauc\n";
  for (const auto& c : report.cells) {
    out << csv::checked_field(c.machine) << ',' << c.section << ','
        << to_string(c.domain) << ',' << to_string(eval_split_of(c.section)) << ','
        << c.n_normal << ',' << c.n_anomalous << ','
        << (c.defined ? csv::format_number(c.auc) : "") << ','
        << (c.defined ? csv::format_number(c.pauc) : "") << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& file, const EvalReport& report) {
  auto out = open_out(file);
  out << "machine,hmean\n";
  for (const auto& m : report.machines) {
    out << csv::checked_field(m.machine) << ',' << csv::format_number(m.hmean) << '\n';
  }
  out << "All," << csv::format_number(report.all_hmean) << '\n';
}

std::string format_summary(const std::vector<NamedReport>& reports) {
  std::vector<std::string> machines;
  for (const auto& r : reports) {
    for (const auto& m : r.report->machines) {
      if (std::find(machines.begin(), machines.end(), m.machine) == machines.end()) {
        machines.push_back(m.machine);
      }
    }
  }
  std::size_t first = 10;
  for (const auto& m : machines) first = std::max(first, m.size() + 2);
  std::string out;
  char buf[64];
  out += std::string(first, ' ');
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%14s", r.method.c_str());
    out += buf;
  }
  out += '\n';
  auto row = [&](const std::string& name, auto value_of) {
    out += name + std::string(first - name.size(), ' ');
    for (const auto& r : reports) {
      const auto v = value_of(*r.report);
      if (v) {
        std::snprintf(buf, sizeof buf, "%14.2f", *v);
      } else {
        std::snprintf(buf, sizeof buf, "%14s", "-");
      }
      out += buf;
    }
    out += '\n';
  };
  for (const auto& m : machines) {
    row(m, [&](const EvalReport& r) -> std::optional<double> {
      for (const auto& s : r.machines) {
        if (s.machine == m) return s.hmean;
      }
      return std::nullopt;
    });
  }
  row("All-hmean", [](const EvalReport& r) -> std::optional<double> { return r.all_hmean; });
  return out;
}

std::vector<MachineSmoothing> SweepResult::chosen_settings() const {
  std::vector<MachineSmoothing> out;
  for (const auto& m : machines) out.push_back({m.machine, m.chosen});
  return out;
}

std::vector<MachineSmoothing> SweepResult::oracle_settings() const {
  std::vector<MachineSmoothing> out;
  for (const auto& m : machines) out.push_back({m.machine, m.oracle});
  return out;
}

namespace {

std::map<std::string, std::vector<std::size_t>> group_by_machine(
    std::span<const ScoredSample> samples) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[samples[i].meta.machine].push_back(i);
  }
  return out;
}

// Higher value wins; equal values prefer smaller K, then source-only.
bool better(double value, const SweepPoint& p, double best_value, const SweepPoint& best) {
  if (value != best_value) return value > best_value;
  if (p.k != best.k) return p.k < best.k;
  return p.domain_filter == DomainFilter::SourceOnly &&
         best.domain_filter != DomainFilter::SourceOnly;
}

std::size_t pool_size(const std::vector<ScoredSample>& group, DomainFilter filter) {
  if (filter == DomainFilter::All) return group.size();
  return static_cast<std::size_t>(std::count_if(
      group.begin(), group.end(),
      [](const ScoredSample& s) { return s.meta.domain == Domain::Source; }));
}

}  // namespace

SweepResult sweep(std::span<const ScoredSample> samples, const std::vector<int>& k_grid,
                  const std::vector<DomainFilter>& domain_grid, Metric metric,
                  double p) {
  if (k_grid.empty() || domain_grid.empty()) {
    throw ConfigError("sweep grid is empty");
  }
  for (int k : k_grid) {
    if (k < 1) throw ConfigError("sweep K values must be >= 1, got " + std::to_string(k));
  }
  const bool has_validation = std::any_of(samples.begin(), samples.end(), [](const auto& s) {
    return eval_split_of(s.meta.section) == EvalSplit::Validation;
  });
  if (!has_validation) throw ConfigError("sweep needs validation sections 0-2");

  SweepResult result;
  for (const auto& [machine, idx] : group_by_machine(samples)) {
    std::vector<ScoredSample> group;
    for (std::size_t i : idx) group.push_back(samples[i]);
    std::vector<ClipMeta> metas;
    for (const auto& s : group) metas.push_back(s.meta);

    std::vector<SweepPoint> points;
    for (DomainFilter f : domain_grid) {
      for (int k : k_grid) points.push_back({machine, k, f, true, 0.0, 0.0});
    }
    parallel_for(points.size(), [&](std::size_t i) {
      auto& pt = points[i];
      if (pool_size(group, pt.domain_filter) < static_cast<std::size_t>(pt.k)) {
        pt.feasible = false;
        return;
      }
      const SmoothConfig cfg{pt.k, pt.domain_filter, metric};
      const auto pool = build_pool(group, cfg);
      const auto scores = smooth(pool, group, cfg);
      pt.validation_hmean =
          evaluate(metas, scores, "score_smooth", EvalSplit::Validation, p).all_hmean;
      const bool has_eval = std::any_of(metas.begin(), metas.end(), [](const auto& m) {
        return eval_split_of(m.section) == EvalSplit::Evaluation;
      });
      pt.evaluation_hmean =
          has_eval ? evaluate(metas, scores, "score_smooth", EvalSplit::Evaluation, p).all_hmean
                   : 0.0;
    });

    const SweepPoint* chosen = nullptr;
    const SweepPoint* oracle = nullptr;
    for (const auto& pt : points) {
      if (!pt.feasible) continue;
      if (!chosen || better(pt.validation_hmean, pt, chosen->validation_hmean, *chosen)) {
        chosen = &pt;
      }
      if (!oracle || better(pt.evaluation_hmean, pt, oracle->evaluation_hmean, *oracle)) {
        oracle = &pt;
      }
    }
    if (!chosen) {
      throw ConfigError("no sweep point fits the pool of machine '" + machine + "'");
    }
    SweepChoice choice;
    choice.machine = machine;
    choice.chosen = {chosen->k, chosen->domain_filter, metric};
    choice.oracle = {oracle->k, oracle->domain_filter, metric};
    choice.chosen_validation = chosen->validation_hmean;
    choice.chosen_evaluation = chosen->evaluation_hmean;
    choice.oracle_evaluation = oracle->evaluation_hmean;
    result.machines.push_back(choice);
    result.grid.insert(result.grid.end(), points.begin(), points.end());
  }
  return result;
}

void write_sweep_csv(const std::filesystem::path& file, const SweepResult& result) {
  auto out = open_out(file);
  out << "machine,k,domain,feasible,validation_hmean,evaluation_hmean\n";
  for (const auto& p : result.grid) {
    out << csv::checked_field(p.machine) << ',' << p.k << ',' << to_string(p.domain_filter)
        << ',' << (p.feasible ? 1 : 0) << ','
        << (p.feasible ? csv::format_number(p.validation_hmean) : "") << ','
        << (p.feasible ? csv::format_number(p.evaluation_hmean) : "") << '\n';
  }
}

void write_choice_csv(const std::filesystem::path& file, const SweepResult& result) {
  auto out = open_out(file);
  out << "machine,chosen_k,chosen_domain,oracle_k,oracle_domain,chosen_validation,"
         "chosen_evaluation,oracle_evaluation\n";
  for (const auto& m : result.machines) {
    out << csv::checked_field(m.machine) << ',' << m.chosen.k << ','
        << to_string(m.chosen.domain_filter) << ',' << m.oracle.k << ','
        << to_string(m.oracle.domain_filter) << ','
        << csv::format_number(m.chosen_validation) << ','
        << csv::format_number(m.chosen_evaluation) << ','
        << csv::format_number(m.oracle_evaluation) << '\n';
  }
}

std::vector<MachineSmoothing> read_choice_csv(const std::filesystem::path& file,
                                              Metric metric, bool oracle) {
  const auto doc = csv::read(file);
  const std::string prefix = oracle ? "oracle_" : "chosen_";
  const auto mi = doc.column("machine");
  const auto ki = doc.column(prefix + "k");
  const auto di = doc.column(prefix + "domain");
  std::vector<MachineSmoothing> out;
  for (const auto& row : doc.rows) {
    MachineSmoothing m;
    m.machine = row[mi];
    try {
      m.config.k = std::stoi(row[ki]);
    } catch (const std::exception&) {
      throw FormatError(file.string() + ": bad K '" + row[ki] + "'");
    }
    m.config.domain_filter = parse_domain_filter(row[di]);
    m.config.metric = metric;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> default_fractions() {
  std::vector<double> f;
  for (int i = 1; i <= 20; ++i) f.push_back(i / 20.0);
  return f;
}

namespace {

struct MachineGroup {
  std::string machine;
  SmoothConfig config;
  std::vector<ScoredSample> samples;
  std::vector<ClipMeta> metas;
  // Sample indices per (section, domain, label) cell.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> cells;
};

std::vector<std::size_t> stratified_subset(const MachineGroup& g, double fraction,
                                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (const auto& [name, members] : g.cells) {
    const auto count =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    if (count == 0) {
      throw ConfigError("fraction " + csv::format_number(fraction) + " leaves cell " +
                        g.machine + "/" + name + " empty (" +
                        std::to_string(members.size()) + " samples)");
    }
    if (count >= members.size()) {
      keep.insert(keep.end(), members.begin(), members.end());
      continue;
    }
    auto shuffled = members;
    rng.shuffle(shuffled);
    keep.insert(keep.end(), shuffled.begin(), shuffled.begin() + static_cast<long>(count));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
    return {v.front(), 0.0};
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace

std::vector<SubsampleRow> subsample_experiment(std::span<const ScoredSample> samples,
                                               const std::vector<MachineSmoothing>& settings,
                                               const SmoothConfig& fallback,
                                               const SubsampleOptions& options) {
  const auto fractions = options.fractions.empty() ? default_fractions() : options.fractions;
  if (options.n_trials < 1) throw ConfigError("subsample needs n_trials >= 1");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw ConfigError("subsample fraction " + csv::format_number(f) +
                        " outside (0, 1]");
    }
  }
  if (samples.empty()) throw ConfigError("subsample experiment has no samples");

  std::vector<MachineGroup> groups;
  for (const auto& [machine, idx] : group_by_machine(samples)) {
    MachineGroup g;
    g.machine = machine;
    g.config = fallback;
    for (const auto& s : settings) {
      if (s.machine == machine) g.config = s.config;
    }
    std::map<std::tuple<int, Domain, Label>, std::vector<std::size_t>> cells;
    for (std::size_t i : idx) {
      const auto& m = samples[i].meta;
      g.samples.push_back(samples[i]);
      g.metas.push_back(m);
      // The pool only ever holds domain-filtered samples.
      if (g.config.domain_filter == DomainFilter::SourceOnly && m.domain != Domain::Source) {
        continue;
      }
      cells[{m.section, m.domain, m.label}].push_back(g.samples.size() - 1);
    }
    for (const auto& [key, members] : cells) {
      const auto& [section, domain, label] = key;
      g.cells.push_back({"section " + std::to_string(section) + "/" +
                             std::string(to_string(domain)) + "/" +
                             std::string(to_string(label)),
                         members});
    }
    groups.push_back(std::move(g));
  }

  const std::size_t n_frac = fractions.size();
  const auto n_trials = static_cast<std::size_t>(options.n_trials);
  const std::size_t n_mach = groups.size();
  // results[(fraction * trials + trial) * (machines + 1) + m], last = All.
  std::vector<double> results(n_frac * n_trials * (n_mach + 1));
  parallel_for(n_frac * n_trials, [&](std::size_t job) {
    const std::size_t fi = job / n_trials;
    const std::size_t trial = job % n_trials;
    std::vector<ClipMeta> metas;
    std::vector<double> scores;
    std::vector<double> all_values;
    for (std::size_t m = 0; m < n_mach; ++m) {
      const auto& g = groups[m];
      const std::uint64_t seed = derive_seed(
          derive_seed(derive_seed(options.seed, std::uint64_t{trial}), g.machine),
          std::uint64_t{fi});
      const auto keep = stratified_subset(g, fractions[fi], seed);
      std::vector<ScoredSample> pool_samples;
      for (std::size_t i : keep) pool_samples.push_back(g.samples[i]);
      const auto pool = build_pool(std::move(pool_samples), g.config);
      SmoothConfig cfg = g.config;
      cfg.k = std::min<int>(cfg.k, static_cast<int>(pool.size()));
      const auto smoothed = smooth(pool, g.samples, cfg);
      const auto report = evaluate(g.metas, smoothed, "score_smooth", options.split, options.p);
      results[job * (n_mach + 1) + m] = report.machines.front().hmean;
      metas.insert(metas.end(), g.metas.begin(), g.metas.end());
      scores.insert(scores.end(), smoothed.begin(), smoothed.end());
    }
    results[job * (n_mach + 1) + n_mach] =
        evaluate(metas, scores, "score_smooth", options.split, options.p).all_hmean;
  });

  std::vector<SubsampleRow> rows;
  for (std::size_t fi = 0; fi < n_frac; ++fi) {
    for (std::size_t m = 0; m <= n_mach; ++m) {
      SubsampleRow row;
      row.fraction = fractions[fi];
      row.machine = m < n_mach ? groups[m].machine : "All";
      for (std::size_t t = 0; t < n_trials; ++t) {
        row.trials.push_back(results[(fi * n_trials + t) * (n_mach + 1) + m]);
      }
      std::tie(row.mean, row.std) = mean_std(row.trials);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_subsample_csv(const std::filesystem::path& file,
                         const std::vector<SubsampleRow>& rows) {
  auto out = open_out(file);
  out << "fraction,machine,mean,std\n";
  for (const auto& r : rows) {
    out << csv::format_number(r.fraction) << ',' << csv::checked_field(r.machine) << ','
        << csv::format_number(r.mean) << ',' << csv::format_number(r.std) << '\n';
  }
}

}  // namespace nbs
