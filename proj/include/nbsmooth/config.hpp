#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nbsmooth/corpus.hpp"
#include "nbsmooth/disc_embedder.hpp"
#include "nbsmooth/dsp.hpp"
#include "nbsmooth/gen_scorer.hpp"
#include "nbsmooth/gmm.hpp"
#include "nbsmooth/smoother.hpp"

namespace nbs {

struct EvalOptions {
  double p = 0.1;
  std::vector<int> k_grid = {1, 2, 4, 8, 16, 32, 64, 128};
  std::vector<DomainFilter> domain_grid = {DomainFilter::SourceOnly, DomainFilter::All};
  std::vector<double> fractions;  // empty: 0.05 steps up to 1
  int n_trials = 20;

  bool operator==(const EvalOptions&) const = default;
};

struct GmmBaselineConfig {
  int n_components = 2;
  DomainFilter train_domain = DomainFilter::All;
  GmmOptions options;

  bool operator==(const GmmBaselineConfig& o) const {
    return n_components == o.n_components && train_domain == o.train_domain &&
           options.max_iterations == o.options.max_iterations &&
           options.tolerance == o.options.tolerance &&
           options.var_floor == o.options.var_floor;
  }
};

/// Everything a run needs. Module seeds are derived from `seed`; the
/// corpus uses it directly.
struct RunConfig {
  CorpusSpec corpus = default_corpus_spec();
  std::string manifest;  // when set, clips come from this manifest instead
  MelConfig ae_mel = ae_preset();
  MelConfig disc_mel = disc_preset();
  AeConfig ae;
  DiscConfig disc;
  GmmBaselineConfig gmm;
  SmoothConfig smoothing;  // used by `smooth` and as sweep fallback
  EvalOptions evaluation;
  std::string output_dir = "nbsmooth-out";
  std::uint64_t seed = 7;

  bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError naming the offending key.
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys and type mismatches raise
/// ConfigError with the key path (e.g. `ae.epochs`).
RunConfig run_config_from_json(const nlohmann::json& doc);

/// An empty file yields the defaults.
RunConfig load_config(const std::filesystem::path& file);
void save_config(const std::filesystem::path& file, const RunConfig& config);

/// Copies of the module configs carrying seeds derived from config.seed.
AeConfig seeded_ae(const RunConfig& config, const std::string& machine);
DiscConfig seeded_disc(const RunConfig& config, const std::string& machine);
std::uint64_t gmm_seed(const RunConfig& config, const std::string& machine);
std::uint64_t subsample_seed(const RunConfig& config);
CorpusSpec seeded_corpus(const RunConfig& config);

}  // namespace nbs
