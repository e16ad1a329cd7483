#include "nbsmooth/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "nbsmooth/config.hpp"
#include "nbsmooth/csv.hpp"
#include "nbsmooth/error.hpp"
#include "nbsmooth/evaluation.hpp"
#include "nbsmooth/parallel.hpp"
#include "nbsmooth/pipeline.hpp"

#ifndef NBSMOOTH_VERSION
#define NBSMOOTH_VERSION "unknown"
#endif

namespace nbs {

using nlohmann::json;

namespace {

struct SourceOptions {
  std::string config;
  std::string manifest;
  std::optional<std::uint64_t> seed;
};

void add_source_options(CLI::App* sub, SourceOptions& o, bool with_manifest = true) {
  sub->add_option("--config", o.config, "JSON run configuration");
  if (with_manifest) {
    sub->add_option("--manifest", o.manifest,
                    "corpus manifest CSV (default: synthesize from the config)");
  }
  sub->add_option("--seed", o.seed, "global seed (overrides the config)");
}

RunConfig resolve_config(const SourceOptions& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.corpus.seed = *o.seed;
  }
  if (!o.manifest.empty()) c.manifest = o.manifest;
  validate(c);
  return c;
}

/// Flag, then NBSMOOTH_OUTPUT_DIR, then the config value.
std::filesystem::path resolve_out(const std::string& flag, const RunConfig& config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("NBSMOOTH_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

void write_run_json(const std::filesystem::path& dir, const std::string& command,
                    const json& parameters, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  const json doc = {{"tool", "nbsmooth"},
                    {"version", NBSMOOTH_VERSION},
                    {"command", command},
                    {"parameters", parameters},
                    {"seed", config.seed},
                    {"config", to_json(config)}};
  std::ofstream out(dir / "run.json", std::ios::binary);
  if (!out) throw IoError("cannot write '" + (dir / "run.json").string() + "'");
  out << doc.dump(2) << '\n';
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad integer '" + item + "'");
    }
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad number '" + item + "'");
    }
  }
  return out;
}

std::optional<EvalSplit> parse_split_option(const std::string& s) {
  if (s == "validation") return EvalSplit::Validation;
  if (s == "evaluation") return EvalSplit::Evaluation;
  if (s == "all") return std::nullopt;
  throw ConfigError("unknown split '" + s + "' (expected validation, evaluation or all)");
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neighborhood smoothing of autoencoder anomaly scores for machine sounds",
               "nbsmooth"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NBSMOOTH_VERSION);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0: available parallelism)");

  // synth
  SourceOptions synth_src;
  std::string synth_out;
  bool synth_reversal = false;
  auto* synth = app.add_subcommand("synth", "write the synthetic corpus as WAV files and a manifest");
  add_source_options(synth, synth_src, false);
  synth->add_option("--out", synth_out, "output directory");
  synth->add_flag("--reversal", synth_reversal, "enable the reversal discrepancy scenario");

  // train-ae / train-disc
  SourceOptions ae_src, disc_src;
  std::string ae_out, ae_machine, disc_out;
  auto* train_ae_cmd = app.add_subcommand("train-ae", "train one autoencoder per machine");
  add_source_options(train_ae_cmd, ae_src);
  train_ae_cmd->add_option("--out", ae_out, "model directory");
  train_ae_cmd->add_option("--machine", ae_machine, "train this machine only");
  auto* train_disc_cmd =
      app.add_subcommand("train-disc", "train one discriminative embedder per machine");
  add_source_options(train_disc_cmd, disc_src);
  train_disc_cmd->add_option("--out", disc_out, "model directory");

  // score / embed / baseline-gmm
  SourceOptions score_src, embed_src, gmm_src;
  std::string score_models, score_out, embed_models, embed_out, gmm_models, gmm_out;
  auto* score_cmd = app.add_subcommand("score", "autoencoder scores of the test clips");
  add_source_options(score_cmd, score_src);
  score_cmd->add_option("--models", score_models, "directory with ae_<machine>.json")->required();
  score_cmd->add_option("--out", score_out, "output directory (scores.csv)");
  auto* embed_cmd = app.add_subcommand("embed", "discriminative embeddings of the test clips");
  add_source_options(embed_cmd, embed_src);
  embed_cmd->add_option("--models", embed_models, "directory with disc_<machine>.json")->required();
  embed_cmd->add_option("--out", embed_out, "output directory (embeddings.csv)");
  auto* gmm_cmd = app.add_subcommand(
      "baseline-gmm", "fit a GMM on training embeddings and score the test clips");
  add_source_options(gmm_cmd, gmm_src);
  gmm_cmd->add_option("--models", gmm_models, "directory with disc_<machine>.json")->required();
  gmm_cmd->add_option("--out", gmm_out, "output directory (gmm_<machine>.json, scores_gmm.csv)");

  // smooth
  SourceOptions smooth_src;
  std::string smooth_scores, smooth_emb, smooth_out, smooth_choice, smooth_domain, smooth_metric;
  std::optional<int> smooth_k;
  auto* smooth_cmd = app.add_subcommand("smooth", "smooth generative scores over embedding neighbors");
  add_source_options(smooth_cmd, smooth_src, false);
  smooth_cmd->add_option("--scores", smooth_scores, "score table with score_gen")->required();
  smooth_cmd->add_option("--embeddings", smooth_emb, "embedding table")->required();
  smooth_cmd->add_option("--k", smooth_k, "neighborhood size K (query included)");
  smooth_cmd->add_option("--domain", smooth_domain, "pool domains: source or all");
  smooth_cmd->add_option("--metric", smooth_metric, "euclidean or cosine");
  smooth_cmd->add_option("--choice", smooth_choice, "per-machine settings from `sweep`");
  smooth_cmd->add_option("--out", smooth_out, "output directory (smoothed.csv)");

  // eval
  SourceOptions eval_src;
  std::string eval_scores, eval_column = "score_gen", eval_split = "evaluation", eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "AUC, pAUC and harmonic means of a score column");
  add_source_options(eval_cmd, eval_src, false);
  eval_cmd->add_option("--scores", eval_scores, "score table")->required();
  eval_cmd->add_option("--column", eval_column, "score column")->capture_default_str();
  eval_cmd->add_option("--split", eval_split, "validation, evaluation or all")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "output directory (report.csv, summary.csv)");

  // sweep
  SourceOptions sweep_src;
  std::string sweep_scores, sweep_emb, sweep_out, sweep_k, sweep_domains, sweep_metric;
  auto* sweep_cmd = app.add_subcommand("sweep", "select K and pool domains on the validation sections");
  add_source_options(sweep_cmd, sweep_src, false);
  sweep_cmd->add_option("--scores", sweep_scores, "score table with score_gen")->required();
  sweep_cmd->add_option("--embeddings", sweep_emb, "embedding table")->required();
  sweep_cmd->add_option("--k-grid", sweep_k, "comma-separated K values");
  sweep_cmd->add_option("--domains", sweep_domains, "comma-separated: source,all");
  sweep_cmd->add_option("--metric", sweep_metric, "euclidean or cosine");
  sweep_cmd->add_option("--out", sweep_out, "output directory (sweep.csv, choice.csv)");

  // subsample
  SourceOptions sub_src;
  std::string sub_scores, sub_emb, sub_out, sub_choice, sub_domain, sub_fractions;
  std::optional<int> sub_k, sub_trials;
  auto* sub_cmd = app.add_subcommand("subsample", "smoothing with stratified subsets of the pool");
  add_source_options(sub_cmd, sub_src, false);
  sub_cmd->add_option("--scores", sub_scores, "score table with score_gen")->required();
  sub_cmd->add_option("--embeddings", sub_emb, "embedding table")->required();
  sub_cmd->add_option("--choice", sub_choice, "per-machine settings from `sweep`");
  sub_cmd->add_option("--k", sub_k, "K for every machine");
  sub_cmd->add_option("--domain", sub_domain, "pool domains: source or all");
  sub_cmd->add_option("--trials", sub_trials, "trials per fraction");
  sub_cmd->add_option("--fractions", sub_fractions, "comma-separated pool fractions");
  sub_cmd->add_option("--out", sub_out, "output directory (subsample.csv)");

  // demo
  SourceOptions demo_src;
  std::string demo_out;
  bool demo_reversal = false;
  auto* demo_cmd = app.add_subcommand("demo", "full pipeline on the synthetic corpus");
  add_source_options(demo_cmd, demo_src, false);
  demo_cmd->add_option("--out", demo_out, "output directory");
  demo_cmd->add_flag("--reversal", demo_reversal, "enable the reversal discrepancy scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << NBSMOOTH_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error kind=usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    set_thread_count(threads);
    auto smoothing_from = [](RunConfig& c, const std::optional<int>& k, const std::string& domain,
                             const std::string& metric) {
      if (k) c.smoothing.k = *k;
      if (!domain.empty()) c.smoothing.domain_filter = parse_domain_filter(domain);
      if (!metric.empty()) c.smoothing.metric = parse_metric(metric);
      validate(c);
    };

    if (synth->parsed()) {
      RunConfig c = resolve_config(synth_src);
      if (synth_reversal) c.corpus.discrepancy_mode = DiscrepancyMode::Reversal;
      const auto dir = resolve_out(synth_out, c);
      write_corpus(synthetic_source(seeded_corpus(c)), dir);
      write_run_json(dir, "synth", {{"reversal", synth_reversal}}, c);
      out << "wrote " << (dir / "manifest.csv").string() << '\n';
    } else if (train_ae_cmd->parsed()) {
      const RunConfig c = resolve_config(ae_src);
      const auto source = make_source(c);
      const auto dir = resolve_out(ae_out, c);
      std::vector<MachineModels> models;
      for (const auto& machine : source.machines()) {
        if (!ae_machine.empty() && machine != ae_machine) continue;
        err << "training autoencoder for " << machine << '\n';
        models.push_back({machine, train_ae_for(source, machine, c), {}, {}});
      }
      if (models.empty()) throw ConfigError("no machine named '" + ae_machine + "'");
      save_models(dir, models);
      write_run_json(dir, "train-ae", {{"machine", ae_machine}}, c);
    } else if (train_disc_cmd->parsed()) {
      const RunConfig c = resolve_config(disc_src);
      const auto dir = resolve_out(disc_out, c);
      const auto discs = train_disc_models(pool_train_clips(make_source(c), c), c);
      std::filesystem::create_directories(dir);
      for (const auto& d : discs) save_json(dir / ("disc_" + d.machine + ".json"), to_json(d));
      write_run_json(dir, "train-disc", json::object(), c);
    } else if (score_cmd->parsed()) {
      const RunConfig c = resolve_config(score_src);
      auto models = load_models(score_models);
      for (auto& m : models) {
        m.disc.reset();
        m.gmm.reset();
      }
      const auto dir = resolve_out(score_out, c);
      std::filesystem::create_directories(dir);
      write_score_table(dir / "scores.csv", score_test(make_source(c), models, c).scores);
      write_run_json(dir, "score", {{"models", score_models}}, c);
    } else if (embed_cmd->parsed()) {
      const RunConfig c = resolve_config(embed_src);
      const auto models = load_models(embed_models);
      for (const auto& m : models) {
        if (!m.disc) throw IoError("missing disc_" + m.machine + ".json in '" + embed_models + "'");
      }
      const auto dir = resolve_out(embed_out, c);
      std::filesystem::create_directories(dir);
      write_embedding_table(dir / "embeddings.csv",
                            score_test(make_source(c), models, c).embeddings);
      write_run_json(dir, "embed", {{"models", embed_models}}, c);
    } else if (gmm_cmd->parsed()) {
      const RunConfig c = resolve_config(gmm_src);
      auto models = load_models(gmm_models);
      const auto source = make_source(c);
      const auto pooled = pool_train_clips(source, c);
      for (auto& m : models) {
        if (!m.disc) throw IoError("missing disc_" + m.machine + ".json in '" + gmm_models + "'");
        m.gmm = fit_gmm_baseline(*m.disc, pooled, c);
      }
      const auto dir = resolve_out(gmm_out, c);
      std::filesystem::create_directories(dir);
      for (const auto& m : models) save_json(dir / ("gmm_" + m.machine + ".json"), to_json(*m.gmm));
      auto scores = score_test(source, models, c).scores;
      scores.columns.erase(scores.columns.begin());
      scores.values.erase(scores.values.begin());
      write_score_table(dir / "scores_gmm.csv", scores);
      write_run_json(dir, "baseline-gmm", {{"models", gmm_models}}, c);
    } else if (smooth_cmd->parsed()) {
      RunConfig c = resolve_config(smooth_src);
      smoothing_from(c, smooth_k, smooth_domain, smooth_metric);
      const auto scores = read_score_table(smooth_scores);
      const auto emb = read_embedding_table(smooth_emb);
      std::vector<MachineSmoothing> settings;
      if (!smooth_choice.empty()) settings = read_choice_csv(smooth_choice, c.smoothing.metric);
      auto table = scores;
      table.set_column("score_smooth",
                       smooth_by_machine(join_scores(scores, emb), settings, c.smoothing));
      const auto dir = resolve_out(smooth_out, c);
      std::filesystem::create_directories(dir);
      write_score_table(dir / "smoothed.csv", table);
      write_run_json(dir, "smooth",
                     {{"scores", smooth_scores}, {"embeddings", smooth_emb},
                      {"choice", smooth_choice}},
                     c);
    } else if (eval_cmd->parsed()) {
      const RunConfig c = resolve_config(eval_src);
      const auto split = parse_split_option(eval_split);
      const auto report = evaluate(read_score_table(eval_scores), eval_column, split, c.evaluation.p);
      out << format_summary({{eval_column, &report}});
      for (const auto& d : report.diagnostics) err << "warning: " << d << '\n';
      if (!eval_out.empty() || std::getenv("NBSMOOTH_OUTPUT_DIR")) {
        const auto dir = resolve_out(eval_out, c);
        std::filesystem::create_directories(dir);
        write_report_csv(dir / "report.csv", report);
        write_summary_csv(dir / "summary.csv", report);
        write_run_json(dir, "eval",
                       {{"scores", eval_scores}, {"column", eval_column}, {"split", eval_split}}, c);
      }
    } else if (sweep_cmd->parsed()) {
      RunConfig c = resolve_config(sweep_src);
      if (!sweep_k.empty()) c.evaluation.k_grid = parse_int_list(sweep_k, "--k-grid");
      if (!sweep_domains.empty()) {
        c.evaluation.domain_grid.clear();
        for (const auto& d : split_list(sweep_domains)) {
          c.evaluation.domain_grid.push_back(parse_domain_filter(d));
        }
      }
      if (!sweep_metric.empty()) c.smoothing.metric = parse_metric(sweep_metric);
      validate(c);
      const auto samples = join_scores(read_score_table(sweep_scores), read_embedding_table(sweep_emb));
      const auto result = sweep(samples, c.evaluation.k_grid, c.evaluation.domain_grid,
                                c.smoothing.metric, c.evaluation.p);
      const auto dir = resolve_out(sweep_out, c);
      std::filesystem::create_directories(dir);
      write_sweep_csv(dir / "sweep.csv", result);
      write_choice_csv(dir / "choice.csv", result);
      write_run_json(dir, "sweep", {{"scores", sweep_scores}, {"embeddings", sweep_emb}}, c);
      for (const auto& m : result.machines) {
        out << m.machine << ": K=" << m.chosen.k << ' ' << to_string(m.chosen.domain_filter)
            << " validation=" << csv::format_number(m.chosen_validation)
            << " evaluation=" << csv::format_number(m.chosen_evaluation) << '\n';
      }
    } else if (sub_cmd->parsed()) {
      RunConfig c = resolve_config(sub_src);
      smoothing_from(c, sub_k, sub_domain, "");
      if (sub_trials) c.evaluation.n_trials = *sub_trials;
      if (!sub_fractions.empty()) c.evaluation.fractions = parse_double_list(sub_fractions, "--fractions");
      validate(c);
      std::vector<MachineSmoothing> settings;
      if (!sub_choice.empty()) settings = read_choice_csv(sub_choice, c.smoothing.metric);
      const auto samples = join_scores(read_score_table(sub_scores), read_embedding_table(sub_emb));
      SubsampleOptions opt;
      opt.fractions = c.evaluation.fractions;
      opt.n_trials = c.evaluation.n_trials;
      opt.seed = subsample_seed(c);
      opt.p = c.evaluation.p;
      const auto rows = subsample_experiment(samples, settings, c.smoothing, opt);
      const auto dir = resolve_out(sub_out, c);
      std::filesystem::create_directories(dir);
      write_subsample_csv(dir / "subsample.csv", rows);
      write_run_json(dir, "subsample",
                     {{"scores", sub_scores}, {"embeddings", sub_emb}, {"choice", sub_choice}}, c);
    } else if (demo_cmd->parsed()) {
      RunConfig c = resolve_config(demo_src);
      if (demo_reversal) c.corpus.discrepancy_mode = DiscrepancyMode::Reversal;
      const auto dir = resolve_out(demo_out, c);
      const auto source = synthetic_source(seeded_corpus(c));
      err << "training models for " << source.machines().size() << " machines\n";
      const auto models = train_all(source, c, &err);
      err << "scoring " << source.select(Split::Test).size() << " test clips\n";
      const auto result = run_experiment(score_test(source, models, c), c);
      write_experiment(dir, result);
      save_models(dir / "models", models);
      save_config(dir / "config.json", c);
      write_run_json(dir, "demo", {{"reversal", demo_reversal}}, c);
      out << result.summary;
    }
    return 0;
  } catch (const Error& e) {
    err << "error kind=" << e.kind() << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error kind=internal: " << one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace nbs
