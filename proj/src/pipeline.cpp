#include "nbsmooth/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>

#include "nbsmooth/csv.hpp"
#include "nbsmooth/disc_embedder.hpp"
#include "nbsmooth/error.hpp"
#include "nbsmooth/gen_scorer.hpp"
#include "nbsmooth/parallel.hpp"
#include "nbsmooth/wav.hpp"

namespace nbs {

std::vector<std::string> ClipSource::machines() const {
  std::vector<std::string> out;
  for (const auto& m : metas) {
    if (std::find(out.begin(), out.end(), m.machine) == out.end()) out.push_back(m.machine);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ClipMeta> ClipSource::select(Split split, const std::string& machine) const {
  std::vector<ClipMeta> out;
  for (const auto& m : metas) {
    if (m.split == split && (machine.empty() || m.machine == machine)) out.push_back(m);
  }
  return out;
}

ClipSource synthetic_source(const CorpusSpec& spec) {
  validate(spec);
  ClipSource s;
  s.metas = plan_corpus(spec);
  s.load = [spec](const ClipMeta& meta) { return synthesize_clip(spec, meta); };
  return s;
}

ClipSource manifest_source(const std::filesystem::path& manifest) {
  const auto entries = read_manifest(manifest);
  const auto base = manifest.parent_path();
  std::map<std::string, std::filesystem::path> paths;
  ClipSource s;
  for (const auto& e : entries) {
    if (e.path.empty()) {
      throw DataIntegrityError("manifest row '" + e.meta.clip_id + "' has no path");
    }
    paths[e.meta.clip_id] = base / e.path;
    s.metas.push_back(e.meta);
  }
  std::sort(s.metas.begin(), s.metas.end(),
            [](const ClipMeta& a, const ClipMeta& b) { return a.clip_id < b.clip_id; });
  s.load = [paths = std::move(paths)](const ClipMeta& meta) {
    return load_wav(paths.at(meta.clip_id), meta);
  };
  return s;
}

ClipSource make_source(const RunConfig& config) {
  if (!config.manifest.empty()) return manifest_source(config.manifest);
  return synthetic_source(seeded_corpus(config));
}

void write_corpus(const ClipSource& source, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "audio");
  std::vector<ManifestEntry> entries(source.metas.size());
  parallel_for(source.metas.size(), [&](std::size_t i) {
    const auto& meta = source.metas[i];
    const std::string rel = "audio/" + meta.clip_id + ".wav";
    write_wav(dir / rel, source.load(meta));
    entries[i] = {meta, rel};
  });
  write_manifest(dir / "manifest.csv", entries);
}

MlpModel train_ae_for(const ClipSource& source, const std::string& machine,
                      const RunConfig& config) {
  const auto clips = source.select(Split::Train, machine);
  if (clips.empty()) {
    throw ConfigError("machine '" + machine + "' has no training clips");
  }
  std::vector<std::vector<Eigen::MatrixXd>> per_clip(clips.size());
  parallel_for(clips.size(), [&](std::size_t i) {
    if (clips[i].label != Label::Normal) {
      throw ConfigError("training clip '" + clips[i].clip_id + "' is not Normal");
    }
    const AudioClip clip = source.load(clips[i]);
    const LogMelExtractor ex(config.ae_mel, clip.sample_rate);
    per_clip[i] = segment_features(standardize(clip), ex);
  });
  std::vector<Eigen::MatrixXd> segments;
  for (auto& c : per_clip) {
    for (auto& s : c) segments.push_back(std::move(s));
    c.clear();
  }
  return train_ae_on_segments(segments, seeded_ae(config, machine)).model;
}

PooledClips pool_train_clips(const ClipSource& source, const RunConfig& config) {
  PooledClips out;
  out.clips = source.select(Split::Train);
  out.pooled.resize(out.clips.size());
  parallel_for(out.clips.size(), [&](std::size_t i) {
    const AudioClip clip = source.load(out.clips[i]);
    const LogMelExtractor ex(config.disc_mel, clip.sample_rate);
    out.pooled[i] = pooled_segments(standardize(clip), ex);
  });
  return out;
}

std::vector<DiscModel> train_disc_models(const PooledClips& train, const RunConfig& config) {
  DiscTrainingSet data;
  Eigen::Index rows = 0;
  for (const auto& p : train.pooled) rows += p.rows();
  if (rows == 0) throw ConfigError("no training segments for the discriminative models");
  data.features.resize(rows, train.pooled.front().cols());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < train.pooled.size(); ++i) {
    const auto& p = train.pooled[i];
    data.features.middleRows(at, p.rows()) = p;
    at += p.rows();
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      data.machine.push_back(train.clips[i].machine);
      data.section.push_back(train.clips[i].section);
    }
  }
  std::vector<std::string> machines;
  for (const auto& m : data.machine) {
    if (std::find(machines.begin(), machines.end(), m) == machines.end()) machines.push_back(m);
  }
  std::sort(machines.begin(), machines.end());
  std::vector<DiscModel> models(machines.size());
  parallel_for(machines.size(), [&](std::size_t i) {
    models[i] =
        train_disc_on_features(machines[i], data, seeded_disc(config, machines[i])).model;
  });
  return models;
}

GmmModel fit_gmm_baseline(const DiscModel& disc, const PooledClips& train,
                          const RunConfig& config) {
  std::vector<Eigen::VectorXd> rows;
  for (std::size_t i = 0; i < train.clips.size(); ++i) {
    const auto& m = train.clips[i];
    if (m.machine != disc.machine) continue;
    if (config.gmm.train_domain == DomainFilter::SourceOnly && m.domain != Domain::Source) {
      continue;
    }
    rows.push_back(embed_segments(disc, train.pooled[i]));
  }
  if (rows.empty()) {
    throw ConfigError("no training embeddings for the GMM of '" + disc.machine + "'");
  }
  Eigen::MatrixXd points(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    points.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return fit_gmm(points, config.gmm.n_components, gmm_seed(config, disc.machine),
                 config.gmm.options)
      .model;
}

std::vector<MachineModels> train_all(const ClipSource& source, const RunConfig& config,
                                     std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  const auto note = [&](const std::string& what) {
    if (!log) return;
    const std::chrono::duration<double> t = std::chrono::steady_clock::now() - start;
    *log << what << " (" << std::fixed << std::setprecision(1) << t.count() << " s)\n";
  };
  std::vector<MachineModels> out;
  for (const auto& machine : source.machines()) {
    MachineModels m;
    m.machine = machine;
    m.ae = train_ae_for(source, machine, config);
    out.push_back(std::move(m));
    note("trained autoencoder for " + machine);
  }
  const auto pooled = pool_train_clips(source, config);
  note("pooled training features");
  auto discs = train_disc_models(pooled, config);
  note("trained discriminative models");
  for (auto& d : discs) {
    for (auto& m : out) {
      if (m.machine != d.machine) continue;
      m.gmm = fit_gmm_baseline(d, pooled, config);
      m.disc = std::move(d);
    }
  }
  return out;
}

TestOutputs score_test(const ClipSource& source, const std::vector<MachineModels>& models,
                       const RunConfig& config) {
  std::map<std::string, const MachineModels*> by_machine;
  for (const auto& m : models) by_machine[m.machine] = &m;
  std::vector<ClipMeta> clips;
  for (const auto& m : source.select(Split::Test)) {
    if (by_machine.count(m.machine)) clips.push_back(m);
  }
  if (clips.empty()) throw ConfigError("no test clips for the given models");
  const bool with_disc = std::all_of(models.begin(), models.end(),
                                     [](const auto& m) { return m.disc.has_value(); });
  const bool with_gmm = with_disc && std::all_of(models.begin(), models.end(),
                                                 [](const auto& m) { return m.gmm.has_value(); });

  std::vector<double> gen(clips.size()), gmm(clips.size());
  std::vector<Eigen::VectorXd> emb(clips.size());
  parallel_for(clips.size(), [&](std::size_t i) {
    const auto& mm = *by_machine.at(clips[i].machine);
    const AudioClip clip = standardize(source.load(clips[i]));
    const LogMelExtractor ae_ex(config.ae_mel, clip.sample_rate);
    gen[i] = score_segments(mm.ae, segment_features(clip, ae_ex), config.ae.context).score;
    if (!with_disc) return;
    const LogMelExtractor disc_ex(config.disc_mel, clip.sample_rate);
    emb[i] = embed_segments(*mm.disc, pooled_segments(clip, disc_ex));
    if (with_gmm) gmm[i] = gmm_score(*mm.gmm, emb[i]);
  });

  TestOutputs out;
  out.scores.rows = clips;
  out.scores.set_column("score_gen", std::move(gen));
  if (with_gmm) out.scores.set_column("score_gmm", std::move(gmm));
  if (with_disc) {
    out.embeddings.values.resize(static_cast<Eigen::Index>(clips.size()), emb.front().size());
    for (std::size_t i = 0; i < clips.size(); ++i) {
      out.embeddings.clip_ids.push_back(clips[i].clip_id);
      out.embeddings.values.row(static_cast<Eigen::Index>(i)) = emb[i].transpose();
    }
    out.embeddings.rebuild_index();
  }
  return out;
}

std::vector<ScoredSample> scored_samples(const TestOutputs& outputs) {
  return join_scores(outputs.scores, outputs.embeddings);
}

ExperimentResult run_experiment(TestOutputs outputs, const RunConfig& config) {
  const auto& ev = config.evaluation;
  const auto samples = scored_samples(outputs);
  ExperimentResult r;
  r.sweep = sweep(samples, ev.k_grid, ev.domain_grid, config.smoothing.metric, ev.p);
  outputs.scores.set_column(
      "score_smooth", smooth_by_machine(samples, r.sweep.chosen_settings(), config.smoothing));
  outputs.scores.set_column(
      "score_oracle", smooth_by_machine(samples, r.sweep.oracle_settings(), config.smoothing));
  r.outputs = std::move(outputs);
  const auto& t = r.outputs.scores;
  const auto split = EvalSplit::Evaluation;
  r.ae = evaluate(t, "score_gen", split, ev.p);
  std::vector<NamedReport> named{{"AE", &r.ae}};
  if (t.has_column("score_gmm")) {
    r.gmm = evaluate(t, "score_gmm", split, ev.p);
    named.push_back({"SerialOE", &r.gmm});
  }
  r.proposed = evaluate(t, "score_smooth", split, ev.p);
  r.oracle = evaluate(t, "score_oracle", split, ev.p);
  named.push_back({"Proposed", &r.proposed});
  named.push_back({"Oracle", &r.oracle});

  r.summary = "harmonic mean of AUC and pAUC (p=" + csv::format_number(ev.p) +
              "), evaluation sections 3-5\n\n" + format_summary(named) + "\nchosen settings\n";
  for (const auto& m : r.sweep.machines) {
    r.summary += "  " + m.machine + ": K=" + std::to_string(m.chosen.k) + " " +
                 std::string(to_string(m.chosen.domain_filter)) +
                 " (oracle K=" + std::to_string(m.oracle.k) + " " +
                 std::string(to_string(m.oracle.domain_filter)) + ")\n";
  }
  return r;
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  write_score_table(dir / "scores.csv", r.outputs.scores);
  write_embedding_table(dir / "embeddings.csv", r.outputs.embeddings);
  write_sweep_csv(dir / "sweep.csv", r.sweep);
  write_choice_csv(dir / "choice.csv", r.sweep);
  write_report_csv(dir / "report_ae.csv", r.ae);
  if (r.outputs.scores.has_column("score_gmm")) write_report_csv(dir / "report_gmm.csv", r.gmm);
  write_report_csv(dir / "report_proposed.csv", r.proposed);
  write_report_csv(dir / "report_oracle.csv", r.oracle);
  std::ofstream out(dir / "summary.txt", std::ios::binary);
  if (!out) throw IoError("cannot write '" + (dir / "summary.txt").string() + "'");
  out << r.summary;
}

void save_models(const std::filesystem::path& dir, const std::vector<MachineModels>& models) {
  std::filesystem::create_directories(dir);
  for (const auto& m : models) {
    save_json(dir / ("ae_" + m.machine + ".json"), to_json(m.ae));
    if (m.disc) save_json(dir / ("disc_" + m.machine + ".json"), to_json(*m.disc));
    if (m.gmm) save_json(dir / ("gmm_" + m.machine + ".json"), to_json(*m.gmm));
  }
}

std::vector<MachineModels> load_models(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("model directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::string> machines;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.starts_with("ae_") && name.ends_with(".json")) {
      machines.push_back(name.substr(3, name.size() - 8));
    }
  }
  std::sort(machines.begin(), machines.end());
  if (machines.empty()) throw IoError("no ae_<machine>.json models in '" + dir.string() + "'");
  std::vector<MachineModels> out;
  for (const auto& machine : machines) {
    MachineModels m;
    m.machine = machine;
    m.ae = mlp_from_json(load_json(dir / ("ae_" + machine + ".json")));
    if (const auto p = dir / ("disc_" + machine + ".json"); std::filesystem::exists(p)) {
      m.disc = disc_from_json(load_json(p));
    }
    if (const auto p = dir / ("gmm_" + machine + ".json"); std::filesystem::exists(p)) {
      m.gmm = gmm_from_json(load_json(p));
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace nbs
