#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "nbsmooth/corpus.hpp"
#include "nbsmooth/dsp.hpp"
#include "nbsmooth/error.hpp"
#include "nbsmooth/random.hpp"
#include "nbsmooth/wav.hpp"

namespace {

namespace fs = std::filesystem;

nbs::CorpusSpec small_spec() {
  nbs::CorpusSpec s = nbs::default_corpus_spec();
  s.n_sections = 2;
  s.n_train_source = 2;
  s.n_train_target = 1;
  s.n_test = 1;
  s.duration_seconds = 0.25;
  return s;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nbsmooth_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Corpus, AllZeroCountsGiveEmptyCorpus) {
  auto s = small_spec();
  s.n_train_source = s.n_train_target = s.n_test = 0;
  EXPECT_TRUE(nbs::generate_corpus(s).empty());
}

TEST(Corpus, TestClipCountPerMachine) {
  auto s = nbs::default_corpus_spec();
  s.n_sections = 6;
  s.n_test = 100;
  const auto plan = nbs::plan_corpus(s);
  const auto n = std::count_if(plan.begin(), plan.end(), [&](const nbs::ClipMeta& m) {
    return m.split == nbs::Split::Test && m.machine == s.machines[0].name;
  });
  EXPECT_EQ(n, 6 * 2 * (100 + 100));
}

TEST(Corpus, DeterministicInSpec) {
  const auto a = nbs::generate_corpus(small_spec());
  const auto b = nbs::generate_corpus(small_spec());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].meta, b[i].meta);
    EXPECT_EQ(a[i].samples, b[i].samples);
  }
  auto other = small_spec();
  other.seed = 8;
  EXPECT_NE(nbs::generate_corpus(other)[0].samples, a[0].samples);
}

TEST(Corpus, UniqueIdsAndNoAnomaliesInTraining) {
  const auto plan = nbs::plan_corpus(nbs::default_corpus_spec());
  std::set<std::string> ids;
  for (const auto& m : plan) {
    EXPECT_TRUE(ids.insert(m.clip_id).second);
    if (m.split == nbs::Split::Train) EXPECT_EQ(m.label, nbs::Label::Normal);
  }
}

TEST(Corpus, ClipLengthFollowsDuration) {
  const auto spec = nbs::default_corpus_spec();
  const auto plan = nbs::plan_corpus(spec);
  const auto clip = nbs::synthesize_clip(spec, plan.front());
  EXPECT_EQ(clip.samples.size(), std::llround(spec.duration_seconds * 16000));
  EXPECT_EQ(clip.sample_rate, 16000);
}

TEST(Corpus, InvalidSpecsRejected) {
  auto s = small_spec();
  s.machines.clear();
  EXPECT_THROW(nbs::validate(s), nbs::ConfigError);
  s = small_spec();
  s.n_test = -1;
  EXPECT_THROW(nbs::validate(s), nbs::ConfigError);
  s = small_spec();
  s.n_sections = 7;
  EXPECT_THROW(nbs::validate(s), nbs::ConfigError);
}

TEST(Corpus, ValidationAndEvaluationSections) {
  for (int s = 0; s < 3; ++s) EXPECT_EQ(nbs::eval_split_of(s), nbs::EvalSplit::Validation);
  for (int s = 3; s < 6; ++s) EXPECT_EQ(nbs::eval_split_of(s), nbs::EvalSplit::Evaluation);
}

TEST(Standardize, ListedExample) {
  nbs::AudioClip c;
  c.samples = Eigen::Vector2d(1.0, 3.0);
  const auto s = nbs::standardize(c);
  EXPECT_DOUBLE_EQ(s.samples[0], -1.0);
  EXPECT_DOUBLE_EQ(s.samples[1], 1.0);
}

TEST(Standardize, MeanZeroVarianceOneAndIdempotent) {
  nbs::Rng rng(1);
  nbs::AudioClip c;
  c.samples.resize(16000);
  for (auto& v : c.samples) v = 3.0 + 0.2 * rng.normal();
  const auto s = nbs::standardize(c);
  EXPECT_NEAR(s.samples.mean(), 0.0, 1e-6);
  EXPECT_NEAR(s.samples.array().square().mean(), 1.0, 1e-4);
  const auto twice = nbs::standardize(s);
  EXPECT_LT((twice.samples - s.samples).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Standardize, ConstantSignalRejected) {
  nbs::AudioClip c;
  c.samples = Eigen::VectorXd::Constant(100, 0.25);
  EXPECT_THROW(nbs::standardize(c), nbs::DegenerateInputError);
}

void write_raw_wav(const fs::path& p, int channels, int bits, int rate,
                   const std::vector<std::int16_t>& samples) {
  std::ofstream out(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  u32(36 + data_bytes);
  out.write("WAVEfmt ", 8);
  u32(16);
  u16(1);
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  out.write("data", 4);
  u32(data_bytes);
  for (auto s : samples) u16(static_cast<std::uint16_t>(s));
}

TEST(Wav, ZerosAndScaling) {
  const auto dir = temp_dir("wav");
  write_raw_wav(dir / "z.wav", 1, 16, 16000, {0, 0, 0});
  const auto z = nbs::load_wav(dir / "z.wav");
  EXPECT_EQ(z.samples, Eigen::VectorXd::Zero(3));
  write_raw_wav(dir / "h.wav", 1, 16, 16000, {16384, -32768});
  const auto h = nbs::load_wav(dir / "h.wav");
  EXPECT_EQ(h.samples[0], 0.5);
  EXPECT_EQ(h.samples[1], -1.0);
}

TEST(Wav, WrongFormatNamesProperty) {
  const auto dir = temp_dir("wavfmt");
  write_raw_wav(dir / "s.wav", 2, 16, 16000, {0, 0, 0, 0});
  try {
    nbs::load_wav(dir / "s.wav");
    FAIL();
  } catch (const nbs::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos);
  }
  write_raw_wav(dir / "r.wav", 1, 16, 44100, {0});
  try {
    nbs::load_wav(dir / "r.wav");
    FAIL();
  } catch (const nbs::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("rate"), std::string::npos);
  }
}

TEST(Wav, RoundTripWithinQuantization) {
  const auto spec = small_spec();
  const auto clip = nbs::generate_corpus(spec).front();
  const auto dir = temp_dir("wavrt");
  nbs::write_wav(dir / "c.wav", clip);
  const auto back = nbs::load_wav(dir / "c.wav", clip.meta);
  ASSERT_EQ(back.samples.size(), clip.samples.size());
  EXPECT_LE((back.samples - clip.samples).cwiseAbs().maxCoeff(), 0.5 / 32768.0 + 1e-12);
  nbs::write_wav(dir / "d.wav", back);
  EXPECT_EQ(nbs::load_wav(dir / "d.wav").samples, back.samples);
}

TEST(Manifest, RoundTripAndRejectsAnomalousTraining) {
  const auto dir = temp_dir("manifest");
  std::vector<nbs::ManifestEntry> entries;
  for (const auto& m : nbs::plan_corpus(small_spec())) entries.push_back({m, "audio/" + m.clip_id + ".wav"});
  nbs::write_manifest(dir / "m.csv", entries);
  const auto back = nbs::read_manifest(dir / "m.csv");
  ASSERT_EQ(back.size(), entries.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].meta, entries[i].meta);
    EXPECT_EQ(back[i].path, entries[i].path);
  }
  entries.front().meta.split = nbs::Split::Train;
  entries.front().meta.label = nbs::Label::Anomalous;
  nbs::write_manifest(dir / "bad.csv", entries);
  EXPECT_THROW(nbs::read_manifest(dir / "bad.csv"), nbs::Error);
}

Eigen::RowVectorXd mean_logmel(const nbs::AudioClip& clip) {
  return nbs::log_mel(nbs::standardize(clip), nbs::ae_preset()).values.colwise().mean();
}

TEST(Corpus, ReversalPutsTargetNormalsFartherThanAnomalies) {
  auto spec = nbs::default_corpus_spec();
  spec.discrepancy_mode = nbs::DiscrepancyMode::Reversal;
  const auto& machine = spec.machines[static_cast<std::size_t>(spec.reversal.machine)].name;
  Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(nbs::ae_preset().n_mels);
  int n_train = 0;
  std::vector<double> normal_dist, anomaly_dist;
  std::vector<nbs::ClipMeta> test;
  for (const auto& m : nbs::plan_corpus(spec)) {
    if (m.machine != machine || m.section != spec.reversal.section) continue;
    if (m.split == nbs::Split::Train && m.domain == nbs::Domain::Source) {
      centroid += mean_logmel(nbs::synthesize_clip(spec, m));
      ++n_train;
    } else if (m.split == nbs::Split::Test && m.domain == nbs::Domain::Target) {
      test.push_back(m);
    }
  }
  centroid /= n_train;
  for (const auto& m : test) {
    const double d = (mean_logmel(nbs::synthesize_clip(spec, m)) - centroid).norm();
    (m.label == nbs::Label::Normal ? normal_dist : anomaly_dist).push_back(d);
  }
  ASSERT_FALSE(normal_dist.empty());
  ASSERT_FALSE(anomaly_dist.empty());
  const double mean_normal =
      std::accumulate(normal_dist.begin(), normal_dist.end(), 0.0) / normal_dist.size();
  const double mean_anomaly =
      std::accumulate(anomaly_dist.begin(), anomaly_dist.end(), 0.0) / anomaly_dist.size();
  EXPECT_GT(mean_normal, mean_anomaly);
}

}  // namespace
