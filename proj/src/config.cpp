#include "nbsmooth/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "nbsmooth/error.hpp"
#include "nbsmooth/random.hpp"

namespace nbs {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void type_error(const std::string& path, const char* expected) {
  throw ConfigError("config key '" + path + "': expected " + expected);
}

void convert(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) type_error(path, "an integer");
  const auto v = j.get<std::int64_t>();
  if (v < INT32_MIN || v > INT32_MAX) type_error(path, "a 32-bit integer");
  out = static_cast<int>(v);
}

void convert(const json& j, const std::string& path, std::uint64_t& out) {
  if (j.is_number_unsigned()) {
    out = j.get<std::uint64_t>();
  } else if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    out = static_cast<std::uint64_t>(j.get<std::int64_t>());
  } else {
    type_error(path, "a non-negative integer");
  }
}

void convert(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) type_error(path, "a number");
  out = j.get<double>();
}

void convert(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) type_error(path, "a string");
  out = j.get<std::string>();
}

template <typename Parse, typename T>
void convert_enum(const json& j, const std::string& path, T& out, Parse parse) {
  if (!j.is_string()) type_error(path, "a string");
  try {
    out = parse(j.get<std::string>());
  } catch (const Error& e) {
    throw ConfigError("config key '" + path + "': " + e.what());
  }
}

void convert(const json& j, const std::string& path, DomainFilter& out) {
  convert_enum(j, path, out, [](const std::string& s) { return parse_domain_filter(s); });
}

void convert(const json& j, const std::string& path, Metric& out) {
  convert_enum(j, path, out, [](const std::string& s) { return parse_metric(s); });
}

DiscrepancyMode parse_discrepancy(const std::string& s) {
  if (s == "none") return DiscrepancyMode::None;
  if (s == "reversal") return DiscrepancyMode::Reversal;
  throw ConfigError("unknown discrepancy mode '" + s + "' (expected none or reversal)");
}

std::string to_string(DiscrepancyMode m) {
  return m == DiscrepancyMode::None ? "none" : "reversal";
}

void convert(const json& j, const std::string& path, DiscrepancyMode& out) {
  convert_enum(j, path, out, parse_discrepancy);
}

template <typename T>
void convert(const json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) type_error(path, "an array");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    T v{};
    convert(j[i], path + "[" + std::to_string(i) + "]", v);
    out.push_back(std::move(v));
  }
}

/// Reads known keys of one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) type_error(path_.empty() ? "<root>" : path_, "an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (const auto it = j_.find(key); it != j_.end()) convert(*it, join(path_, key), out);
  }

  template <typename Fn>
  void object(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    if (const auto it = j_.find(key); it != j_.end()) {
      ObjectReader inner(*it, join(path_, key));
      fn(inner);
      inner.finish();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key '" + join(path_, key) + "'");
      }
    }
  }

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }
  void mark(const std::string& key) { seen_.insert(key); }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_mel(ObjectReader& r, MelConfig& m) {
  r.read("window_ms", m.window_ms);
  r.read("hop_ms", m.hop_ms);
  r.read("n_mels", m.n_mels);
  r.read("f_min", m.f_min);
  r.read("f_max", m.f_max);
  r.read("fft_size", m.fft_size);
  r.read("log_floor", m.log_floor);
}

json write_mel(const MelConfig& m) {
  return {{"window_ms", m.window_ms}, {"hop_ms", m.hop_ms},   {"n_mels", m.n_mels},
          {"f_min", m.f_min},         {"f_max", m.f_max},     {"fft_size", m.fft_size},
          {"log_floor", m.log_floor}};
}

void read_machine(ObjectReader& r, MachineDescriptor& m) {
  r.read("name", m.name);
  r.read("section_f0", m.section_f0);
  r.read("n_harmonics", m.n_harmonics);
  r.read("harmonic_rolloff", m.harmonic_rolloff);
  r.read("noise_level", m.noise_level);
  r.read("noise_color", m.noise_color);
  r.read("f0_jitter", m.f0_jitter);
  r.read("amplitude_jitter_db", m.amplitude_jitter_db);
}

json write_machine(const MachineDescriptor& m) {
  return {{"name", m.name},
          {"section_f0", m.section_f0},
          {"n_harmonics", m.n_harmonics},
          {"harmonic_rolloff", m.harmonic_rolloff},
          {"noise_level", m.noise_level},
          {"noise_color", m.noise_color},
          {"f0_jitter", m.f0_jitter},
          {"amplitude_jitter_db", m.amplitude_jitter_db}};
}

void read_corpus(ObjectReader& r, CorpusSpec& c) {
  r.mark("machines");
  if (const auto it = r.raw().find("machines"); it != r.raw().end()) {
    const std::string path = join(r.path(), "machines");
    if (!it->is_array()) type_error(path, "an array");
    c.machines.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      MachineDescriptor m;
      ObjectReader inner((*it)[i], path + "[" + std::to_string(i) + "]");
      read_machine(inner, m);
      inner.finish();
      c.machines.push_back(std::move(m));
    }
  }
  r.read("n_sections", c.n_sections);
  r.read("n_train_source", c.n_train_source);
  r.read("n_train_target", c.n_train_target);
  r.read("n_test", c.n_test);
  r.read("duration_seconds", c.duration_seconds);
  r.read("sample_rate", c.sample_rate);
  r.object("domain_shift", [&](ObjectReader& d) {
    d.read("gain_db", c.domain_shift.gain_db);
    d.read("noise_level", c.domain_shift.noise_level);
    d.read("noise_color", c.domain_shift.noise_color);
    d.read("f0_detune", c.domain_shift.f0_detune);
  });
  r.object("anomaly_model", [&](ObjectReader& a) {
    a.read("harmonic_detune", c.anomaly_model.harmonic_detune);
    a.read("burst_energy", c.anomaly_model.burst_energy);
    a.read("am_depth", c.anomaly_model.am_depth);
  });
  r.read("discrepancy_mode", c.discrepancy_mode);
  r.object("reversal", [&](ObjectReader& a) {
    a.read("machine", c.reversal.machine);
    a.read("section", c.reversal.section);
    a.read("shift_scale", c.reversal.shift_scale);
  });
}

json write_corpus(const CorpusSpec& c) {
  json machines = json::array();
  for (const auto& m : c.machines) machines.push_back(write_machine(m));
  return {{"machines", machines},
          {"n_sections", c.n_sections},
          {"n_train_source", c.n_train_source},
          {"n_train_target", c.n_train_target},
          {"n_test", c.n_test},
          {"duration_seconds", c.duration_seconds},
          {"sample_rate", c.sample_rate},
          {"domain_shift",
           {{"gain_db", c.domain_shift.gain_db},
            {"noise_level", c.domain_shift.noise_level},
            {"noise_color", c.domain_shift.noise_color},
            {"f0_detune", c.domain_shift.f0_detune}}},
          {"anomaly_model",
           {{"harmonic_detune", c.anomaly_model.harmonic_detune},
            {"burst_energy", c.anomaly_model.burst_energy},
            {"am_depth", c.anomaly_model.am_depth}}},
          {"discrepancy_mode", to_string(c.discrepancy_mode)},
          {"reversal",
           {{"machine", c.reversal.machine},
            {"section", c.reversal.section},
            {"shift_scale", c.reversal.shift_scale}}}};
}

std::vector<std::string> names(const std::vector<DomainFilter>& v) {
  std::vector<std::string> out;
  for (auto f : v) out.emplace_back(to_string(f));
  return out;
}

}  // namespace

void validate(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (c.manifest.empty()) validate(c.corpus);
  try {
    validate(c.ae_mel, c.corpus.sample_rate);
  } catch (const Error& e) {
    fail("ae_mel", e.what());
  }
  try {
    validate(c.disc_mel, c.corpus.sample_rate);
  } catch (const Error& e) {
    fail("disc_mel", e.what());
  }
  try {
    validate(c.ae);
  } catch (const Error& e) {
    fail("ae", e.what());
  }
  try {
    validate(c.disc);
  } catch (const Error& e) {
    fail("disc", e.what());
  }
  if (c.gmm.n_components < 1) fail("gmm.n_components", "must be >= 1");
  if (c.smoothing.k < 1) fail("smoothing.k", "must be >= 1");
  if (!(c.evaluation.p > 0.0 && c.evaluation.p <= 1.0)) fail("evaluation.p", "must lie in (0, 1]");
  if (c.evaluation.k_grid.empty()) fail("evaluation.k_grid", "must not be empty");
  for (int k : c.evaluation.k_grid) {
    if (k < 1) fail("evaluation.k_grid", "values must be >= 1");
  }
  if (c.evaluation.domain_grid.empty()) fail("evaluation.domain_grid", "must not be empty");
  if (c.evaluation.n_trials < 1) fail("evaluation.n_trials", "must be >= 1");
  for (double f : c.evaluation.fractions) {
    if (!(f > 0.0 && f <= 1.0)) fail("evaluation.fractions", "values must lie in (0, 1]");
  }
  if (c.output_dir.empty()) fail("output_dir", "must not be empty");
}

json to_json(const RunConfig& c) {
  return {
      {"corpus", write_corpus(c.corpus)},
      {"manifest", c.manifest},
      {"ae_mel", write_mel(c.ae_mel)},
      {"disc_mel", write_mel(c.disc_mel)},
      {"ae",
       {{"context", c.ae.context},
        {"hidden", c.ae.hidden},
        {"epochs", c.ae.epochs},
        {"batch_size", c.ae.batch_size},
        {"frames_per_segment", c.ae.frames_per_segment},
        {"learning_rate", c.ae.learning_rate}}},
      {"disc",
       {{"embed_dim", c.disc.embed_dim},
        {"hidden", c.disc.hidden},
        {"lambda_id", c.disc.lambda_id},
        {"epochs", c.disc.epochs},
        {"batch_size", c.disc.batch_size},
        {"learning_rate", c.disc.learning_rate},
        {"weight_decay", c.disc.weight_decay}}},
      {"gmm",
       {{"n_components", c.gmm.n_components},
        {"train_domain", to_string(c.gmm.train_domain)},
        {"max_iterations", c.gmm.options.max_iterations},
        {"tolerance", c.gmm.options.tolerance},
        {"var_floor", c.gmm.options.var_floor}}},
      {"smoothing",
       {{"k", c.smoothing.k},
        {"domain", to_string(c.smoothing.domain_filter)},
        {"metric", to_string(c.smoothing.metric)}}},
      {"evaluation",
       {{"p", c.evaluation.p},
        {"k_grid", c.evaluation.k_grid},
        {"domain_grid", names(c.evaluation.domain_grid)},
        {"fractions", c.evaluation.fractions},
        {"n_trials", c.evaluation.n_trials}}},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
  };
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  ObjectReader r(doc, "");
  r.object("corpus", [&](ObjectReader& o) { read_corpus(o, c.corpus); });
  r.read("manifest", c.manifest);
  r.object("ae_mel", [&](ObjectReader& o) { read_mel(o, c.ae_mel); });
  r.object("disc_mel", [&](ObjectReader& o) { read_mel(o, c.disc_mel); });
  r.object("ae", [&](ObjectReader& o) {
    o.read("context", c.ae.context);
    o.read("hidden", c.ae.hidden);
    o.read("epochs", c.ae.epochs);
    o.read("batch_size", c.ae.batch_size);
    o.read("frames_per_segment", c.ae.frames_per_segment);
    o.read("learning_rate", c.ae.learning_rate);
  });
  r.object("disc", [&](ObjectReader& o) {
    o.read("embed_dim", c.disc.embed_dim);
    o.read("hidden", c.disc.hidden);
    o.read("lambda_id", c.disc.lambda_id);
    o.read("epochs", c.disc.epochs);
    o.read("batch_size", c.disc.batch_size);
    o.read("learning_rate", c.disc.learning_rate);
    o.read("weight_decay", c.disc.weight_decay);
  });
  r.object("gmm", [&](ObjectReader& o) {
    o.read("n_components", c.gmm.n_components);
    o.read("train_domain", c.gmm.train_domain);
    o.read("max_iterations", c.gmm.options.max_iterations);
    o.read("tolerance", c.gmm.options.tolerance);
    o.read("var_floor", c.gmm.options.var_floor);
  });
  r.object("smoothing", [&](ObjectReader& o) {
    o.read("k", c.smoothing.k);
    o.read("domain", c.smoothing.domain_filter);
    o.read("metric", c.smoothing.metric);
  });
  r.object("evaluation", [&](ObjectReader& o) {
    o.read("p", c.evaluation.p);
    o.read("k_grid", c.evaluation.k_grid);
    o.read("domain_grid", c.evaluation.domain_grid);
    o.read("fractions", c.evaluation.fractions);
    o.read("n_trials", c.evaluation.n_trials);
  });
  r.read("output_dir", c.output_dir);
  r.read("seed", c.seed);
  r.finish();
  c.corpus.seed = c.seed;
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + file.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return RunConfig{};
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + file.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(doc);
}

void save_config(const std::filesystem::path& file, const RunConfig& config) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << to_json(config).dump(2) << '\n';
}

AeConfig seeded_ae(const RunConfig& config, const std::string& machine) {
  AeConfig c = config.ae;
  c.seed = derive_seed(config.seed, "ae/" + machine);
  return c;
}

DiscConfig seeded_disc(const RunConfig& config, const std::string& machine) {
  DiscConfig c = config.disc;
  c.seed = derive_seed(config.seed, "disc/" + machine);
  return c;
}

std::uint64_t gmm_seed(const RunConfig& config, const std::string& machine) {
  return derive_seed(config.seed, "gmm/" + machine);
}

std::uint64_t subsample_seed(const RunConfig& config) {
  return derive_seed(config.seed, "subsample");
}

CorpusSpec seeded_corpus(const RunConfig& config) {
  CorpusSpec c = config.corpus;
  c.seed = config.seed;
  return c;
}

}  // namespace nbs
