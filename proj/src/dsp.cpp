#include "nbsmooth/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "nbsmooth/csv.hpp"
#include "nbsmooth/error.hpp"

namespace nbs {

int MelConfig::window_samples(int sample_rate) const {
  return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
}

int MelConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

int MelConfig::fft_samples(int sample_rate) const {
  if (fft_size > 0) return fft_size;
  int n = 1;
  while (n < window_samples(sample_rate)) n <<= 1;
  return n;
}

MelConfig ae_preset() { return MelConfig{}; }

MelConfig disc_preset() {
  MelConfig c;
  c.window_ms = 128.0;
  c.hop_ms = 16.0;
  c.n_mels = 224;
  return c;
}

void validate(const MelConfig& c, int sample_rate) {
  if (c.n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (!(c.f_min > 0.0) || !(c.f_min < c.f_max) ||
      c.f_max > sample_rate / 2.0) {
    throw ConfigError("mel range must satisfy 0 < f_min < f_max <= " +
                      std::to_string(sample_rate / 2));
  }
  const int window = c.window_samples(sample_rate);
  if (window < 2) throw ConfigError("mel window shorter than two samples");
  if (c.hop_samples(sample_rate) < 1) throw ConfigError("mel hop must be >= 1 sample");
  if (c.fft_samples(sample_rate) < window) {
    throw ConfigError("fft_size " + std::to_string(c.fft_size) +
                      " is shorter than the window (" + std::to_string(window) +
                      " samples)");
  }
  if (!(c.log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

Eigen::Index frame_count(Eigen::Index length, int window_len, int hop) {
  if (length < window_len) return 0;
  return (length - window_len) / hop + 1;
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Real-to-complex FFT of one size. Plans are created under a global lock
/// (the FFTW planner is not thread-safe); execution is per-thread.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::lock_guard lock(fftw_planner_mutex());
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void execute() { fftw_execute(plan_); }
  int size() const { return n_; }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

RealFft& fft_for(int n) {
  thread_local std::map<int, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

Eigen::VectorXd hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

void check_stft_args(Eigen::Index length, int window_len, int hop,
                     int fft_size) {
  if (window_len < 1 || window_len > fft_size) {
    throw SizeError("window length " + std::to_string(window_len) +
                    " must lie in [1, fft_size=" + std::to_string(fft_size) +
                    "]");
  }
  if (hop < 1) throw SizeError("hop must be >= 1");
  if (length < window_len) {
    throw SizeError("signal of " + std::to_string(length) +
                    " samples is shorter than one window (" +
                    std::to_string(window_len) + ")");
  }
}

/// Loads frame t into the FFT input buffer and runs the transform.
void transform_frame(RealFft& fft, const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::VectorXd& window, Eigen::Index start) {
  double* in = fft.input();
  const auto w = window.size();
  for (Eigen::Index i = 0; i < w; ++i) in[i] = x[start + i] * window[i];
  for (Eigen::Index i = w; i < fft.size(); ++i) in[i] = 0.0;
  fft.execute();
}

}  // namespace

Eigen::MatrixXcd stft(const Eigen::Ref<const Eigen::VectorXd>& samples,
                      int window_len, int hop, int fft_size) {
  check_stft_args(samples.size(), window_len, hop, fft_size);
  const Eigen::Index frames = frame_count(samples.size(), window_len, hop);
  const int bins = fft_size / 2 + 1;
  const Eigen::VectorXd window = hann(window_len);
  RealFft& fft = fft_for(fft_size);
  Eigen::MatrixXcd out(frames, bins);
  for (Eigen::Index t = 0; t < frames; ++t) {
    transform_frame(fft, samples, window, t * hop);
    const fftw_complex* y = fft.output();
    for (int k = 0; k < bins; ++k) out(t, k) = {y[k][0], y[k][1]};
  }
  return out;
}

Eigen::MatrixXd mel_filterbank(const MelConfig& config, int sample_rate) {
  validate(config, sample_rate);
  const int fft_size = config.fft_samples(sample_rate);
  const int bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(config.f_min);
  const double mel_hi = hz_to_mel(config.f_max);
  const double step = (mel_hi - mel_lo) / (config.n_mels + 1);
  std::vector<double> edges(static_cast<std::size_t>(config.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + step * static_cast<double>(i));
  }
  edges.front() = config.f_min;
  edges.back() = config.f_max;

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(config.n_mels, bins);
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int m = 0; m < config.n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      if (f <= left || f >= right) continue;
      fb(m, k) = f <= center ? (f - left) / (center - left)
                             : (right - f) / (right - center);
    }
    if (!(fb.row(m).sum() > 0.0)) {
      throw ConfigError("n_mels=" + std::to_string(config.n_mels) +
                        " is too large for fft_size=" +
                        std::to_string(fft_size) + ": mel filter " +
                        std::to_string(m) + " spans no FFT bin");
    }
  }
  return fb;
}

LogMelExtractor::LogMelExtractor(const MelConfig& config, int sample_rate)
    : config_(config),
      sample_rate_(sample_rate),
      window_len_(config.window_samples(sample_rate)),
      hop_(config.hop_samples(sample_rate)),
      fft_size_(config.fft_samples(sample_rate)),
      window_(hann(window_len_)) {
  filterbank_t_ = mel_filterbank(config, sample_rate).transpose().sparseView();
  filterbank_t_.makeCompressed();
}

Eigen::MatrixXd LogMelExtractor::compute(
    const Eigen::Ref<const Eigen::VectorXd>& samples) const {
  check_stft_args(samples.size(), window_len_, hop_, fft_size_);
  const Eigen::Index frames = frame_count(samples.size(), window_len_, hop_);
  const int bins = fft_size_ / 2 + 1;
  RealFft& fft = fft_for(fft_size_);
  Eigen::MatrixXd power(frames, bins);
  for (Eigen::Index t = 0; t < frames; ++t) {
    transform_frame(fft, samples, window_, t * hop_);
    const fftw_complex* y = fft.output();
    for (int k = 0; k < bins; ++k) {
      power(t, k) = y[k][0] * y[k][0] + y[k][1] * y[k][1];
    }
  }
  Eigen::MatrixXd mel = power * filterbank_t_;
  return mel.array().max(config_.log_floor).log().matrix();
}

Spectrogram LogMelExtractor::operator()(const AudioClip& clip) const {
  if (clip.sample_rate != sample_rate_) {
    throw ConfigError("clip '" + clip.meta.clip_id + "' has sample rate " +
                      std::to_string(clip.sample_rate) + ", extractor expects " +
                      std::to_string(sample_rate_));
  }
  return {compute(clip.samples), config_, clip.meta.clip_id};
}

Spectrogram log_mel(const AudioClip& clip, const MelConfig& config) {
  return LogMelExtractor(config, clip.sample_rate)(clip);
}

Eigen::MatrixXd frame_context(const Eigen::Ref<const Eigen::MatrixXd>& frames,
                              int context) {
  if (context < 1) throw SizeError("context must be >= 1");
  const Eigen::Index n = frames.rows();
  if (n < context) {
    throw SizeError("spectrogram has " + std::to_string(n) +
                    " frames, fewer than context " + std::to_string(context));
  }
  const Eigen::Index mels = frames.cols();
  Eigen::MatrixXd out(n - context + 1, context * mels);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < context; ++c) {
      out.block(r, c * mels, 1, mels) = frames.row(r + c);
    }
  }
  return out;
}

Eigen::MatrixXd frame_context(const Spectrogram& spec, int context) {
  return frame_context(spec.values, context);
}

std::vector<AudioClip> segment_clip(const AudioClip& clip, double seg_seconds,
                                    double overlap) {
  if (!(seg_seconds > 0.0) || overlap < 0.0 || !(overlap < 1.0)) {
    throw ConfigError("segment length must be positive and overlap in [0, 1)");
  }
  const auto seg_len =
      static_cast<Eigen::Index>(std::llround(seg_seconds * clip.sample_rate));
  const auto hop = std::max<Eigen::Index>(
      1, std::llround(seg_seconds * (1.0 - overlap) * clip.sample_rate));
  if (clip.samples.size() < seg_len) {
    throw SizeError("clip '" + clip.meta.clip_id + "' lasts " +
                    csv::format_number(clip.duration_seconds()) +
                    " s, shorter than one " + csv::format_number(seg_seconds) +
                    " s segment");
  }
  const Eigen::Index count = (clip.samples.size() - seg_len) / hop + 1;
  std::vector<AudioClip> segments;
  segments.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index s = 0; s < count; ++s) {
    AudioClip seg;
    seg.meta = clip.meta;
    seg.sample_rate = clip.sample_rate;
    seg.samples = clip.samples.segment(s * hop, seg_len);
    segments.push_back(std::move(seg));
  }
  return segments;
}

void write_spectrogram_csv(const std::filesystem::path& file,
                           const Spectrogram& spec) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << "frame";
  for (Eigen::Index m = 0; m < spec.n_mels(); ++m) out << ",m" << m;
  out << '\n';
  for (Eigen::Index t = 0; t < spec.n_frames(); ++t) {
    out << t;
    for (Eigen::Index m = 0; m < spec.n_mels(); ++m) {
      out << ',' << csv::format_number(spec.values(t, m));
    }
    out << '\n';
  }
}

}  // namespace nbs
