#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <filesystem>
#include <string>
#include <vector>

#include "nbsmooth/corpus.hpp"

namespace nbs {

/// Log-mel front end parameters. fft_size 0 means "next power of two at or
/// above the window length".
struct MelConfig {
  double window_ms = 64.0;
  double hop_ms = 32.0;
  int n_mels = 128;
  double f_min = 50.0;
  double f_max = 7800.0;
  int fft_size = 0;
  double log_floor = 1e-10;

  int window_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  int fft_samples(int sample_rate) const;

  bool operator==(const MelConfig&) const = default;
};

/// Generative branch: 64 ms / 32 ms, 128 mels, 50-7800 Hz.
MelConfig ae_preset();
/// Discriminative branch: 128 ms / 16 ms, 224 mels, 50-7800 Hz.
MelConfig disc_preset();

/// Throws ConfigError unless 0 < f_min < f_max <= sample_rate / 2, n_mels >= 1
/// and the window fits inside the FFT.
void validate(const MelConfig& config, int sample_rate);

struct Spectrogram {
  Eigen::MatrixXd values;  // n_frames x n_mels, natural-log power
  MelConfig config;
  std::string clip_id;

  Eigen::Index n_frames() const { return values.rows(); }
  Eigen::Index n_mels() const { return values.cols(); }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Number of frames for a signal of `length` samples; 0 when shorter than a
/// window.
Eigen::Index frame_count(Eigen::Index length, int window_len, int hop);

/// Hann-windowed STFT without padding: frame t covers
/// [t*hop, t*hop + window_len). Returns n_frames x (fft_size/2 + 1).
Eigen::MatrixXcd stft(const Eigen::Ref<const Eigen::VectorXd>& samples,
                      int window_len, int hop, int fft_size);

/// HTK-style triangular filters, n_mels x (fft_size/2 + 1).
Eigen::MatrixXd mel_filterbank(const MelConfig& config, int sample_rate);

/// Reusable extractor: caches the filterbank and window for one config.
class LogMelExtractor {
 public:
  LogMelExtractor(const MelConfig& config, int sample_rate);

  Spectrogram operator()(const AudioClip& clip) const;
  Eigen::MatrixXd compute(const Eigen::Ref<const Eigen::VectorXd>& samples) const;

  const MelConfig& config() const { return config_; }
  int sample_rate() const { return sample_rate_; }

 private:
  MelConfig config_;
  int sample_rate_;
  int window_len_;
  int hop_;
  int fft_size_;
  Eigen::VectorXd window_;
  Eigen::SparseMatrix<double> filterbank_t_;  // bins x n_mels
};

/// log(max(filterbank * |STFT|^2, log_floor)).
Spectrogram log_mel(const AudioClip& clip, const MelConfig& config);

/// Sliding concatenation of `context` consecutive frames with stride 1.
/// Row r holds frames r .. r+context-1, each n_mels wide.
Eigen::MatrixXd frame_context(const Spectrogram& spec, int context);
Eigen::MatrixXd frame_context(const Eigen::Ref<const Eigen::MatrixXd>& frames,
                              int context);

/// Fixed-length segments starting every seg_seconds * (1 - overlap).
std::vector<AudioClip> segment_clip(const AudioClip& clip,
                                    double seg_seconds = 4.0,
                                    double overlap = 0.75);

/// One row per frame, `frame,m0,m1,...`.
void write_spectrogram_csv(const std::filesystem::path& file,
                           const Spectrogram& spec);

}  // namespace nbs
