#pragma once

#include <filesystem>

#include "nbsmooth/corpus.hpp"

namespace nbs {

/// Reads a RIFF PCM 16-bit mono 16 kHz file. Samples are scaled by 1/32768.
/// Any other format raises FormatError naming the offending property. The
/// returned clip carries `meta` unchanged.
AudioClip load_wav(const std::filesystem::path& path, ClipMeta meta = {});

/// Writes 16-bit PCM mono. Samples are scaled by 32768, rounded and clamped.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace nbs
