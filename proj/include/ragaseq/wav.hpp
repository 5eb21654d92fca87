#pragma once

#include <filesystem>
#include <vector>

namespace ragaseq {

/// Mono audio with samples scaled to [-1, 1].
struct Audio {
  int sample_rate = 16000;
  std::vector<float> samples;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads a mono 16-bit little-endian PCM WAV file. Other encodings are rejected.
Audio read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit PCM; samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Audio& audio);

}  // namespace ragaseq
