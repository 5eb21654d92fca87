#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace ragaseq {

/// Autocorrelation tracker settings. Defaults suit a singing voice at 16 kHz.
struct PitchConfig {
  double fmin_hz = 75.0;
  double fmax_hz = 600.0;
  double hop_s = 0.010;
  double frame_s = 0.040;
  double voicing_threshold = 0.45;
  /// Penalty per octave of lag applied when picking among candidate peaks, so
  /// that a true period wins over its near-equal multiples.
  double octave_cost = 0.01;

  void validate(double sample_rate) const;
};

inline constexpr double kUnvoiced = -1.0;

struct PitchFrame {
  double t = 0.0;  ///< centre of the analysis window, seconds
  double f0_hz = kUnvoiced;
  /// Normalized autocorrelation strength of the chosen peak.
  double strength = 0.0;

  bool voiced() const { return f0_hz > 0.0; }
};

struct PitchContour {
  double hop_s = 0.010;
  std::vector<PitchFrame> frames;

  std::size_t voiced_count() const;
};

/// One frame per hop: Hann-windowed normalized autocorrelation over lags
/// [1/fmax, 1/fmin], parabolic refinement of the best peak, voiced iff the
/// peak strength reaches the threshold.
PitchContour track_pitch(std::span<const float> samples, double sample_rate,
                         const PitchConfig& cfg = {});

/// Number of frames `track_pitch` yields for a signal of `n_samples`.
std::size_t pitch_frame_count(std::size_t n_samples, double sample_rate, const PitchConfig& cfg);

/// CSV `t,f0` with f0 = -1 for unvoiced frames.
void write_contour_csv(const std::filesystem::path& path, const PitchContour& contour);
PitchContour read_contour_csv(const std::filesystem::path& path);

}  // namespace ragaseq
