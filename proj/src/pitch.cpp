#include "ragaseq/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "ragaseq/error.hpp"

namespace ragaseq {

void PitchConfig::validate(double sample_rate) const {
  if (!(sample_rate >= 8000.0)) throw Error("pitch: sample rate must be >= 8000 Hz");
  if (!(fmin_hz > 0.0 && fmin_hz < fmax_hz && fmax_hz < sample_rate / 2.0))
    throw Error("pitch: need 0 < fmin < fmax < sample_rate/2");
  if (!(hop_s > 0.0 && hop_s <= frame_s)) throw Error("pitch: need 0 < hop_s <= frame_s");
  if (!(voicing_threshold >= 0.0 && voicing_threshold <= 1.0))
    throw Error("pitch: voicing_threshold must be in [0, 1]");
  if (octave_cost < 0.0) throw Error("pitch: octave_cost must be >= 0");
  if (std::lround(frame_s * sample_rate) <= static_cast<long>(std::ceil(sample_rate / fmax_hz)) + 1)
    throw Error("pitch: frame too short for fmax");
}

std::size_t PitchContour::voiced_count() const {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [](const PitchFrame& f) { return f.voiced(); }));
}

std::size_t pitch_frame_count(std::size_t n_samples, double sample_rate, const PitchConfig& cfg) {
  const auto frame = static_cast<std::size_t>(std::lround(cfg.frame_s * sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * sample_rate));
  if (n_samples < frame) return 0;
  return (n_samples - frame) / hop + 1;
}

PitchContour track_pitch(std::span<const float> samples, double sample_rate, const PitchConfig& cfg) {
  if (samples.empty()) throw Error("pitch: empty input");
  cfg.validate(sample_rate);

  const auto frame = static_cast<std::size_t>(std::lround(cfg.frame_s * sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * sample_rate));
  const auto min_lag = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sample_rate / cfg.fmax_hz)));
  const auto max_lag =
      std::min<std::size_t>(frame - 2, static_cast<std::size_t>(std::ceil(sample_rate / cfg.fmin_hz)));

  std::vector<double> window(frame);
  for (std::size_t n = 0; n < frame; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / (frame - 1));
  // Autocorrelation of the window itself; dividing by it undoes the taper's lag bias.
  std::vector<double> window_ac(max_lag + 2);
  double window_energy = 0.0;
  for (double w : window) window_energy += w * w;
  for (std::size_t lag = 0; lag < window_ac.size(); ++lag) {
    double acc = 0.0;
    for (std::size_t n = 0; n + lag < frame; ++n) acc += window[n] * window[n + lag];
    window_ac[lag] = acc / window_energy;
  }

  PitchContour contour;
  contour.hop_s = cfg.hop_s;
  const std::size_t count = pitch_frame_count(samples.size(), sample_rate, cfg);
  contour.frames.reserve(count);
  std::vector<double> x(frame);
  std::vector<double> rho(max_lag + 2, 0.0);

  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * hop;
    PitchFrame out;
    out.t = (static_cast<double>(start) + frame / 2.0) / sample_rate;

    double mean = 0.0;
    for (std::size_t n = 0; n < frame; ++n) mean += samples[start + n];
    mean /= static_cast<double>(frame);
    double energy = 0.0;
    for (std::size_t n = 0; n < frame; ++n) {
      x[n] = (samples[start + n] - mean) * window[n];
      energy += x[n] * x[n];
    }
    if (energy <= std::numeric_limits<double>::min()) {
      contour.frames.push_back(out);
      continue;
    }

    for (std::size_t lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
      double acc = 0.0;
      for (std::size_t n = 0; n + lag < frame; ++n) acc += x[n] * x[n + lag];
      rho[lag] = acc / energy / window_ac[lag];
    }

    double best_score = -std::numeric_limits<double>::infinity();
    double best_strength = 0.0;
    double best_lag = 0.0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      const double left = rho[lag - 1], mid = rho[lag], right = rho[lag + 1];
      if (mid < left || mid < right || mid <= 0.0) continue;
      const double curvature = left - 2.0 * mid + right;
      double shift = 0.0, peak = mid;
      if (curvature < 0.0) {
        shift = 0.5 * (left - right) / curvature;
        peak = mid - 0.25 * (left - right) * shift;
      }
      const double refined = static_cast<double>(lag) + shift;
      const double score = peak - cfg.octave_cost * std::log2(cfg.fmin_hz * refined / sample_rate);
      if (score > best_score) {
        best_score = score;
        best_strength = peak;
        best_lag = refined;
      }
    }

    out.strength = std::min(best_strength, 1.0);
    if (best_lag > 0.0 && best_strength >= cfg.voicing_threshold)
      out.f0_hz = std::clamp(sample_rate / best_lag, cfg.fmin_hz, cfg.fmax_hz);
    contour.frames.push_back(out);
  }
  return contour;
}

void write_contour_csv(const std::filesystem::path& path, const PitchContour& contour) {
  std::ofstream out(path);
  if (!out) throw Error("pitch: cannot open " + path.string() + " for writing");
  out << "t,f0\n" << std::setprecision(17);
  for (const auto& f : contour.frames) out << f.t << ',' << (f.voiced() ? f.f0_hz : kUnvoiced) << '\n';
}

PitchContour read_contour_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("pitch: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,f0", 0) != 0)
    throw Error("pitch: " + path.string() + " lacks the `t,f0` header");
  PitchContour contour;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error("pitch: malformed row " + std::to_string(row));
    PitchFrame f;
    try {
      f.t = std::stod(line.substr(0, comma));
      const double f0 = std::stod(line.substr(comma + 1));
      f.f0_hz = f0 > 0.0 ? f0 : kUnvoiced;
    } catch (const std::exception&) {
      throw Error("pitch: malformed row " + std::to_string(row) + " in " + path.string());
    }
    contour.frames.push_back(f);
  }
  if (contour.frames.size() >= 2) contour.hop_s = contour.frames[1].t - contour.frames[0].t;
  return contour;
}

}  // namespace ragaseq
