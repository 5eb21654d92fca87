#include "ragaseq/tokenize.hpp"

#include <cmath>
#include <string>

#include "ragaseq/error.hpp"

namespace ragaseq {

double normalize_cents(double f_hz, double tonic_hz) {
  if (!(f_hz > 0.0)) throw Error("normalize_cents: frequency must be positive, got " + std::to_string(f_hz));
  if (!(tonic_hz > 0.0)) throw Error("normalize_cents: tonic must be positive, got " + std::to_string(tonic_hz));
  return 1200.0 * std::log2(f_hz / tonic_hz);
}

int quantize(double f_hz, double tonic_hz, int k) {
  if (k < 1) throw Error("quantize: k must be >= 1");
  // std::lround rounds halfway cases away from zero.
  return static_cast<int>(std::lround(normalize_cents(f_hz, tonic_hz) * (k / 100.0)));
}

void QuantizerConfig::validate() const {
  if (k < 1) throw Error("quantizer: k must be >= 1");
  if (clamp_octaves < 1) throw Error("quantizer: clamp_octaves must be >= 1");
}

Vocabulary::Vocabulary(const QuantizerConfig& cfg)
    : k_(cfg.k), clamp_octaves_(cfg.clamp_octaves), range_(12 * cfg.k * cfg.clamp_octaves) {
  cfg.validate();
}

std::optional<int> Vocabulary::value_of(int id) const {
  if (id < 2 || id >= size()) return std::nullopt;
  return id - range_ - 2;
}

std::vector<int> quantize_contour(const PitchContour& contour, double tonic_hz, int k) {
  std::vector<int> values;
  values.reserve(contour.frames.size());
  for (const auto& frame : contour.frames)
    if (frame.voiced()) values.push_back(quantize(frame.f0_hz, tonic_hz, k));
  return values;
}

TokenSequence tokenize_contour(const PitchContour& contour, double tonic_hz, const QuantizerConfig& cfg,
                               const Vocabulary& vocab) {
  cfg.validate();
  if (!vocab.consistent_with(cfg)) throw Error("tokenize: vocabulary does not match quantizer config");
  if (!(tonic_hz > 0.0)) throw Error("tokenize: tonic must be positive");
  TokenSequence seq;
  seq.ids.reserve(contour.frames.size());
  for (const auto& frame : contour.frames) {
    if (frame.voiced())
      seq.ids.push_back(vocab.id_of(quantize(frame.f0_hz, tonic_hz, cfg.k)));
    else if (cfg.rest_token)
      seq.ids.push_back(Vocabulary::kOov);
  }
  return seq;
}

std::vector<int> values_to_ids(std::span<const int> values, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(values.size());
  for (int v : values) ids.push_back(vocab.id_of(v));
  return ids;
}

}  // namespace ragaseq
