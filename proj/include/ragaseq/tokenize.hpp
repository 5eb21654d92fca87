#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragaseq/error.hpp"
#include "ragaseq/pitch.hpp"

namespace ragaseq {

/// Tonic-relative pitch in cents: 1200·log2(f/T).
double normalize_cents(double f_hz, double tonic_hz);

/// Cents scaled to `k` levels per half step and rounded half away from zero.
int quantize(double f_hz, double tonic_hz, int k);

struct QuantizerConfig {
  int k = 5;
  int clamp_octaves = 2;
  /// Emit the shared OOV/REST id for unvoiced frames instead of dropping them.
  bool rest_token = false;

  void validate() const;
};

/// Maps quantized values in [-12·k·octaves, +12·k·octaves] to ids. Id 0 is PAD,
/// id 1 is OOV (also used as REST when enabled), values follow in ascending order.
class Vocabulary {
public:
  static constexpr int kPad = 0;
  static constexpr int kOov = 1;

  explicit Vocabulary(const QuantizerConfig& cfg = {});

  int size() const { return 2 * range_ + 1 + 2; }
  int range() const { return range_; }
  int k() const { return k_; }
  int clamp_octaves() const { return clamp_octaves_; }

  bool contains_value(int value) const { return value >= -range_ && value <= range_; }
  int id_of(int value) const { return contains_value(value) ? value + range_ + 2 : kOov; }
  std::optional<int> value_of(int id) const;
  bool valid_id(int id) const { return id >= 0 && id < size(); }

  bool consistent_with(const QuantizerConfig& cfg) const {
    return cfg.k == k_ && cfg.clamp_octaves == clamp_octaves_;
  }

private:
  int k_;
  int clamp_octaves_;
  int range_;
};

struct TokenSequence {
  std::vector<int> ids;
  std::string source_id;
  int raga = -1;
  /// Start of this slice within its source; 0 for whole recordings.
  std::size_t offset = 0;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

/// Quantizes every voiced frame; out-of-range values become OOV.
TokenSequence tokenize_contour(const PitchContour& contour, double tonic_hz,
                               const QuantizerConfig& cfg, const Vocabulary& vocab);

/// Pre-vocabulary values (as stored in token files) → ids.
std::vector<int> values_to_ids(std::span<const int> values, const Vocabulary& vocab);

/// Per-frame quantized values of voiced frames, before vocabulary lookup.
std::vector<int> quantize_contour(const PitchContour& contour, double tonic_hz, int k);

}  // namespace ragaseq
