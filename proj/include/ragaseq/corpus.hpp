#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragaseq/error.hpp"

namespace ragaseq {

namespace fs = std::filesystem;

/// One recording: either an audio file or a pre-computed token file, plus its tonic and label.
struct ManifestEntry {
  std::string id;
  std::optional<fs::path> audio_path;
  std::optional<fs::path> token_path;
  double tonic_hz = 0.0;
  std::string raga;
};

/// A validated set of manifest entries with a deterministic label → class index map.
class Dataset {
public:
  Dataset() = default;

  /// Validates every entry and builds the class map from the sorted distinct labels.
  explicit Dataset(std::vector<ManifestEntry> entries);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  const std::map<std::string, int>& class_map() const { return class_map_; }
  std::size_t size() const { return entries_.size(); }
  int num_classes() const { return static_cast<int>(class_map_.size()); }

  int class_of(const ManifestEntry& entry) const;
  int class_of(const std::string& raga) const;
  const std::string& label_of(int class_index) const;

  const ManifestEntry& find(const std::string& id) const;

  /// Entry ids per class, each list sorted by id.
  std::vector<std::vector<std::string>> ids_by_class() const;

  /// True when every raga has the same number of entries.
  bool is_balanced() const;

  /// Restricts the dataset to the given ids, keeping the full class map.
  Dataset subset(std::span<const std::string> ids) const;

private:
  std::vector<ManifestEntry> entries_;
  std::map<std::string, int> class_map_;
  std::vector<std::string> labels_;
};

/// Parses a CSV manifest with header `id,audio_path,token_path,tonic_hz,raga`.
/// Relative paths are resolved against the manifest's directory.
Dataset load_manifest(const fs::path& path);

/// Writes the manifest; paths inside the manifest's directory are stored relative to it.
void save_manifest(const fs::path& path, const Dataset& dataset);

/// Token files hold one signed quantized value per line.
std::vector<int> read_token_file(const fs::path& path);
void write_token_file(const fs::path& path, std::span<const int> values);

struct SynthConfig {
  int n_ragas = 5;
  int recordings_per_raga = 12;
  std::size_t seq_len = 4000;
  std::uint64_t seed = 0;
  bool render_audio = false;
  int k_levels = 5;
  double tonic_hz = 146.83;
  double note_s = 0.120;
  int sample_rate = 16000;
  /// Zero gives every raga its own scale. A positive value makes the ragas allied:
  /// one shared scale and set of allowed moves, with each raga scaling the shared
  /// transition weights by factors drawn from [1 - c, 1 + c].
  double allied_contrast = 0.0;

  void validate(std::size_t min_seq_len = 1) const;
};

/// A synthetic raga: allowed notes (quantized values relative to the tonic) and a
/// first-order transition table between them. A zero weight forbids the move.
struct RagaGrammar {
  std::string name;
  std::vector<int> notes;
  std::vector<std::vector<double>> transitions;
};

/// Rejects empty grammars, ragged or negative tables, and states with no way out.
void validate_grammar(const RagaGrammar& grammar);

/// Builds `cfg.n_ragas` distinct grammars from `cfg.seed`.
std::vector<RagaGrammar> make_raga_grammars(const SynthConfig& cfg);

/// Random walk of `length` notes through the grammar.
std::vector<int> generate_token_values(const RagaGrammar& grammar, std::size_t length, Rng& rng);

/// Renders each value as a sine segment of `note_s` seconds at tonic·2^(value/(12k)).
std::vector<float> render_token_values(std::span<const int> values, double tonic_hz, int k_levels,
                                       double note_s, int sample_rate);

/// Writes token files (and WAVs when `render_audio`) plus `manifest.csv` into `out_dir`.
Dataset generate_synthetic_corpus(const SynthConfig& cfg, const fs::path& out_dir);

}  // namespace ragaseq
