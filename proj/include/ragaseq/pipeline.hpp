#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragaseq/corpus.hpp"
#include "ragaseq/pitch.hpp"
#include "ragaseq/tokenize.hpp"

namespace ragaseq {

/// Audio → contour → tokens settings shared by every stage that reads recordings.
struct FrontEndConfig {
  PitchConfig pitch;
  QuantizerConfig quantizer;
};

/// Tokenizes one manifest entry. Token files are mapped through the vocabulary;
/// audio is pitch-tracked and quantized against the entry's tonic.
TokenSequence load_recording(const ManifestEntry& entry, int raga, const FrontEndConfig& cfg);

/// Every entry of the dataset, in manifest order.
std::vector<TokenSequence> load_recordings(const Dataset& dataset, const FrontEndConfig& cfg);

/// The recordings whose source ids are listed, in the order given.
std::vector<TokenSequence> select_recordings(std::span<const TokenSequence> recordings,
                                             std::span<const std::string> ids);

/// Random training subsequences from each recording. Without an explicit count each
/// recording contributes ceil(2.2 · L_max / L_r) slices, L_max being the longest recording.
std::vector<TokenSequence> sample_training_set(std::span<const TokenSequence> recordings, std::size_t subseq_len,
                                               std::optional<std::size_t> per_recording, std::uint64_t seed);

}  // namespace ragaseq
