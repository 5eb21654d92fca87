#include "ragaseq/pipeline.hpp"

#include <algorithm>
#include <unordered_map>

#include "ragaseq/sampling.hpp"
#include "ragaseq/train.hpp"
#include "ragaseq/wav.hpp"

namespace ragaseq {

TokenSequence load_recording(const ManifestEntry& entry, int raga, const FrontEndConfig& cfg) {
  const Vocabulary vocab(cfg.quantizer);
  TokenSequence seq;
  if (entry.token_path) {
    seq.ids = values_to_ids(read_token_file(*entry.token_path), vocab);
  } else if (entry.audio_path) {
    const auto audio = read_wav(*entry.audio_path);
    const auto contour = track_pitch(audio.samples, audio.sample_rate, cfg.pitch);
    seq = tokenize_contour(contour, entry.tonic_hz, cfg.quantizer, vocab);
  } else {
    throw Error("recording '" + entry.id + "' has neither audio nor tokens");
  }
  if (seq.empty()) throw Error("recording '" + entry.id + "' produced no tokens");
  seq.source_id = entry.id;
  seq.raga = raga;
  return seq;
}

std::vector<TokenSequence> load_recordings(const Dataset& dataset, const FrontEndConfig& cfg) {
  std::vector<TokenSequence> out;
  out.reserve(dataset.size());
  for (const auto& e : dataset.entries()) out.push_back(load_recording(e, dataset.class_of(e), cfg));
  return out;
}

std::vector<TokenSequence> select_recordings(std::span<const TokenSequence> recordings,
                                             std::span<const std::string> ids) {
  std::unordered_map<std::string, const TokenSequence*> by_id;
  for (const auto& r : recordings) by_id.emplace(r.source_id, &r);
  std::vector<TokenSequence> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error("no recording with id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::vector<TokenSequence> sample_training_set(std::span<const TokenSequence> recordings, std::size_t subseq_len,
                                               std::optional<std::size_t> per_recording, std::uint64_t seed) {
  if (recordings.empty()) throw Error("sample_training_set: no recordings");
  std::size_t longest = 0;
  for (const auto& r : recordings) longest = std::max(longest, r.size());
  const std::size_t count = per_recording.value_or(compute_num_samples(longest, subseq_len));
  std::vector<TokenSequence> out;
  out.reserve(count * recordings.size());
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    Rng rng(mix_seed(seed, 0xa11ce000ULL + i));
    for (auto& s : sample_subsequences(recordings[i], subseq_len, count, rng)) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ragaseq
