#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ragaseq/error.hpp"
#include "ragaseq/tokenize.hpp"

namespace ragaseq {

struct SamplerConfig {
  std::size_t subseq_len = 5000;
  std::optional<std::size_t> num_samples;
  std::uint64_t seed = 0;
};

/// ceil(2.2 · max_len / subseq_len), evaluated exactly in integers.
std::size_t compute_num_samples(std::size_t max_len, std::size_t subseq_len);

/// `count` random slices of exactly `subseq_len` ids. The start index is uniform over
/// [0, len − subseq_len]; shorter sources are returned whole, left-padded with PAD.
std::vector<TokenSequence> sample_subsequences(const TokenSequence& seq, std::size_t subseq_len,
                                               std::size_t count, Rng& rng);

/// Consecutive non-overlapping windows. A trailing remainder is kept, left-padded,
/// only when it spans at least half a window.
std::vector<TokenSequence> split_for_inference(const TokenSequence& seq, std::size_t subseq_len);

/// Left-pads (or keeps) `ids` to exactly `len`; longer inputs keep their last `len` ids.
std::vector<int> left_pad(std::vector<int> ids, std::size_t len);

}  // namespace ragaseq
