#include "ragaseq/sampling.hpp"

#include <string>

#include "ragaseq/tokenize.hpp"

namespace ragaseq {

std::size_t compute_num_samples(std::size_t max_len, std::size_t subseq_len) {
  if (max_len < 1 || subseq_len < 1) throw Error("compute_num_samples: lengths must be >= 1");
  // ceil(2.2·L / Lr) == ceil(22·L / (10·Lr)); integer form avoids 2.2's binary error.
  const std::size_t num = 22 * max_len;
  const std::size_t den = 10 * subseq_len;
  return (num + den - 1) / den;
}

std::vector<int> left_pad(std::vector<int> ids, std::size_t len) {
  if (ids.size() >= len) return std::vector<int>(ids.end() - static_cast<std::ptrdiff_t>(len), ids.end());
  std::vector<int> out(len - ids.size(), Vocabulary::kPad);
  out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

std::vector<TokenSequence> sample_subsequences(const TokenSequence& seq, std::size_t subseq_len,
                                               std::size_t count, Rng& rng) {
  if (seq.empty()) throw Error("sample_subsequences: empty sequence " + seq.source_id);
  if (subseq_len < 1) throw Error("sample_subsequences: subsequence length must be >= 1");
  if (count < 1) throw Error("sample_subsequences: count must be >= 1");
  std::vector<TokenSequence> out;
  out.reserve(count);
  if (seq.size() < subseq_len) {
    const auto padded = left_pad(seq.ids, subseq_len);
    for (std::size_t i = 0; i < count; ++i) out.push_back({padded, seq.source_id, seq.raga, 0});
    return out;
  }
  std::uniform_int_distribution<std::size_t> start(0, seq.size() - subseq_len);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t s = start(rng);
    const auto first = seq.ids.begin() + static_cast<std::ptrdiff_t>(s);
    out.push_back({std::vector<int>(first, first + static_cast<std::ptrdiff_t>(subseq_len)), seq.source_id,
                   seq.raga, s});
  }
  return out;
}

std::vector<TokenSequence> split_for_inference(const TokenSequence& seq, std::size_t subseq_len) {
  if (seq.empty()) throw Error("split_for_inference: empty sequence " + seq.source_id);
  if (subseq_len < 1) throw Error("split_for_inference: subsequence length must be >= 1");
  std::vector<TokenSequence> out;
  std::size_t start = 0;
  for (; start + subseq_len <= seq.size(); start += subseq_len) {
    const auto first = seq.ids.begin() + static_cast<std::ptrdiff_t>(start);
    out.push_back({std::vector<int>(first, first + static_cast<std::ptrdiff_t>(subseq_len)), seq.source_id,
                   seq.raga, start});
  }
  const std::size_t rest = seq.size() - start;
  // rest >= subseq_len / 2, without truncating odd lengths
  // A recording shorter than half a window still yields its one padded window.
  if (rest > 0 && (2 * rest >= subseq_len || out.empty())) {
    std::vector<int> tail(seq.ids.begin() + static_cast<std::ptrdiff_t>(start), seq.ids.end());
    out.push_back({left_pad(std::move(tail), subseq_len), seq.source_id, seq.raga, start});
  }
  return out;
}

}  // namespace ragaseq
