#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ragaseq/checkpoint.hpp"
#include "ragaseq/nnet.hpp"
#include "ragaseq/tokenize.hpp"

namespace ragaseq {

/// A recording is only labelled when its majority class holds at least this share of the votes.
inline constexpr double kMajorityThreshold = 0.60;

struct Verdict {
  std::optional<int> label;  // empty means ABSTAIN
  std::vector<double> vote_fractions;
  double majority_fraction = 0.0;
  std::size_t windows = 0;

  bool abstained() const { return !label.has_value(); }
};

/// Majority vote over per-window class votes. Abstains when the leading share is
/// below `threshold` (exactly `threshold` is accepted) or when classes tie for the lead.
Verdict tally_votes(std::span<const int> votes, int n_classes, double threshold = kMajorityThreshold);

/// Index of the largest entry; the lowest index wins ties.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& probs);

/// Normalized exp(Σ_m log(p_m + ε)) over member distributions.
Eigen::VectorXd combine_log_probs(std::span<const Eigen::VectorXd> member_probs);

/// Eval-mode distribution of one window under a single model.
Eigen::VectorXd window_probs(const ModelParams& params, const ModelConfig& cfg, std::span<const int> tokens);

/// Ensemble distribution for one window. Members must share one config.
Eigen::VectorXd ensemble_probs(std::span<const Checkpoint> members, std::span<const int> tokens);

/// Splits the recording into inference windows and votes with each window's argmax.
Verdict classify_recording(const ModelParams& params, const ModelConfig& cfg, const TokenSequence& seq,
                           std::size_t subseq_len);

/// As above with an ensemble deciding each window.
Verdict classify_recording(std::span<const Checkpoint> members, const TokenSequence& seq, std::size_t subseq_len);

}  // namespace ragaseq
