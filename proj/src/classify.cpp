#include "ragaseq/classify.hpp"

#include <algorithm>
#include <cmath>

#include "ragaseq/sampling.hpp"

namespace ragaseq {

Verdict tally_votes(std::span<const int> votes, int n_classes, double threshold) {
  if (n_classes < 1) throw Error("tally_votes: n_classes must be >= 1");
  Verdict v;
  v.windows = votes.size();
  v.vote_fractions.assign(static_cast<std::size_t>(n_classes), 0.0);
  if (votes.empty()) return v;
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int c : votes) {
    if (c < 0 || c >= n_classes) throw Error("tally_votes: vote for unknown class " + std::to_string(c));
    ++counts[static_cast<std::size_t>(c)];
  }
  const auto total = static_cast<double>(votes.size());
  for (std::size_t c = 0; c < counts.size(); ++c) v.vote_fractions[c] = static_cast<double>(counts[c]) / total;

  const auto top = std::max_element(counts.begin(), counts.end());
  v.majority_fraction = static_cast<double>(*top) / total;
  const bool tied = std::count(counts.begin(), counts.end(), *top) > 1;
  // Compare counts rather than fractions: 6/10 must meet a 0.60 threshold exactly.
  const bool enough = static_cast<double>(*top) >= threshold * total - 1e-9;
  if (!tied && enough) v.label = static_cast<int>(top - counts.begin());
  return v;
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  if (probs.size() == 0) throw Error("argmax: empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i)
    if (probs(i) > probs(best)) best = i;
  return static_cast<int>(best);
}

Eigen::VectorXd combine_log_probs(std::span<const Eigen::VectorXd> member_probs) {
  if (member_probs.empty()) throw Error("ensemble: no members");
  const auto n = member_probs.front().size();
  Eigen::VectorXd log_sum = Eigen::VectorXd::Zero(n);
  for (const auto& p : member_probs) {
    if (p.size() != n) throw Error("ensemble: members disagree on the number of classes");
    log_sum.array() += (p.array() + kProbEpsilon).log();
  }
  log_sum.array() -= log_sum.maxCoeff();
  Eigen::VectorXd out = log_sum.array().exp();
  return out / out.sum();
}

Eigen::VectorXd window_probs(const ModelParams& params, const ModelConfig& cfg, std::span<const int> tokens) {
  return forward_classifier(params, cfg, tokens, Mode::eval).probs.cast<double>();
}

Eigen::VectorXd ensemble_probs(std::span<const Checkpoint> members, std::span<const int> tokens) {
  if (members.size() < 2) throw Error("ensemble: needs at least 2 members");
  std::vector<Eigen::VectorXd> probs;
  probs.reserve(members.size());
  for (const auto& m : members) {
    if (!(m.config == members.front().config)) throw Error("ensemble: members have different model configs");
    probs.push_back(window_probs(m.params, m.config, tokens));
  }
  return combine_log_probs(probs);
}

Verdict classify_recording(const ModelParams& params, const ModelConfig& cfg, const TokenSequence& seq,
                           std::size_t subseq_len) {
  std::vector<int> votes;
  for (const auto& w : split_for_inference(seq, subseq_len)) votes.push_back(argmax(window_probs(params, cfg, w.ids)));
  return tally_votes(votes, cfg.n_classes);
}

Verdict classify_recording(std::span<const Checkpoint> members, const TokenSequence& seq, std::size_t subseq_len) {
  if (members.empty()) throw Error("ensemble: no members");
  std::vector<int> votes;
  for (const auto& w : split_for_inference(seq, subseq_len)) votes.push_back(argmax(ensemble_probs(members, w.ids)));
  return tally_votes(votes, members.front().config.n_classes);
}

}  // namespace ragaseq
