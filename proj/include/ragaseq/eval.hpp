#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragaseq/classify.hpp"
#include "ragaseq/corpus.hpp"
#include "ragaseq/rank.hpp"
#include "ragaseq/train.hpp"

namespace ragaseq {

struct Fold {
  std::string name;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Throws unless the fold's train and test ids are disjoint, known and non-empty.
void validate_fold(const Fold& fold, const Dataset& dataset);

/// Leave-one-out per class: a balanced dataset with n recordings per raga yields n
/// folds, fold i holding out the i-th recording (by id) of every raga.
std::vector<Fold> loocv_splits(const Dataset& dataset);

/// k folds, each class's recordings shuffled then dealt round-robin.
std::vector<Fold> stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed);

/// Holds out `test_per_class` random recordings of every raga.
Fold holdout_split(const Dataset& dataset, std::size_t test_per_class, std::uint64_t seed);

/// Rows are true classes, columns predictions, plus an abstention column.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(int n_classes = 0);

  void add(int truth, std::optional<int> predicted);
  void merge(const ConfusionMatrix& other);

  int n_classes() const { return n_; }
  std::size_t count(int truth, int predicted) const;
  std::size_t abstained(int truth) const;
  std::size_t total() const;
  std::size_t correct() const;
  /// Correct over total; abstentions count as wrong.
  double accuracy() const;

  /// CSV with a header `true\pred,<labels...>,ABSTAIN`.
  void write_csv(const std::filesystem::path& path, std::span<const std::string> labels) const;

private:
  int n_;
  std::vector<std::size_t> cells_;  // n × (n + 1)
};

/// Share of the first k retrieved labels equal to `query_label`. Throws when fewer
/// than k labels were retrieved.
double precision_at_k(std::span<const int> retrieved_labels, int query_label, std::size_t k);

/// Mean of per-query precisions; throws on an empty list.
double average_precision(std::span<const double> per_query);

struct RetrievalScores {
  std::vector<std::size_t> ks;
  std::vector<double> mean_precision;  // parallel to ks
  std::size_t queries = 0;
};

/// Embeds every item, then queries each against the others (its own entry excluded).
RetrievalScores evaluate_retrieval(const Ranker& ranker, std::span<const TokenSequence> items,
                                   std::span<const std::size_t> ks);

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t subseq_len = 5000;
  std::optional<std::size_t> samples_per_recording;
  std::uint64_t seed = 0;
};

struct RecordingOutcome {
  std::string id;
  int truth = -1;
  Verdict verdict;
};

struct FoldResult {
  std::vector<RecordingOutcome> recordings;
  ConfusionMatrix recording_cm;
  ConfusionMatrix window_cm;
  TrainReport report;
  ModelParams params;
};

/// Samples training subsequences from the fold's training recordings, trains a fresh
/// model and classifies every held-out recording window by window.
FoldResult run_fold(std::span<const TokenSequence> recordings, const Fold& fold, const ExperimentConfig& cfg);

/// Scores an already trained model on the fold's held-out recordings.
FoldResult score_fold(std::span<const TokenSequence> recordings, const Fold& fold, const ModelConfig& model_cfg,
                      const ModelParams& params, std::size_t subseq_len);

struct LengthStudyRow {
  std::size_t subseq_len = 0;
  std::size_t samples_per_recording = 0;
  std::optional<int> epochs_to_threshold;
  int epochs_run = 0;
  double mean_epoch_s = 0.0;
  double train_s = 0.0;
  double holdout_accuracy = 0.0;
};

/// Trains once per length until the epoch loss reaches `loss_threshold` (or the epoch
/// budget runs out) and scores the fold's held-out recordings.
std::vector<LengthStudyRow> run_length_study(std::span<const TokenSequence> recordings, const Fold& fold,
                                             std::span<const std::size_t> lengths, const ExperimentConfig& base,
                                             double loss_threshold);

void write_length_study_csv(const std::filesystem::path& path, std::span<const LengthStudyRow> rows);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for fewer than 2 values
};

MeanStd mean_std(std::span<const double> values);

}  // namespace ragaseq
