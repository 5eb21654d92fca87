#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ragaseq/nnet.hpp"
#include "ragaseq/tokenize.hpp"
#include "ragaseq/train.hpp"

namespace ragaseq {

struct RankerConfig {
  int embedding_dim = 600;
  double margin = 1.0;
  std::size_t triplets_per_step = 40;
  std::size_t steps = 1000;

  void validate() const;
};

/// A classifier whose final layer maps into an embedding space.
struct Ranker {
  ModelConfig config;  // embedding_head = true
  ModelParams params;
};

/// Copies every layer of a trained classifier and swaps the class layer for a fresh
/// D1 × embedding_dim projection. Only that projection is trained afterwards.
Ranker adapt_classifier(const ModelConfig& classifier_cfg, const ModelParams& classifier, const RankerConfig& cfg,
                        Rng& rng);

/// Labelled subsequences grouped by raga for triplet sampling.
class SubsequencePool {
public:
  explicit SubsequencePool(std::vector<TokenSequence> items);

  std::size_t size() const { return items_.size(); }
  const TokenSequence& at(std::size_t i) const { return items_.at(i); }
  const std::vector<TokenSequence>& items() const { return items_; }
  /// Ragas present, ascending.
  const std::vector<int>& ragas() const { return ragas_; }
  /// Pool indices of one raga's subsequences.
  const std::vector<std::size_t>& members(int raga) const;

  /// Triplets need two ragas and at least two subsequences of every raga.
  void require_triplet_ready() const;

private:
  std::vector<TokenSequence> items_;
  std::vector<int> ragas_;
  std::vector<std::vector<std::size_t>> members_;  // parallel to ragas_
};

struct Triplet {
  std::size_t ref = 0, pos = 0, neg = 0;
};

/// Uniform raga, uniform reference within it, a different uniform positive from the
/// same raga, a uniform other raga and a uniform negative from it.
Triplet sample_triplet(const SubsequencePool& pool, Rng& rng);

/// Eval-mode dense1 activations (before dropout) for every pool item, D1 × N.
Tensor<float> frozen_features(const Ranker& ranker, const SubsequencePool& pool);

/// Mean hinge loss of `triplets` given cached features. With `dropout_rng` set, each
/// feature column gets a fresh inverted-dropout mask first; `grads` (optional)
/// receives the gradient with respect to the final projection.
double triplet_batch_loss(const LinearParams& head, const Tensor<float>& features, std::span<const Triplet> triplets,
                          double margin, double dropout, Rng* dropout_rng, LinearParams* grads);

struct FinetuneResult {
  Ranker ranker;
  std::vector<double> step_losses;
};

/// Adam on the projection only; the lower layers stay at their classifier values.
/// Uses the learning rate, Adam constants and seed of `train`.
FinetuneResult finetune_ranker(Ranker ranker, const SubsequencePool& pool, const RankerConfig& cfg,
                               const TrainConfig& train);

/// Eval-mode embedding of one token sequence.
Eigen::VectorXf embed(const Ranker& ranker, std::span<const int> tokens);

/// Embeddings of many sequences, one column each.
Tensor<float> embed_all(const Ranker& ranker, std::span<const TokenSequence> seqs);

struct IndexEntry {
  std::string source_id;
  int raga = -1;
  std::size_t offset = 0;
};

/// Flat store of embeddings with their provenance. Saved as `<path>` (little-endian
/// u32 dim, u32 count, float32 data) and `<path>.csv` (`row,source_id,raga,offset`).
class EmbeddingIndex {
public:
  explicit EmbeddingIndex(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const IndexEntry& entry(std::size_t i) const { return entries_.at(i); }
  Eigen::Map<const Eigen::VectorXf> vector(std::size_t i) const;

  void add(std::span<const float> embedding, IndexEntry entry);

  void save(const std::filesystem::path& path) const;
  static EmbeddingIndex load(const std::filesystem::path& path);

private:
  int dim_;
  std::vector<float> data_;
  std::vector<IndexEntry> entries_;
};

struct Hit {
  std::size_t row = 0;
  double distance = 0.0;
};

struct QueryResult {
  std::vector<Hit> hits;
  /// Fewer than k hits were available.
  bool truncated = false;
};

/// The k nearest entries by Euclidean distance; equal distances keep insertion order.
/// `exclude` drops one row, typically the query's own entry.
QueryResult query_top_k(const EmbeddingIndex& index, std::span<const float> query, std::size_t k,
                        std::optional<std::size_t> exclude = std::nullopt);

}  // namespace ragaseq
