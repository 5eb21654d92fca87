#include "ragaseq/rank.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ragaseq {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

void RankerConfig::validate() const {
  if (embedding_dim < 1) throw Error("ranker: embedding_dim must be >= 1");
  if (!(margin >= 0.0)) throw Error("ranker: margin must be >= 0");
  if (triplets_per_step < 1) throw Error("ranker: triplets_per_step must be >= 1");
}

Ranker adapt_classifier(const ModelConfig& classifier_cfg, const ModelParams& classifier, const RankerConfig& cfg,
                        Rng& rng) {
  cfg.validate();
  if (classifier_cfg.embedding_head) throw Error("adapt_classifier: model already has an embedding head");
  classifier.check_shapes(classifier_cfg);
  Ranker r{classifier_cfg, classifier};
  r.config.embedding_head = true;
  r.config.embedding_dim = cfg.embedding_dim;
  const int d1 = classifier_cfg.dense1_units;
  const float bound = 1.0f / std::sqrt(static_cast<float>(d1));
  std::uniform_real_distribution<float> u(-bound, bound);
  r.params.dense2_kernel.resize(d1, cfg.embedding_dim);
  for (Eigen::Index i = 0; i < r.params.dense2_kernel.size(); ++i) r.params.dense2_kernel.data()[i] = u(rng);
  r.params.dense2_bias = Tensor<float>::Zero(cfg.embedding_dim, 1);
  r.params.check_shapes(r.config);
  return r;
}

// ---------------------------------------------------------------------------

SubsequencePool::SubsequencePool(std::vector<TokenSequence> items) : items_(std::move(items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const int raga = items_[i].raga;
    if (raga < 0) throw Error("subsequence pool: item from '" + items_[i].source_id + "' has no raga label");
    auto it = std::lower_bound(ragas_.begin(), ragas_.end(), raga);
    const auto pos = static_cast<std::size_t>(it - ragas_.begin());
    if (it == ragas_.end() || *it != raga) {
      ragas_.insert(it, raga);
      members_.insert(members_.begin() + static_cast<std::ptrdiff_t>(pos), std::vector<std::size_t>{});
    }
    members_[pos].push_back(i);
  }
}

const std::vector<std::size_t>& SubsequencePool::members(int raga) const {
  const auto it = std::lower_bound(ragas_.begin(), ragas_.end(), raga);
  if (it == ragas_.end() || *it != raga) throw Error("subsequence pool: no subsequences of raga " + std::to_string(raga));
  return members_[static_cast<std::size_t>(it - ragas_.begin())];
}

void SubsequencePool::require_triplet_ready() const {
  if (ragas_.size() < 2) throw Error("triplets need subsequences from at least 2 ragas");
  for (std::size_t r = 0; r < ragas_.size(); ++r)
    if (members_[r].size() < 2)
      throw Error("triplets need at least 2 subsequences of raga " + std::to_string(ragas_[r]));
}

Triplet sample_triplet(const SubsequencePool& pool, Rng& rng) {
  pool.require_triplet_ready();
  const auto& ragas = pool.ragas();
  auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  const std::size_t r = pick(ragas.size());
  const auto& same = pool.members(ragas[r]);
  Triplet t;
  const std::size_t a = pick(same.size());
  std::size_t b = pick(same.size() - 1);
  if (b >= a) ++b;
  t.ref = same[a];
  t.pos = same[b];

  std::size_t other = pick(ragas.size() - 1);
  if (other >= r) ++other;
  const auto& diff = pool.members(ragas[other]);
  t.neg = diff[pick(diff.size())];
  return t;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kChunk = 32;

Tensor<float> eval_columns(const Ranker& ranker, std::span<const TokenSequence> seqs, bool features) {
  const Eigen::Index rows = features ? ranker.config.dense1_units : ranker.config.embedding_dim;
  Tensor<float> out(rows, static_cast<Eigen::Index>(seqs.size()));
  std::vector<std::vector<int>> tokens;
  for (std::size_t start = 0; start < seqs.size(); start += kChunk) {
    const auto end = std::min(seqs.size(), start + kChunk);
    tokens.clear();
    for (std::size_t i = start; i < end; ++i) tokens.push_back(seqs[i].ids);
    const auto trace =
        forward_batch(ranker.params, ranker.config, std::span<const std::vector<int>>(tokens), ForwardOptions{});
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) =
        features ? trace.dense1_out : trace.output;
  }
  return out;
}

}  // namespace

Tensor<float> frozen_features(const Ranker& ranker, const SubsequencePool& pool) {
  return eval_columns(ranker, pool.items(), true);
}

double triplet_batch_loss(const LinearParams& head, const Tensor<float>& features, std::span<const Triplet> triplets,
                          double margin, double dropout, Rng* dropout_rng, LinearParams* grads) {
  if (triplets.empty()) throw Error("triplet_batch_loss: empty batch");
  const auto d1 = features.rows();
  const auto dim = head.kernel.cols();
  if (grads) {
    grads->kernel = Tensor<float>::Zero(d1, dim);
    grads->bias = Tensor<float>::Zero(dim, 1);
  }
  std::bernoulli_distribution keep(1.0 - dropout);
  const float scale = dropout > 0.0 ? static_cast<float>(1.0 / (1.0 - dropout)) : 1.0f;

  auto input = [&](std::size_t col) {
    Eigen::VectorXf x = features.col(static_cast<Eigen::Index>(col));
    if (dropout_rng && dropout > 0.0)
      for (Eigen::Index i = 0; i < d1; ++i) x(i) = keep(*dropout_rng) ? x(i) * scale : 0.0f;
    return x;
  };

  double total = 0.0;
  Eigen::VectorXf dr(dim), dp(dim), dn(dim);
  for (const auto& t : triplets) {
    const Eigen::VectorXf xr = input(t.ref), xp = input(t.pos), xn = input(t.neg);
    const Eigen::VectorXf er = head.kernel.transpose() * xr + head.bias.col(0);
    const Eigen::VectorXf ep = head.kernel.transpose() * xp + head.bias.col(0);
    const Eigen::VectorXf en = head.kernel.transpose() * xn + head.bias.col(0);
    total += triplet_loss_grad<float>(er, ep, en, margin, dr, dp, dn);
    if (grads) {
      grads->kernel.noalias() += xr * dr.transpose() + xp * dp.transpose() + xn * dn.transpose();
      grads->bias.col(0) += dr + dp + dn;
    }
  }
  const auto n = static_cast<double>(triplets.size());
  if (grads) {
    grads->kernel /= static_cast<float>(n);
    grads->bias /= static_cast<float>(n);
  }
  return total / n;
}

FinetuneResult finetune_ranker(Ranker ranker, const SubsequencePool& pool, const RankerConfig& cfg,
                               const TrainConfig& train) {
  cfg.validate();
  pool.require_triplet_ready();
  if (!ranker.config.embedding_head) throw Error("finetune_ranker: model has no embedding head");
  const auto features = frozen_features(ranker, pool);

  LinearParams head{ranker.params.dense2_kernel, ranker.params.dense2_bias};
  auto moments = AdamMoments<LinearParams>::zeros_like(head);
  Rng rng(mix_seed(train.seed, 0x7219ULL));
  FinetuneResult result{std::move(ranker), {}};
  result.step_losses.reserve(cfg.steps);
  std::vector<Triplet> batch(cfg.triplets_per_step);
  LinearParams grads;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    for (auto& t : batch) t = sample_triplet(pool, rng);
    const double loss =
        triplet_batch_loss(head, features, batch, cfg.margin, result.ranker.config.dropout_rate, &rng, &grads);
    if (!std::isfinite(loss)) throw Error("finetune_ranker: loss is not finite at step " + std::to_string(step));
    result.step_losses.push_back(loss);
    adam_step(head, grads, moments, static_cast<long>(step), train);
  }
  result.ranker.params.dense2_kernel = std::move(head.kernel);
  result.ranker.params.dense2_bias = std::move(head.bias);
  return result;
}

Eigen::VectorXf embed(const Ranker& ranker, std::span<const int> tokens) {
  if (!ranker.config.embedding_head) throw Error("embed: model has no embedding head");
  const std::vector<std::vector<int>> batch{std::vector<int>(tokens.begin(), tokens.end())};
  return forward_batch(ranker.params, ranker.config, std::span<const std::vector<int>>(batch), ForwardOptions{})
      .output.col(0);
}

Tensor<float> embed_all(const Ranker& ranker, std::span<const TokenSequence> seqs) {
  if (!ranker.config.embedding_head) throw Error("embed: model has no embedding head");
  return eval_columns(ranker, seqs, false);
}

// ---------------------------------------------------------------------------

Eigen::Map<const Eigen::VectorXf> EmbeddingIndex::vector(std::size_t i) const {
  if (i >= entries_.size()) throw Error("embedding index: row " + std::to_string(i) + " out of range");
  return {data_.data() + i * static_cast<std::size_t>(dim_), dim_};
}

void EmbeddingIndex::add(std::span<const float> embedding, IndexEntry entry) {
  if (dim_ == 0) dim_ = static_cast<int>(embedding.size());
  if (embedding.size() != static_cast<std::size_t>(dim_))
    throw Error("embedding index: expected dimension " + std::to_string(dim_) + ", got " +
                std::to_string(embedding.size()));
  data_.insert(data_.end(), embedding.begin(), embedding.end());
  entries_.push_back(std::move(entry));
}

void EmbeddingIndex::save(const std::filesystem::path& path) const {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("embedding index: cannot open " + path.string() + " for writing");
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(dim_), static_cast<std::uint32_t>(entries_.size())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(float)));
    if (!out) throw Error("embedding index: write to " + path.string() + " failed");
  }
  std::ofstream csv(path.string() + ".csv");
  if (!csv) throw Error("embedding index: cannot write sidecar for " + path.string());
  csv << "row,source_id,raga,offset\n";
  for (std::size_t i = 0; i < entries_.size(); ++i)
    csv << i << ',' << entries_[i].source_id << ',' << entries_[i].raga << ',' << entries_[i].offset << '\n';
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("embedding index: cannot open " + path.string());
  std::uint32_t header[2];
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header)))
    throw Error("embedding index: " + path.string() + " is truncated");
  EmbeddingIndex idx(static_cast<int>(header[0]));
  const std::size_t count = header[1];
  idx.data_.resize(count * header[0]);
  if (!in.read(reinterpret_cast<char*>(idx.data_.data()), static_cast<std::streamsize>(idx.data_.size() * sizeof(float))))
    throw Error("embedding index: " + path.string() + " is truncated");
  if (in.peek() != std::char_traits<char>::eof())
    throw Error("embedding index: " + path.string() + " has trailing bytes");

  std::ifstream csv(path.string() + ".csv");
  if (!csv) throw Error("embedding index: missing sidecar " + path.string() + ".csv");
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string row, id, raga, offset;
    if (!std::getline(ss, row, ',') || !std::getline(ss, id, ',') || !std::getline(ss, raga, ',') ||
        !std::getline(ss, offset))
      throw Error("embedding index: malformed sidecar row '" + line + "'");
    idx.entries_.push_back({id, std::stoi(raga), static_cast<std::size_t>(std::stoull(offset))});
  }
  if (idx.entries_.size() != count)
    throw Error("embedding index: sidecar lists " + std::to_string(idx.entries_.size()) + " rows, data has " +
                std::to_string(count));
  return idx;
}

QueryResult query_top_k(const EmbeddingIndex& index, std::span<const float> query, std::size_t k,
                        std::optional<std::size_t> exclude) {
  if (k < 1) throw Error("query: k must be >= 1");
  if (query.size() != static_cast<std::size_t>(index.dim()))
    throw Error("query: embedding has dimension " + std::to_string(query.size()) + ", index has " +
                std::to_string(index.dim()));
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXf>(query.data(), index.dim()).cast<double>();
  std::vector<Hit> all;
  all.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({i, (index.vector(i).cast<double>() - q).norm()});
  }
  QueryResult r;
  r.truncated = all.size() < k;
  const auto take = std::min(k, all.size());
  std::stable_sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) { return a.distance < b.distance; });
  all.resize(take);
  r.hits = std::move(all);
  return r;
}

}  // namespace ragaseq
