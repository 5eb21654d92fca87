#include "ragaseq/train.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "ragaseq/checkpoint.hpp"

namespace ragaseq {

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error("train: batch_size must be >= 2 (batch normalization)");
  if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be positive");
  if (max_epochs < 0) throw Error("train: max_epochs must be >= 0");
  if (workers < 1) throw Error("train: workers must be >= 1");
  if (staleness_bound < 1) throw Error("train: staleness_bound must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw Error("train: Adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw Error("train: Adam epsilon must be positive");
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("train: cannot open " + path.string() + " for writing");
  out << "epoch,loss,wall_s\n" << std::setprecision(10);
  for (const auto& e : epochs) out << e.epoch << ',' << e.loss << ',' << e.wall_s << '\n';
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    int epoch) {
  if (n < 2) throw Error("train: need at least 2 training examples to form a batch");
  if (batch_size < 2) throw Error("train: batch_size must be >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const auto end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

std::vector<BatchTask> make_schedule(std::size_t n, std::size_t batch_size, std::uint64_t seed, int epochs) {
  std::vector<BatchTask> schedule;
  for (int e = 0; e < epochs; ++e) {
    for (auto& batch : epoch_batches(n, batch_size, seed, e)) {
      const std::size_t ordinal = schedule.size();
      schedule.push_back({ordinal, e, std::move(batch), mix_seed(seed, 0xd0d0000000ULL + ordinal)});
    }
  }
  return schedule;
}

std::vector<BatchTask> reorder_schedule(std::span<const BatchTask> schedule, std::span<const std::size_t> order) {
  std::vector<BatchTask> out;
  out.reserve(order.size());
  for (std::size_t ordinal : order) {
    if (ordinal >= schedule.size()) throw Error("reorder_schedule: ordinal out of range");
    out.push_back(schedule[ordinal]);
  }
  return out;
}

// ---------------------------------------------------------------------------

ClassifierObjective::ClassifierObjective(std::span<const TokenSequence> samples, ModelConfig cfg)
    : samples_(samples), cfg_(cfg) {
  cfg_.validate();
  if (cfg_.embedding_head) throw Error("classifier objective: model has an embedding head");
  for (const auto& s : samples_)
    if (s.raga < 0 || s.raga >= cfg_.n_classes)
      throw Error("classifier objective: sample from '" + s.source_id + "' has label " + std::to_string(s.raga) +
                  " outside [0, " + std::to_string(cfg_.n_classes) + ")");
}

ClassifierObjective::Gradient ClassifierObjective::gradient(const ModelParams& params,
                                                            std::span<const std::size_t> batch,
                                                            std::uint64_t seed) const {
  std::vector<std::vector<int>> tokens;
  std::vector<int> labels;
  tokens.reserve(batch.size());
  for (std::size_t i : batch) {
    tokens.push_back(samples_[i].ids);
    labels.push_back(samples_[i].raga);
  }
  Rng rng(seed);
  const auto trace = forward_batch(params, cfg_, std::span<const std::vector<int>>(tokens), ForwardOptions::from(Mode::train), &rng);
  Tensor<float> d_logits;
  Gradient g;
  g.loss = cce_batch_loss(trace, labels, d_logits);
  g.count = batch.size();
  g.grads = backward(params, cfg_, trace, d_logits);
  g.batch_mean = trace.batch_mean;
  g.batch_var = trace.batch_var;
  return g;
}

void ClassifierObjective::commit(ModelParams& params, const Gradient& g) const {
  commit_batch_stats(params, g.batch_mean, g.batch_var);
}

double ClassifierObjective::mean_loss(const ModelParams& params) const {
  double total = 0.0;
  for (const auto& s : samples_) {
    const auto out = forward_classifier(params, cfg_, s.ids, Mode::eval);
    total += -std::log(static_cast<double>(out.probs(s.raga)) + kProbEpsilon);
  }
  return samples_.empty() ? 0.0 : total / static_cast<double>(samples_.size());
}

// ---------------------------------------------------------------------------

SoftmaxRegressionObjective::SoftmaxRegressionObjective(Tensor<float> features, std::vector<int> labels, int n_classes)
    : features_(std::move(features)), labels_(std::move(labels)), n_classes_(n_classes) {
  if (features_.cols() != static_cast<Eigen::Index>(labels_.size()))
    throw Error("softmax regression: feature/label count mismatch");
  for (int y : labels_)
    if (y < 0 || y >= n_classes_) throw Error("softmax regression: label out of range");
}

SoftmaxRegressionObjective SoftmaxRegressionObjective::toy(std::size_t n, int dims, int n_classes, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<double> centres(dims, n_classes);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = 1.5 * normal(rng);
  Tensor<float> x(dims, static_cast<Eigen::Index>(n));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % static_cast<std::size_t>(n_classes));
    for (int d = 0; d < dims; ++d)
      x(d, static_cast<Eigen::Index>(i)) = static_cast<float>(centres(d, y[i]) + normal(rng));
  }
  return {std::move(x), std::move(y), n_classes};
}

LinearParams SoftmaxRegressionObjective::zeros() const {
  return {Tensor<float>::Zero(features_.rows(), n_classes_), Tensor<float>::Zero(n_classes_, 1)};
}

SoftmaxRegressionObjective::Gradient SoftmaxRegressionObjective::gradient(const LinearParams& p,
                                                                          std::span<const std::size_t> batch,
                                                                          std::uint64_t) const {
  Gradient g{0.0, batch.size(), zeros()};
  Eigen::VectorXf logits(n_classes_);
  for (std::size_t i : batch) {
    const auto x = features_.col(static_cast<Eigen::Index>(i));
    logits = p.kernel.transpose() * x + p.bias.col(0);
    logits.array() -= logits.maxCoeff();
    Eigen::VectorXf probs = logits.array().exp();
    probs /= probs.sum();
    g.loss += -std::log(static_cast<double>(probs(labels_[i])) + kProbEpsilon);
    probs(labels_[i]) -= 1.0f;
    g.grads.kernel.noalias() += x * probs.transpose();
    g.grads.bias.col(0) += probs;
  }
  const auto n = static_cast<float>(batch.size());
  g.loss /= static_cast<double>(batch.size());
  g.grads.kernel /= n;
  g.grads.bias /= n;
  return g;
}

double SoftmaxRegressionObjective::mean_loss(const LinearParams& p) const {
  std::vector<std::size_t> all(size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gradient(p, all, 0).loss;
}

// ---------------------------------------------------------------------------

TrainResult<ModelParams> train_classifier(std::span<const TokenSequence> samples, const TrainConfig& cfg,
                                          const ModelConfig& model_cfg) {
  cfg.validate();
  ClassifierObjective objective(samples, model_cfg);
  Rng init_rng(mix_seed(cfg.seed, 0x1417ULL));
  auto params = ModelParams::initialize(model_cfg, init_rng);

  double best = std::numeric_limits<double>::infinity();
  EpochCallback<ModelParams> on_epoch;
  if (cfg.checkpoint_path) {
    on_epoch = [&](const EpochRecord& rec, const ModelParams& p) {
      if (rec.loss < best) {
        best = rec.loss;
        save_checkpoint(*cfg.checkpoint_path, model_cfg, p);
      }
    };
  }
  if (cfg.workers > 1) return train_async(objective, std::move(params), cfg, on_epoch);
  return train_sequential(objective, std::move(params), cfg, on_epoch);
}

}  // namespace ragaseq
