#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ragaseq/nnet.hpp"
#include "ragaseq/tokenize.hpp"

namespace ragaseq {

struct TrainConfig {
  std::size_t batch_size = 40;
  double learning_rate = 1e-4;
  int max_epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int workers = 1;
  int staleness_bound = 8;
  std::uint64_t seed = 0;
  /// Epoch loss at or below which training counts as converged.
  std::optional<double> loss_threshold;
  bool stop_at_threshold = false;
  /// Written whenever an epoch reaches a new best loss.
  std::optional<std::filesystem::path> checkpoint_path;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double wall_s = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<int> epochs_to_threshold;
  std::size_t submitted = 0;
  std::size_t applied = 0;
  std::size_t discarded = 0;
  /// Schedule ordinals of the batches in the order their updates were applied.
  std::vector<std::size_t> applied_order;

  /// CSV `epoch,loss,wall_s`.
  void write_csv(const std::filesystem::path& path) const;
};

/// First and second moment estimates, shaped like the parameters.
template <class P>
struct AdamMoments {
  P first;
  P second;

  static AdamMoments zeros_like(const P& params) {
    AdamMoments m{params, params};
    for (auto t : m.first.trainable()) t.value->setZero();
    for (auto t : m.second.trainable()) t.value->setZero();
    return m;
  }
};

/// One bias-corrected Adam update at step `t` (1-based) over every trainable tensor.
/// A non-finite gradient aborts before anything is modified.
template <class P>
void adam_step(P& params, const P& grads, AdamMoments<P>& moments, long t, const TrainConfig& cfg) {
  if (t < 1) throw Error("adam: step index must be >= 1");
  auto p = params.trainable();
  auto g = grads.trainable();
  auto m = moments.first.trainable();
  auto v = moments.second.trainable();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw Error("adam: parameter and gradient sets are not aligned");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i].value->rows() != p[i].value->rows() || g[i].value->cols() != p[i].value->cols())
      throw Error("adam: gradient shape mismatch for tensor " + std::string(p[i].name));
    if (!g[i].value->allFinite()) throw Error("adam: non-finite gradient in tensor " + std::string(g[i].name));
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& pv = *p[i].value;
    const auto& gv = *g[i].value;
    auto& mv = *m[i].value;
    auto& vv = *v[i].value;
    using S = typename std::remove_reference_t<decltype(pv)>::Scalar;
    for (Eigen::Index k = 0; k < pv.size(); ++k) {
      const double grad = static_cast<double>(gv.data()[k]);
      const double m1 = cfg.beta1 * static_cast<double>(mv.data()[k]) + (1.0 - cfg.beta1) * grad;
      const double m2 = cfg.beta2 * static_cast<double>(vv.data()[k]) + (1.0 - cfg.beta2) * grad * grad;
      mv.data()[k] = static_cast<S>(m1);
      vv.data()[k] = static_cast<S>(m2);
      const double step = cfg.learning_rate * (m1 / c1) / (std::sqrt(m2 / c2) + cfg.epsilon);
      pv.data()[k] = static_cast<S>(static_cast<double>(pv.data()[k]) - step);
    }
  }
}

/// A mini-batch with a fixed position in the training schedule.
struct BatchTask {
  std::size_t ordinal = 0;
  int epoch = 0;  // 0-based
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;  // drives dropout for this batch
};

/// Shuffled batches for one epoch. A trailing single example joins the previous
/// batch so every batch can be normalized.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    int epoch);

/// Every batch of `epochs` epochs, ordinals consecutive.
std::vector<BatchTask> make_schedule(std::size_t n, std::size_t batch_size, std::uint64_t seed, int epochs);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

template <class O>
concept Objective = requires(const O& o, const typename O::Params& p, typename O::Params& mp,
                             std::span<const std::size_t> batch, std::uint64_t seed,
                             const typename O::Gradient& g) {
  { o.size() } -> std::convertible_to<std::size_t>;
  { o.gradient(p, batch, seed) } -> std::same_as<typename O::Gradient>;
  o.commit(mp, g);
  { g.loss } -> std::convertible_to<double>;
  { g.grads } -> std::convertible_to<const typename O::Params&>;
};

template <class P>
struct TrainResult {
  P params;
  TrainReport report;
};

template <class P>
using EpochCallback = std::function<void(const EpochRecord&, const P&)>;

namespace detail {

/// Collects per-update losses into epoch records.
class EpochMeter {
public:
  EpochMeter(std::size_t batches_per_epoch, const TrainConfig& cfg)
      : per_epoch_(batches_per_epoch), cfg_(cfg), mark_(std::chrono::steady_clock::now()) {}

  /// Returns the finished epoch when this update closes one.
  std::optional<EpochRecord> add(double loss, std::size_t count) {
    sum_ += loss * static_cast<double>(count);
    count_ += count;
    if (++updates_ % per_epoch_ != 0) return std::nullopt;
    const auto now = std::chrono::steady_clock::now();
    EpochRecord rec{static_cast<int>(updates_ / per_epoch_), sum_ / static_cast<double>(count_),
                    std::chrono::duration<double>(now - mark_).count()};
    mark_ = now;
    sum_ = 0.0;
    count_ = 0;
    return rec;
  }

  void record(TrainReport& report, const EpochRecord& rec) const {
    if (!std::isfinite(rec.loss)) throw Error("train: epoch " + std::to_string(rec.epoch) + " loss is not finite");
    report.epochs.push_back(rec);
    if (!report.epochs_to_threshold && cfg_.loss_threshold && rec.loss <= *cfg_.loss_threshold)
      report.epochs_to_threshold = rec.epoch;
  }

  bool should_stop(const TrainReport& report) const {
    return cfg_.stop_at_threshold && report.epochs_to_threshold.has_value();
  }

private:
  std::size_t per_epoch_;
  const TrainConfig& cfg_;
  std::chrono::steady_clock::time_point mark_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
  std::size_t updates_ = 0;
};

template <class G>
std::size_t gradient_count(const G& g, std::size_t fallback) {
  if constexpr (requires { g.count; })
    return g.count;
  else
    return fallback;
}

}  // namespace detail

/// Applies the schedule in order, one Adam step per batch.
template <Objective O>
TrainResult<typename O::Params> train_on_schedule(const O& objective, typename O::Params params,
                                                  std::span<const BatchTask> schedule, std::size_t batches_per_epoch,
                                                  const TrainConfig& cfg,
                                                  const EpochCallback<typename O::Params>& on_epoch = {}) {
  TrainResult<typename O::Params> result{std::move(params), {}};
  if (schedule.empty()) return result;
  auto moments = AdamMoments<typename O::Params>::zeros_like(result.params);
  detail::EpochMeter meter(batches_per_epoch, cfg);
  long step = 0;
  for (const auto& task : schedule) {
    auto g = objective.gradient(result.params, task.indices, task.seed);
    ++result.report.submitted;
    objective.commit(result.params, g);
    adam_step(result.params, g.grads, moments, ++step, cfg);
    ++result.report.applied;
    result.report.applied_order.push_back(task.ordinal);
    if (auto rec = meter.add(g.loss, detail::gradient_count(g, task.indices.size()))) {
      meter.record(result.report, *rec);
      if (on_epoch) on_epoch(*rec, result.params);
      if (meter.should_stop(result.report)) break;
    }
  }
  return result;
}

/// Single-threaded mini-batch training over shuffled epochs.
template <Objective O>
TrainResult<typename O::Params> train_sequential(const O& objective, typename O::Params params,
                                                 const TrainConfig& cfg,
                                                 const EpochCallback<typename O::Params>& on_epoch = {}) {
  cfg.validate();
  if (cfg.max_epochs == 0) return {std::move(params), {}};
  const auto schedule = make_schedule(objective.size(), cfg.batch_size, cfg.seed, cfg.max_epochs);
  const auto per_epoch = schedule.size() / static_cast<std::size_t>(cfg.max_epochs);
  return train_on_schedule(objective, std::move(params), schedule, per_epoch, cfg, on_epoch);
}

/// Asynchronous SGD against one shared parameter store. Each worker snapshots the
/// parameters, computes a batch gradient without holding any lock, and submits it.
/// The store applies submissions one at a time (Adam moments and step counter move
/// together) and discards any gradient whose snapshot is `staleness_bound` or more
/// updates old; the discarded batch goes back on the queue. Training ends once every
/// scheduled batch has been applied.
template <Objective O>
TrainResult<typename O::Params> train_async(const O& objective, typename O::Params params, const TrainConfig& cfg,
                                            const EpochCallback<typename O::Params>& on_epoch = {}) {
  using P = typename O::Params;
  cfg.validate();
  if (cfg.workers < 2) throw Error("train_async: needs at least 2 workers");
  TrainResult<P> result{std::move(params), {}};
  if (cfg.max_epochs == 0) return result;

  const auto schedule = make_schedule(objective.size(), cfg.batch_size, cfg.seed, cfg.max_epochs);
  const std::size_t per_epoch = schedule.size() / static_cast<std::size_t>(cfg.max_epochs);

  struct Store {
    explicit Store(const P& params) : moments(AdamMoments<P>::zeros_like(params)) {}
    std::mutex mutex;
    AdamMoments<P> moments;
    std::size_t version = 0;  // number of applied updates
    std::size_t next_task = 0;
    std::deque<std::size_t> retry;
    bool stop = false;
    std::exception_ptr failure;
    std::string failure_where;
  } store(result.params);

  detail::EpochMeter meter(per_epoch, cfg);
  const auto bound = static_cast<std::size_t>(cfg.staleness_bound);

  auto worker = [&](int worker_id) {
    while (true) {
      std::size_t task_index;
      std::size_t snapshot_version;
      std::optional<P> snapshot;
      {
        std::lock_guard lock(store.mutex);
        if (store.stop || store.version == schedule.size()) return;
        if (!store.retry.empty()) {
          task_index = store.retry.front();
          store.retry.pop_front();
        } else if (store.next_task < schedule.size()) {
          task_index = store.next_task++;
        } else {
          return;  // remaining work is in flight elsewhere; its owner retries it
        }
        snapshot.emplace(result.params);
        snapshot_version = store.version;
      }

      const auto& task = schedule[task_index];
      std::optional<typename O::Gradient> g;
      try {
        g.emplace(objective.gradient(*snapshot, task.indices, task.seed));
      } catch (...) {
        std::lock_guard lock(store.mutex);
        if (!store.failure) {
          store.failure = std::current_exception();
          store.failure_where = "worker " + std::to_string(worker_id) + " on batch " + std::to_string(task.ordinal);
        }
        store.stop = true;
        return;
      }

      std::lock_guard lock(store.mutex);
      if (store.stop) return;
      ++result.report.submitted;
      if (store.version - snapshot_version >= bound) {
        ++result.report.discarded;
        store.retry.push_back(task_index);
        continue;
      }
      try {
        objective.commit(result.params, *g);
        adam_step(result.params, g->grads, store.moments, static_cast<long>(store.version) + 1, cfg);
      } catch (...) {
        store.failure = std::current_exception();
        store.failure_where = "applier on batch " + std::to_string(task.ordinal);
        store.stop = true;
        return;
      }
      ++store.version;
      ++result.report.applied;
      result.report.applied_order.push_back(task.ordinal);
      if (auto rec = meter.add(g->loss, detail::gradient_count(*g, task.indices.size()))) {
        meter.record(result.report, *rec);
        if (on_epoch) on_epoch(*rec, result.params);
        if (meter.should_stop(result.report)) store.stop = true;
      }
    }
  };

  std::vector<std::thread> threads;
  for (int w = 0; w < cfg.workers; ++w) threads.emplace_back(worker, w);
  for (auto& t : threads) t.join();
  if (store.failure) {
    try {
      std::rethrow_exception(store.failure);
    } catch (const std::exception& e) {
      throw Error("train_async: " + store.failure_where + " failed: " + e.what());
    }
  }
  return result;
}

/// Rebuilds, from a schedule, the batch sequence an earlier run applied.
std::vector<BatchTask> reorder_schedule(std::span<const BatchTask> schedule, std::span<const std::size_t> order);

// ---------------------------------------------------------------------------
// Objectives

/// Mean categorical cross entropy of the sequence classifier over labelled subsequences.
class ClassifierObjective {
public:
  using Params = ModelParams;
  struct Gradient {
    double loss = 0.0;
    std::size_t count = 0;
    ModelParams grads;
    Tensor<float> batch_mean;
    Tensor<float> batch_var;
  };

  ClassifierObjective(std::span<const TokenSequence> samples, ModelConfig cfg);

  std::size_t size() const { return samples_.size(); }
  const ModelConfig& config() const { return cfg_; }
  Gradient gradient(const ModelParams& params, std::span<const std::size_t> batch, std::uint64_t seed) const;
  /// Folds the batch's normalization statistics into the running estimates.
  void commit(ModelParams& params, const Gradient& g) const;
  /// Eval-mode mean loss over every sample.
  double mean_loss(const ModelParams& params) const;

private:
  std::span<const TokenSequence> samples_;
  ModelConfig cfg_;
};

/// Softmax regression: a single dense layer trained with CCE. Convex in its parameters.
struct LinearParams {
  Tensor<float> kernel;  // features × classes
  Tensor<float> bias;    // classes × 1

  std::vector<NamedTensor<float>> trainable() { return {{"kernel", &kernel}, {"bias", &bias}}; }
  std::vector<ConstNamedTensor<float>> trainable() const { return {{"kernel", &kernel}, {"bias", &bias}}; }
};

class SoftmaxRegressionObjective {
public:
  using Params = LinearParams;
  struct Gradient {
    double loss = 0.0;
    std::size_t count = 0;
    LinearParams grads;
  };

  SoftmaxRegressionObjective(Tensor<float> features, std::vector<int> labels, int n_classes);

  /// Gaussian class clusters in `dims` dimensions, overlapping enough that the optimum loss is nonzero.
  static SoftmaxRegressionObjective toy(std::size_t n, int dims, int n_classes, std::uint64_t seed);

  std::size_t size() const { return labels_.size(); }
  LinearParams zeros() const;
  Gradient gradient(const LinearParams& params, std::span<const std::size_t> batch, std::uint64_t seed) const;
  void commit(LinearParams&, const Gradient&) const {}
  double mean_loss(const LinearParams& params) const;

private:
  Tensor<float> features_;  // dims × n
  std::vector<int> labels_;
  int n_classes_;
};

/// Trains the classifier from `cfg.seed`-initialized weights; `workers > 1` selects
/// the asynchronous trainer.
TrainResult<ModelParams> train_classifier(std::span<const TokenSequence> samples, const TrainConfig& cfg,
                                          const ModelConfig& model_cfg);

}  // namespace ragaseq
