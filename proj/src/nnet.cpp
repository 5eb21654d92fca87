#include "ragaseq/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ragaseq {

void ModelConfig::validate() const {
  if (vocab_size < 3) throw Error("model: vocab_size must be at least 3");
  if (embed_dim < 1 || lstm_hidden < 1 || attention_dim < 1 || dense1_units < 1)
    throw Error("model: every layer width must be >= 1");
  if (n_classes < 2) throw Error("model: n_classes must be >= 2");
  if (embedding_head && embedding_dim < 1) throw Error("model: embedding_dim must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("model: dropout_rate must be in [0, 1)");
}

namespace {

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
Tensor<T> uniform(int rows, int cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(dist(rng));
  return m;
}

void check_shape(std::string_view name, Eigen::Index rows, Eigen::Index cols, Eigen::Index want_rows,
                 Eigen::Index want_cols) {
  if (rows != want_rows || cols != want_cols)
    throw Error("model: tensor " + std::string(name) + " has shape " + std::to_string(rows) + "x" +
                std::to_string(cols) + ", expected " + std::to_string(want_rows) + "x" +
                std::to_string(want_cols));
}

}  // namespace

template <class T>
std::vector<NamedTensor<T>> BasicModelParams<T>::trainable() {
  return {{"embedding", &embedding},           {"lstm_kernel", &lstm_kernel},
          {"lstm_recurrent", &lstm_recurrent}, {"lstm_bias", &lstm_bias},
          {"attention_kernel", &attention_kernel}, {"attention_bias", &attention_bias},
          {"attention_score", &attention_score}, {"bn_gamma", &bn_gamma},
          {"bn_beta", &bn_beta},                {"dense1_kernel", &dense1_kernel},
          {"dense1_bias", &dense1_bias},        {"dense2_kernel", &dense2_kernel},
          {"dense2_bias", &dense2_bias}};
}

template <class T>
std::vector<ConstNamedTensor<T>> BasicModelParams<T>::trainable() const {
  auto* self = const_cast<BasicModelParams*>(this);
  std::vector<ConstNamedTensor<T>> out;
  for (auto [name, value] : self->trainable()) out.push_back({name, value});
  return out;
}

template <class T>
std::vector<NamedTensor<T>> BasicModelParams<T>::all() {
  auto out = trainable();
  out.push_back({"bn_running_mean", &bn_running_mean});
  out.push_back({"bn_running_var", &bn_running_var});
  return out;
}

template <class T>
std::vector<ConstNamedTensor<T>> BasicModelParams<T>::all() const {
  auto* self = const_cast<BasicModelParams*>(this);
  std::vector<ConstNamedTensor<T>> out;
  for (auto [name, value] : self->all()) out.push_back({name, value});
  return out;
}

template <class T>
BasicModelParams<T> BasicModelParams<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const int h = cfg.lstm_hidden;
  BasicModelParams p;
  p.embedding = Tensor<T>::Zero(cfg.vocab_size, cfg.embed_dim);
  p.lstm_kernel = Tensor<T>::Zero(cfg.embed_dim, 4 * h);
  p.lstm_recurrent = Tensor<T>::Zero(h, 4 * h);
  p.lstm_bias = Tensor<T>::Zero(4 * h, 1);
  p.attention_kernel = Tensor<T>::Zero(h, cfg.attention_dim);
  p.attention_bias = Tensor<T>::Zero(cfg.attention_dim, 1);
  p.attention_score = Tensor<T>::Zero(cfg.attention_dim, 1);
  p.bn_gamma = Tensor<T>::Zero(h, 1);
  p.bn_beta = Tensor<T>::Zero(h, 1);
  p.bn_running_mean = Tensor<T>::Zero(h, 1);
  p.bn_running_var = Tensor<T>::Zero(h, 1);
  p.dense1_kernel = Tensor<T>::Zero(h, cfg.dense1_units);
  p.dense1_bias = Tensor<T>::Zero(cfg.dense1_units, 1);
  p.dense2_kernel = Tensor<T>::Zero(cfg.dense1_units, cfg.output_dim());
  p.dense2_bias = Tensor<T>::Zero(cfg.output_dim(), 1);
  return p;
}

template <class T>
BasicModelParams<T> BasicModelParams<T>::initialize(const ModelConfig& cfg, Rng& rng) {
  auto p = zeros(cfg);
  const int h = cfg.lstm_hidden;
  auto bound = [](Eigen::Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  // Embedding rows have no meaningful fan-in; unit scale keeps inputs O(1).
  p.embedding = uniform<T>(cfg.vocab_size, cfg.embed_dim, 1.0, rng);
  p.lstm_kernel = uniform<T>(cfg.embed_dim, 4 * h, bound(cfg.embed_dim), rng);
  p.lstm_recurrent = uniform<T>(h, 4 * h, bound(h), rng);
  p.lstm_bias = uniform<T>(4 * h, 1, bound(h), rng);
  p.lstm_bias.block(h, 0, h, 1).array() += T(1);
  p.attention_kernel = uniform<T>(h, cfg.attention_dim, bound(h), rng);
  p.attention_bias = uniform<T>(cfg.attention_dim, 1, bound(h), rng);
  p.attention_score = uniform<T>(cfg.attention_dim, 1, bound(cfg.attention_dim), rng);
  p.bn_gamma.setOnes();
  p.bn_beta.setZero();
  p.bn_running_mean.setZero();
  p.bn_running_var.setOnes();
  p.dense1_kernel = uniform<T>(h, cfg.dense1_units, bound(h), rng);
  p.dense1_bias = uniform<T>(cfg.dense1_units, 1, bound(h), rng);
  p.dense2_kernel = uniform<T>(cfg.dense1_units, cfg.output_dim(), bound(cfg.dense1_units), rng);
  p.dense2_bias = uniform<T>(cfg.output_dim(), 1, bound(cfg.dense1_units), rng);
  return p;
}

template <class T>
void BasicModelParams<T>::check_shapes(const ModelConfig& cfg) const {
  cfg.validate();
  const auto want = zeros(cfg);
  auto mine = all();
  auto theirs = want.all();
  for (std::size_t i = 0; i < mine.size(); ++i)
    check_shape(mine[i].name, mine[i].value->rows(), mine[i].value->cols(), theirs[i].value->rows(),
                theirs[i].value->cols());
}

template <class T>
bool BasicModelParams<T>::all_finite() const {
  for (auto [name, value] : all())
    if (!value->allFinite()) return false;
  return true;
}

template <class T>
template <class U>
BasicModelParams<U> BasicModelParams<T>::cast() const {
  BasicModelParams<U> out;
  auto src = all();
  auto dst = out.all();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].value = src[i].value->template cast<U>();
  return out;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

template <class T>
SequenceTrace<T> run_sequence(const BasicModelParams<T>& p, const ModelConfig& cfg,
                              const std::vector<int>& tokens) {
  const int h = cfg.lstm_hidden;
  const auto steps = static_cast<Eigen::Index>(tokens.size());
  if (steps == 0) throw Error("forward: empty token sequence");

  SequenceTrace<T> s;
  s.tokens = tokens;
  s.active.resize(tokens.size());
  s.inputs.resize(cfg.embed_dim, steps);
  bool any_active = false;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const int id = tokens[t];
    if (id < 0 || id >= cfg.vocab_size)
      throw Error("forward: token id " + std::to_string(id) + " outside vocabulary of size " +
                  std::to_string(cfg.vocab_size));
    s.active[t] = id != 0;
    any_active = any_active || s.active[t];
    s.inputs.col(t) = p.embedding.row(id).transpose();
  }
  if (!any_active) throw Error("forward: sequence has no non-PAD step to attend to");

  // Input projections for every step in one product.
  Tensor<T> projected = p.lstm_kernel.transpose() * s.inputs;
  projected.colwise() += p.lstm_bias.col(0);

  s.gates = Tensor<T>::Zero(4 * h, steps);
  s.cells = Tensor<T>::Zero(h, steps + 1);
  s.hidden = Tensor<T>::Zero(h, steps + 1);
  Vec<T> z(4 * h);
  for (Eigen::Index t = 0; t < steps; ++t) {
    if (!s.active[t]) {
      s.cells.col(t + 1) = s.cells.col(t);
      s.hidden.col(t + 1) = s.hidden.col(t);
      continue;
    }
    z.noalias() = projected.col(t);
    z.noalias() += p.lstm_recurrent.transpose() * s.hidden.col(t);
    auto g = s.gates.col(t);
    for (int j = 0; j < h; ++j) {
      const T in = sigmoid(z(j));
      const T forget = sigmoid(z(h + j));
      const T cand = std::tanh(z(2 * h + j));
      const T out = sigmoid(z(3 * h + j));
      g(j) = in;
      g(h + j) = forget;
      g(2 * h + j) = cand;
      g(3 * h + j) = out;
      const T c = forget * s.cells(j, t) + in * cand;
      s.cells(j, t + 1) = c;
      s.hidden(j, t + 1) = out * std::tanh(c);
    }
  }

  auto states = s.hidden.rightCols(steps);
  s.scores_hidden = p.attention_kernel.transpose() * states;
  s.scores_hidden.colwise() += p.attention_bias.col(0);
  s.scores_hidden = s.scores_hidden.array().tanh().matrix();
  Vec<T> energy = s.scores_hidden.transpose() * p.attention_score.col(0);

  T peak = -std::numeric_limits<T>::infinity();
  for (Eigen::Index t = 0; t < steps; ++t)
    if (s.active[t]) peak = std::max(peak, energy(t));
  s.alpha = Vec<T>::Zero(steps);
  T total = 0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    if (!s.active[t]) continue;
    s.alpha(t) = std::exp(energy(t) - peak);
    total += s.alpha(t);
  }
  s.alpha /= total;
  return s;
}

template <class T>
void softmax_columns(const Tensor<T>& logits, Tensor<T>& probs) {
  probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const T peak = logits.col(b).maxCoeff();
    probs.col(b) = (logits.col(b).array() - peak).exp().matrix();
    probs.col(b) /= probs.col(b).sum();
  }
}

}  // namespace

template <class T>
BatchTrace<T> forward_batch(const BasicModelParams<T>& p, const ModelConfig& cfg,
                            std::span<const std::vector<int>> batch, ForwardOptions options, Rng* rng) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw Error("forward: empty batch");
  if (options.batch_stats && n < 2)
    throw Error("batchnorm: batch statistics need at least 2 sequences, got " + std::to_string(n));
  if (options.dropout && cfg.dropout_rate > 0.0 && rng == nullptr)
    throw Error("forward: dropout requires a random generator");

  const int h = cfg.lstm_hidden;
  BatchTrace<T> tr;
  tr.options = options;
  tr.sequences.reserve(batch.size());
  tr.context.resize(h, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    tr.sequences.push_back(run_sequence(p, cfg, batch[b]));
    const auto& s = tr.sequences.back();
    tr.context.col(b) = s.hidden.rightCols(s.alpha.size()) * s.alpha;
  }

  if (options.batch_stats) {
    tr.batch_mean = tr.context.rowwise().mean();
    Tensor<T> centered = tr.context.colwise() - tr.batch_mean.col(0);
    tr.batch_var = centered.array().square().rowwise().sum().matrix() / static_cast<T>(n);
    tr.inv_std = (tr.batch_var.array() + T(kBatchNormEpsilon)).rsqrt().matrix();
    tr.normalized = centered.array().colwise() * tr.inv_std.col(0).array();
  } else {
    tr.inv_std = (p.bn_running_var.array() + T(kBatchNormEpsilon)).rsqrt().matrix();
    tr.normalized = (tr.context.colwise() - p.bn_running_mean.col(0)).array().colwise() *
                    tr.inv_std.col(0).array();
  }
  tr.bn_out = (tr.normalized.array().colwise() * p.bn_gamma.col(0).array()).matrix();
  tr.bn_out.colwise() += p.bn_beta.col(0);

  tr.dense1_pre = p.dense1_kernel.transpose() * tr.bn_out;
  tr.dense1_pre.colwise() += p.dense1_bias.col(0);
  tr.dropout_mask = Tensor<T>::Ones(cfg.dense1_units, n);
  if (options.dropout && cfg.dropout_rate > 0.0) {
    std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
    const T scale = T(1.0 / (1.0 - cfg.dropout_rate));
    for (Eigen::Index b = 0; b < n; ++b)
      for (Eigen::Index i = 0; i < tr.dropout_mask.rows(); ++i)
        tr.dropout_mask(i, b) = keep(*rng) ? scale : T(0);
  }
  tr.dense1_out = (tr.dense1_pre.array().max(T(0)) * tr.dropout_mask.array()).matrix();

  tr.output = p.dense2_kernel.transpose() * tr.dense1_out;
  tr.output.colwise() += p.dense2_bias.col(0);
  if (!cfg.embedding_head) softmax_columns(tr.output, tr.probs);
  return tr;
}

template <class T>
ClassifierOutput<T> forward_classifier(const BasicModelParams<T>& params, const ModelConfig& cfg,
                                       std::span<const int> tokens, Mode mode, Rng* rng) {
  if (cfg.embedding_head) throw Error("forward_classifier: model has an embedding head");
  std::vector<std::vector<int>> batch{std::vector<int>(tokens.begin(), tokens.end())};
  ClassifierOutput<T> out;
  out.trace = forward_batch(params, cfg, std::span<const std::vector<int>>(batch),
                            ForwardOptions::from(mode), rng);
  out.probs = out.trace.probs.col(0);
  return out;
}

// ---------------------------------------------------------------------------
// Backward

template <class T>
BasicModelParams<T> backward(const BasicModelParams<T>& p, const ModelConfig& cfg,
                             const BatchTrace<T>& tr, const Tensor<T>& d_output) {
  const auto n = static_cast<Eigen::Index>(tr.batch_size());
  if (d_output.rows() != tr.output.rows() || d_output.cols() != n)
    throw Error("backward: output gradient shape does not match the trace");
  const int h = cfg.lstm_hidden;
  auto g = BasicModelParams<T>::zeros(cfg);

  // Dense layers.
  g.dense2_kernel.noalias() = tr.dense1_out * d_output.transpose();
  g.dense2_bias = d_output.rowwise().sum();
  Tensor<T> d_dense1 = p.dense2_kernel * d_output;
  d_dense1.array() *= tr.dropout_mask.array() * (tr.dense1_pre.array() > T(0)).template cast<T>();
  g.dense1_kernel.noalias() = tr.bn_out * d_dense1.transpose();
  g.dense1_bias = d_dense1.rowwise().sum();
  Tensor<T> d_bn = p.dense1_kernel * d_dense1;

  // Batch norm.
  g.bn_gamma = (d_bn.array() * tr.normalized.array()).rowwise().sum().matrix();
  g.bn_beta = d_bn.rowwise().sum();
  Tensor<T> d_norm = (d_bn.array().colwise() * p.bn_gamma.col(0).array()).matrix();
  Tensor<T> d_context;
  if (tr.options.batch_stats) {
    const T count = static_cast<T>(n);
    Vec<T> sum_d = d_norm.rowwise().sum();
    Vec<T> sum_dx = (d_norm.array() * tr.normalized.array()).rowwise().sum().matrix();
    d_context = (count * d_norm.array() - sum_d.replicate(1, n).array() -
                 tr.normalized.array() * sum_dx.replicate(1, n).array())
                    .colwise() *
                (tr.inv_std.col(0).array() / count);
  } else {
    d_context = (d_norm.array().colwise() * tr.inv_std.col(0).array()).matrix();
  }

  Vec<T> dh(h), dc(h), dz(4 * h);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& s = tr.sequences[b];
    const auto steps = static_cast<Eigen::Index>(s.tokens.size());
    auto states = s.hidden.rightCols(steps);

    // Attention: context = Σ α_t h_t, α = softmax(vᵀ tanh(Wᵀh_t + b)) over active steps.
    Tensor<T> d_states = d_context.col(b) * s.alpha.transpose();
    Vec<T> d_alpha = states.transpose() * d_context.col(b);
    const T weighted = s.alpha.dot(d_alpha);
    Vec<T> d_energy = (s.alpha.array() * (d_alpha.array() - weighted)).matrix();
    g.attention_score.col(0).noalias() += s.scores_hidden * d_energy;
    Tensor<T> d_pre = (p.attention_score.col(0) * d_energy.transpose()).array() *
                      (T(1) - s.scores_hidden.array().square());
    g.attention_kernel.noalias() += states * d_pre.transpose();
    g.attention_bias.col(0) += d_pre.rowwise().sum();
    d_states.noalias() += p.attention_kernel * d_pre;

    // LSTM, backwards through time.
    Tensor<T> d_gates = Tensor<T>::Zero(4 * h, steps);
    dh.setZero();
    dc.setZero();
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      dh += d_states.col(t);
      if (!s.active[t]) continue;  // state was carried unchanged
      auto gt = s.gates.col(t);
      for (int j = 0; j < h; ++j) {
        const T in = gt(j), forget = gt(h + j), cand = gt(2 * h + j), out = gt(3 * h + j);
        const T tanh_c = std::tanh(s.cells(j, t + 1));
        const T d_out = dh(j) * tanh_c;
        const T d_cell = dc(j) + dh(j) * out * (T(1) - tanh_c * tanh_c);
        dz(j) = d_cell * cand * in * (T(1) - in);
        dz(h + j) = d_cell * s.cells(j, t) * forget * (T(1) - forget);
        dz(2 * h + j) = d_cell * in * (T(1) - cand * cand);
        dz(3 * h + j) = d_out * out * (T(1) - out);
        dc(j) = d_cell * forget;
      }
      d_gates.col(t) = dz;
      dh.noalias() = p.lstm_recurrent * dz;
    }
    g.lstm_recurrent.noalias() += s.hidden.leftCols(steps) * d_gates.transpose();
    g.lstm_kernel.noalias() += s.inputs * d_gates.transpose();
    g.lstm_bias.col(0) += d_gates.rowwise().sum();
    Tensor<T> d_inputs = p.lstm_kernel * d_gates;
    for (Eigen::Index t = 0; t < steps; ++t)
      if (s.active[t]) g.embedding.row(s.tokens[t]) += d_inputs.col(t).transpose();
  }
  return g;
}

// ---------------------------------------------------------------------------
// Losses

double cce_loss(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw Error("cce_loss: label " + std::to_string(label) + " out of range");
  return -std::log(probs[label] + kProbEpsilon);
}

template <class T>
double cce_batch_loss(const BatchTrace<T>& tr, std::span<const int> labels, Tensor<T>& d_logits) {
  const auto n = static_cast<Eigen::Index>(tr.batch_size());
  if (tr.probs.size() == 0) throw Error("cce: model has no softmax output");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw Error("cce: label count != batch size");
  d_logits = tr.probs / static_cast<T>(n);
  double total = 0.0;
  for (Eigen::Index b = 0; b < n; ++b) {
    const int y = labels[b];
    if (y < 0 || y >= tr.probs.rows()) throw Error("cce: label " + std::to_string(y) + " out of range");
    total += -std::log(static_cast<double>(tr.probs(y, b)) + kProbEpsilon);
    d_logits(y, b) -= T(1) / static_cast<T>(n);
  }
  return total / static_cast<double>(n);
}

double triplet_loss(std::span<const double> ref, std::span<const double> pos,
                    std::span<const double> neg, double margin) {
  if (ref.size() != pos.size() || ref.size() != neg.size())
    throw Error("triplet_loss: embedding dimensions differ");
  double dp = 0.0, dn = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    dp += (pos[i] - ref[i]) * (pos[i] - ref[i]);
    dn += (neg[i] - ref[i]) * (neg[i] - ref[i]);
  }
  return std::max(std::sqrt(dp) - std::sqrt(dn) + margin, 0.0);
}

template <class T>
double triplet_loss_grad(const Eigen::Ref<const Vec<T>>& ref, const Eigen::Ref<const Vec<T>>& pos,
                         const Eigen::Ref<const Vec<T>>& neg, double margin, Eigen::Ref<Vec<T>> d_ref,
                         Eigen::Ref<Vec<T>> d_pos, Eigen::Ref<Vec<T>> d_neg) {
  if (ref.size() != pos.size() || ref.size() != neg.size())
    throw Error("triplet_loss: embedding dimensions differ");
  const Vec<T> to_pos = pos - ref;
  const Vec<T> to_neg = neg - ref;
  const double dp = std::sqrt(static_cast<double>(to_pos.squaredNorm()));
  const double dn = std::sqrt(static_cast<double>(to_neg.squaredNorm()));
  const double loss = dp - dn + margin;
  d_ref.setZero();
  d_pos.setZero();
  d_neg.setZero();
  if (loss <= 0.0) return 0.0;
  if (dp > 0.0) {
    d_pos = to_pos / static_cast<T>(dp);
    d_ref -= d_pos;
  }
  if (dn > 0.0) {
    d_neg = -to_neg / static_cast<T>(dn);
    d_ref -= d_neg;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Batch norm

template <class T>
BatchNormState<T> BatchNormState<T>::identity(int features) {
  return {Tensor<T>::Ones(features, 1), Tensor<T>::Zero(features, 1), Tensor<T>::Zero(features, 1),
          Tensor<T>::Ones(features, 1)};
}

template <class T>
Tensor<T> batchnorm_apply(const Tensor<T>& x, BatchNormState<T>& st, Mode mode) {
  if (x.rows() != st.gamma.rows()) throw Error("batchnorm: feature count mismatch");
  Tensor<T> mean, var;
  if (mode == Mode::train) {
    if (x.cols() < 2)
      throw Error("batchnorm: train mode needs a batch of at least 2, got " + std::to_string(x.cols()));
    mean = x.rowwise().mean();
    var = (x.colwise() - mean.col(0)).array().square().rowwise().mean().matrix();
  } else {
    mean = st.running_mean;
    var = st.running_var;
  }
  const Tensor<T> inv_std = (var.array() + T(kBatchNormEpsilon)).rsqrt().matrix();
  Tensor<T> out = ((x.colwise() - mean.col(0)).array().colwise() *
                   (inv_std.col(0).array() * st.gamma.col(0).array()))
                      .matrix();
  out.colwise() += st.beta.col(0);
  if (mode == Mode::train) {
    const T m = T(kBatchNormMomentum);
    st.running_mean = m * st.running_mean + (T(1) - m) * mean;
    st.running_var = m * st.running_var + (T(1) - m) * var;
  }
  return out;
}

template <class T>
void commit_batch_stats(BasicModelParams<T>& p, const Tensor<T>& batch_mean, const Tensor<T>& batch_var) {
  const T m = T(kBatchNormMomentum);
  p.bn_running_mean = m * p.bn_running_mean + (T(1) - m) * batch_mean;
  p.bn_running_var = m * p.bn_running_var + (T(1) - m) * batch_var;
}

// ---------------------------------------------------------------------------

#define RAGASEQ_INSTANTIATE(T)                                                                        \
  template struct BasicModelParams<T>;                                                               \
  template BatchTrace<T> forward_batch(const BasicModelParams<T>&, const ModelConfig&,              \
                                       std::span<const std::vector<int>>, ForwardOptions, Rng*);     \
  template ClassifierOutput<T> forward_classifier(const BasicModelParams<T>&, const ModelConfig&,   \
                                                  std::span<const int>, Mode, Rng*);                 \
  template BasicModelParams<T> backward(const BasicModelParams<T>&, const ModelConfig&,             \
                                        const BatchTrace<T>&, const Tensor<T>&);                     \
  template double cce_batch_loss(const BatchTrace<T>&, std::span<const int>, Tensor<T>&);           \
  template double triplet_loss_grad<T>(const Eigen::Ref<const Vec<T>>&, const Eigen::Ref<const Vec<T>>&, \
                                       const Eigen::Ref<const Vec<T>>&, double, Eigen::Ref<Vec<T>>,  \
                                       Eigen::Ref<Vec<T>>, Eigen::Ref<Vec<T>>);                      \
  template struct BatchNormState<T>;                                                                 \
  template Tensor<T> batchnorm_apply(const Tensor<T>&, BatchNormState<T>&, Mode);                    \
  template void commit_batch_stats(BasicModelParams<T>&, const Tensor<T>&, const Tensor<T>&);

RAGASEQ_INSTANTIATE(float)
RAGASEQ_INSTANTIATE(double)
#undef RAGASEQ_INSTANTIATE

template BasicModelParams<double> BasicModelParams<float>::cast<double>() const;
template BasicModelParams<float> BasicModelParams<double>::cast<float>() const;
template BasicModelParams<float> BasicModelParams<float>::cast<float>() const;
template BasicModelParams<double> BasicModelParams<double>::cast<double>() const;

}  // namespace ragaseq
