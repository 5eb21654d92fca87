#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ragaseq/error.hpp"

namespace ragaseq {

template <class T>
using Tensor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
struct NamedTensor {
  std::string_view name;
  Tensor<T>* value;
};

template <class T>
struct ConstNamedTensor {
  std::string_view name;
  const Tensor<T>* value;
};

/// Shapes and hyperparameters of the embedding → LSTM → attention → batch-norm →
/// dense → dense network. With `embedding_head` the final dense layer has
/// `embedding_dim` outputs and no softmax.
struct ModelConfig {
  int vocab_size = 243;
  int embed_dim = 128;
  int lstm_hidden = 768;
  int attention_dim = 128;
  int dense1_units = 384;
  int n_classes = 40;
  double dropout_rate = 0.3;
  bool embedding_head = false;
  int embedding_dim = 600;
  // Recorded with the weights so a checkpoint knows how its inputs were built.
  int k_levels = 5;
  int clamp_octaves = 2;
  int subseq_len = 5000;

  int output_dim() const { return embedding_head ? embedding_dim : n_classes; }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// All tensors of the network. Dense and LSTM kernels are stored [inputs × outputs];
/// LSTM gates are packed in the order input, forget, candidate, output.
template <class T>
struct BasicModelParams {
  Tensor<T> embedding;        // vocab × embed
  Tensor<T> lstm_kernel;      // embed × 4H
  Tensor<T> lstm_recurrent;   // H × 4H
  Tensor<T> lstm_bias;        // 4H × 1
  Tensor<T> attention_kernel; // H × A
  Tensor<T> attention_bias;   // A × 1
  Tensor<T> attention_score;  // A × 1
  Tensor<T> bn_gamma;         // H × 1
  Tensor<T> bn_beta;          // H × 1
  Tensor<T> bn_running_mean;  // H × 1, not trained
  Tensor<T> bn_running_var;   // H × 1, not trained
  Tensor<T> dense1_kernel;    // H × D1
  Tensor<T> dense1_bias;      // D1 × 1
  Tensor<T> dense2_kernel;    // D1 × out
  Tensor<T> dense2_bias;      // out × 1

  std::vector<NamedTensor<T>> trainable();
  std::vector<ConstNamedTensor<T>> trainable() const;
  /// Trainable tensors followed by the batch-norm running statistics.
  std::vector<NamedTensor<T>> all();
  std::vector<ConstNamedTensor<T>> all() const;

  /// Same shapes, every value zero (running variance included).
  static BasicModelParams zeros(const ModelConfig& cfg);
  /// Uniform(±1/sqrt(fan_in)) weights, +1 forget-gate bias, identity batch norm.
  static BasicModelParams initialize(const ModelConfig& cfg, Rng& rng);

  void check_shapes(const ModelConfig& cfg) const;
  bool all_finite() const;

  template <class U>
  BasicModelParams<U> cast() const;
};

using ModelParams = BasicModelParams<float>;

enum class Mode { train, eval };

/// Which stochastic/batch-dependent pieces are active during a forward pass.
struct ForwardOptions {
  bool dropout = false;
  /// Normalize with batch statistics instead of the running estimates.
  bool batch_stats = false;

  static ForwardOptions from(Mode mode) {
    return mode == Mode::train ? ForwardOptions{true, true} : ForwardOptions{false, false};
  }
};

/// Activations of one sequence, kept for the backward pass.
template <class T>
struct SequenceTrace {
  std::vector<int> tokens;
  std::vector<char> active;  // false at PAD positions
  Tensor<T> inputs;          // embed × steps
  Tensor<T> gates;           // 4H × steps, post-activation
  Tensor<T> cells;           // H × (steps + 1), column 0 is the initial state
  Tensor<T> hidden;          // H × (steps + 1)
  Tensor<T> scores_hidden;   // A × steps, tanh(Wᵀh + b)
  Eigen::Matrix<T, Eigen::Dynamic, 1> alpha;  // attention weights
};

template <class T>
struct BatchTrace {
  ForwardOptions options;
  std::vector<SequenceTrace<T>> sequences;
  Tensor<T> context;       // H × B
  Tensor<T> normalized;    // H × B, x̂ before scale/shift
  Tensor<T> bn_out;        // H × B
  Tensor<T> batch_mean;    // H × 1 (batch_stats only)
  Tensor<T> batch_var;     // H × 1 (batch_stats only)
  Tensor<T> inv_std;       // H × 1
  Tensor<T> dense1_pre;    // D1 × B
  Tensor<T> dropout_mask;  // D1 × B, 0 or 1/(1-p)
  Tensor<T> dense1_out;    // D1 × B, after ReLU and dropout
  Tensor<T> output;        // out × B, logits or embeddings
  Tensor<T> probs;         // out × B, softmax of output (classifier head only)

  std::size_t batch_size() const { return sequences.size(); }
};

/// Runs a batch of token sequences. Throws on out-of-range ids, on sequences with
/// no non-PAD step, and on batch statistics over fewer than two sequences.
template <class T>
BatchTrace<T> forward_batch(const BasicModelParams<T>& params, const ModelConfig& cfg,
                            std::span<const std::vector<int>> batch, ForwardOptions options,
                            Rng* rng = nullptr);

template <class T>
struct ClassifierOutput {
  Eigen::Matrix<T, Eigen::Dynamic, 1> probs;
  BatchTrace<T> trace;
};

/// Single-sequence forward. Train mode normalizes with batch statistics and so
/// rejects a lone sequence; use `forward_batch` for training.
template <class T>
ClassifierOutput<T> forward_classifier(const BasicModelParams<T>& params, const ModelConfig& cfg,
                                       std::span<const int> tokens, Mode mode, Rng* rng = nullptr);

/// Reverse-mode gradients of Σ_b ⟨d_output[:, b], output[:, b]⟩ with respect to every
/// trainable tensor. Running statistics in the result are zero.
template <class T>
BasicModelParams<T> backward(const BasicModelParams<T>& params, const ModelConfig& cfg,
                             const BatchTrace<T>& trace, const Tensor<T>& d_output);

/// −log(p[label] + 1e-12).
double cce_loss(std::span<const double> probs, int label);

/// Mean CCE over the batch and its gradient with respect to the logits.
template <class T>
double cce_batch_loss(const BatchTrace<T>& trace, std::span<const int> labels, Tensor<T>& d_logits);

/// max(‖pos − ref‖ − ‖neg − ref‖ + margin, 0) with Euclidean distance.
double triplet_loss(std::span<const double> ref, std::span<const double> pos,
                    std::span<const double> neg, double margin);

/// Triplet loss and its gradients. Zero-distance pairs contribute a zero subgradient.
template <class T>
double triplet_loss_grad(const Eigen::Ref<const Eigen::Matrix<T, Eigen::Dynamic, 1>>& ref,
                         const Eigen::Ref<const Eigen::Matrix<T, Eigen::Dynamic, 1>>& pos,
                         const Eigen::Ref<const Eigen::Matrix<T, Eigen::Dynamic, 1>>& neg, double margin,
                         Eigen::Ref<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_ref,
                         Eigen::Ref<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_pos,
                         Eigen::Ref<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_neg);

inline constexpr double kProbEpsilon = 1e-12;
inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Batch-norm statistics and affine parameters for a feature vector of width H.
template <class T>
struct BatchNormState {
  Tensor<T> gamma, beta, running_mean, running_var;  // H × 1 each

  static BatchNormState identity(int features);
};

/// Normalizes the columns of `x` (features × batch). Train mode uses batch
/// statistics and folds them into the running estimates with momentum 0.9.
template <class T>
Tensor<T> batchnorm_apply(const Tensor<T>& x, BatchNormState<T>& state, Mode mode);

/// Folds the batch statistics recorded in `trace` into the running estimates.
template <class T>
void commit_batch_stats(BasicModelParams<T>& params, const Tensor<T>& batch_mean,
                        const Tensor<T>& batch_var);

}  // namespace ragaseq
