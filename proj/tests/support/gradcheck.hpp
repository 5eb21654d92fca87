#pragma once

// Central finite differences over every trainable tensor. Independent of the
// backward pass: it only ever calls the loss closure.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ragaseq/nnet.hpp"

namespace ragaseq::testing {

struct GradMismatch {
  std::string tensor;
  Eigen::Index index;
  double analytic;
  double numeric;
  double rel_err;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::vector<GradMismatch> failures;
};

/// |a − n| / max(|a|, |n|, floor). The floor keeps entries whose true value is
/// below finite-difference resolution from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradCheckResult finite_difference_check(BasicModelParams<double> params,
                                               const BasicModelParams<double>& analytic,
                                               const std::function<double(const BasicModelParams<double>&)>& loss,
                                               double tolerance, double step = 1e-6) {
  GradCheckResult result;
  auto tensors = params.trainable();
  const auto grads = analytic.trainable();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto& value = *tensors[t].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + step;
      const double up = loss(params);
      value.data()[i] = saved - step;
      const double down = loss(params);
      value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[t].value->data()[i];
      const double err = relative_error(a, numeric);
      result.max_rel_err = std::max(result.max_rel_err, err);
      ++result.checked;
      if (err > tolerance) result.failures.push_back({std::string(tensors[t].name), i, a, numeric, err});
    }
  }
  return result;
}

/// The tiny network used for gradient checks: vocab 7, embed 3, hidden 4, 3 classes.
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.vocab_size = 7;
  cfg.embed_dim = 3;
  cfg.lstm_hidden = 4;
  cfg.attention_dim = 3;
  cfg.dense1_units = 5;
  cfg.n_classes = 3;
  cfg.dropout_rate = 0.3;
  return cfg;
}

}  // namespace ragaseq::testing
