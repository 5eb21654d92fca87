#include "doctest.h"

#include <cmath>
#include <numeric>

#include "ragaseq/nnet.hpp"
#include "support/gradcheck.hpp"

using namespace ragaseq;
using ragaseq::testing::finite_difference_check;
using ragaseq::testing::tiny_model_config;

namespace {

std::vector<std::vector<int>> random_batch(const ModelConfig& cfg, std::size_t n, std::size_t len, Rng& rng) {
  std::uniform_int_distribution<int> token(1, cfg.vocab_size - 1);
  std::vector<std::vector<int>> batch(n, std::vector<int>(len));
  for (auto& seq : batch)
    for (auto& t : seq) t = token(rng);
  batch[0][0] = 0;  // one left-padded sequence exercises the PAD mask
  return batch;
}

double batch_cce(const BasicModelParams<double>& p, const ModelConfig& cfg,
                 const std::vector<std::vector<int>>& batch, const std::vector<int>& labels, std::uint64_t seed) {
  Rng rng(seed);
  const auto tr = forward_batch(p, cfg, std::span<const std::vector<int>>(batch), ForwardOptions::from(Mode::train), &rng);
  Tensor<double> d;
  return cce_batch_loss(tr, labels, d);
}

}  // namespace

TEST_CASE("cce_loss matches its closed form") {
  const std::vector<double> perfect{0.0, 1.0, 0.0};
  CHECK(cce_loss(perfect, 1) == doctest::Approx(0.0).epsilon(1e-11));
  const std::vector<double> uniform(40, 1.0 / 40.0);
  CHECK(cce_loss(uniform, 7) == doctest::Approx(3.6888794541139363).epsilon(1e-9));
  const std::vector<double> half{0.5, 0.25, 0.25};
  CHECK(cce_loss(half, 0) == doctest::Approx(0.6931471805599453).epsilon(1e-9));
  CHECK_THROWS_AS(cce_loss(half, 3), Error);
}

TEST_CASE("triplet_loss is the hinge of the distance gap") {
  const std::vector<double> ref{0.0, 0.0}, pos{0.0, 0.0}, neg{2.0, 0.0};
  CHECK(triplet_loss(ref, pos, neg, 1.0) == 0.0);
  CHECK(triplet_loss(ref, ref, ref, 1.0) == 1.0);
  const std::vector<double> p2{3.0, 4.0}, n2{0.0, 5.0};
  CHECK(triplet_loss(ref, p2, n2, 1.0) == doctest::Approx(1.0));
  CHECK(triplet_loss(ref, p2, n2, 0.0) == doctest::Approx(0.0));
  const std::vector<double> short_vec{1.0};
  CHECK_THROWS_AS(triplet_loss(ref, short_vec, neg, 1.0), Error);
}

TEST_CASE("classifier forward yields a distribution") {
  auto cfg = tiny_model_config();
  Rng rng(3);
  const auto params = ModelParams::initialize(cfg, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> token(0, cfg.vocab_size - 1);
    std::vector<int> seq(1 + trial % 7);
    for (auto& t : seq) t = token(rng);
    seq.back() = 1 + trial % (cfg.vocab_size - 1);
    const auto out = forward_classifier(params, cfg, seq, Mode::eval);
    CHECK(out.probs.sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(out.probs.minCoeff() >= 0.0f);
    const auto& s = out.trace.sequences[0];
    CHECK(s.alpha.sum() == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t t = 0; t < seq.size(); ++t)
      if (seq[t] == 0) CHECK(s.alpha(static_cast<Eigen::Index>(t)) == 0.0f);
  }
}

TEST_CASE("forward rejects bad inputs") {
  auto cfg = tiny_model_config();
  Rng rng(1);
  const auto params = ModelParams::initialize(cfg, rng);
  const std::vector<int> all_pad{0, 0, 0};
  CHECK_THROWS_AS(forward_classifier(params, cfg, all_pad, Mode::eval), Error);
  const std::vector<int> out_of_range{1, 7};
  CHECK_THROWS_AS(forward_classifier(params, cfg, out_of_range, Mode::eval), Error);
  const std::vector<int> ok{1, 2};
  // Batch statistics over one sequence are undefined.
  CHECK_THROWS_AS(forward_classifier(params, cfg, ok, Mode::train, &rng), Error);
}

TEST_CASE("zero parameters give uniform probabilities") {
  auto cfg = tiny_model_config();
  const auto params = ModelParams::zeros(cfg);
  const std::vector<int> seq{3, 1, 4, 1, 5};
  const auto out = forward_classifier(params, cfg, seq, Mode::eval);
  for (Eigen::Index c = 0; c < out.probs.size(); ++c) CHECK(out.probs(c) == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
}

TEST_CASE("softmax is invariant to a constant logit shift") {
  auto cfg = tiny_model_config();
  Rng rng(9);
  auto params = ModelParams::initialize(cfg, rng);
  const std::vector<int> seq{2, 5, 6, 1};
  const auto before = forward_classifier(params, cfg, seq, Mode::eval).probs;
  params.dense2_bias.array() += 3.25f;
  const auto after = forward_classifier(params, cfg, seq, Mode::eval).probs;
  CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-6f);
}

TEST_CASE("eval mode ignores the random generator") {
  auto cfg = tiny_model_config();
  Rng init(5);
  const auto params = ModelParams::initialize(cfg, init);
  const std::vector<int> seq{2, 5, 6, 1};
  Rng a(1), b(999);
  const auto pa = forward_classifier(params, cfg, seq, Mode::eval, &a).probs;
  const auto pb = forward_classifier(params, cfg, seq, Mode::eval, &b).probs;
  CHECK(pa == pb);
}

TEST_CASE("leading PAD positions do not change the output") {
  auto cfg = tiny_model_config();
  Rng init(8);
  const auto params = ModelParams::initialize(cfg, init);
  const std::vector<int> bare{4, 2, 6};
  const std::vector<int> padded{0, 0, 0, 4, 2, 6};
  const auto a = forward_classifier(params, cfg, bare, Mode::eval).probs;
  const auto b = forward_classifier(params, cfg, padded, Mode::eval).probs;
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-7f);
}

TEST_CASE("backward matches central finite differences on the tiny model") {
  const auto cfg = tiny_model_config();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    auto params = BasicModelParams<double>::initialize(cfg, rng);
    const auto batch = random_batch(cfg, 3, 5, rng);
    const std::vector<int> labels{0, 2, 1};
    const std::uint64_t dropout_seed = 100 + seed;

    Rng drop(dropout_seed);
    const auto tr = forward_batch(params, cfg, std::span<const std::vector<int>>(batch), ForwardOptions::from(Mode::train), &drop);
    Tensor<double> d;
    cce_batch_loss(tr, labels, d);
    const auto analytic = backward(params, cfg, tr, d);

    const auto result = finite_difference_check(
        params, analytic, [&](const auto& p) { return batch_cce(p, cfg, batch, labels, dropout_seed); }, 1e-4);
    for (const auto& f : result.failures)
      MESSAGE(f.tensor << "[" << f.index << "] analytic " << f.analytic << " numeric " << f.numeric);
    CHECK(result.failures.empty());
    CHECK(result.checked > 100);
  }
}

TEST_CASE("triplet gradients through an embedding head with frozen batch norm") {
  auto cfg = tiny_model_config();
  cfg.embedding_head = true;
  cfg.embedding_dim = 4;
  Rng rng(21);
  auto params = BasicModelParams<double>::initialize(cfg, rng);
  for (Eigen::Index i = 0; i < params.bn_running_mean.size(); ++i) {
    params.bn_running_mean(i) = 0.1 * static_cast<double>(i);
    params.bn_running_var(i) = 0.5 + 0.2 * static_cast<double>(i);
  }
  const auto batch = random_batch(cfg, 3, 5, rng);
  const ForwardOptions opts{true, false};
  auto loss_of = [&](const BasicModelParams<double>& p, Tensor<double>* d_out) {
    Rng drop(77);
    const auto tr = forward_batch(p, cfg, std::span<const std::vector<int>>(batch), opts, &drop);
    Eigen::VectorXd dr(cfg.embedding_dim), dp(cfg.embedding_dim), dn(cfg.embedding_dim);
    const double loss = triplet_loss_grad<double>(tr.output.col(0), tr.output.col(1), tr.output.col(2), 5.0, dr, dp, dn);
    if (d_out) {
      d_out->resize(cfg.embedding_dim, 3);
      d_out->col(0) = dr;
      d_out->col(1) = dp;
      d_out->col(2) = dn;
    }
    return loss;
  };
  Tensor<double> d;
  CHECK(loss_of(params, &d) > 0.0);
  Rng drop(77);
  const auto tr = forward_batch(params, cfg, std::span<const std::vector<int>>(batch), opts, &drop);
  const auto analytic = backward(params, cfg, tr, d);
  const auto result =
      finite_difference_check(params, analytic, [&](const auto& p) { return loss_of(p, nullptr); }, 1e-4);
  for (const auto& f : result.failures)
    MESSAGE(f.tensor << "[" << f.index << "] analytic " << f.analytic << " numeric " << f.numeric);
  CHECK(result.failures.empty());
}

TEST_CASE("doubling the output gradient doubles every parameter gradient") {
  const auto cfg = tiny_model_config();
  Rng rng(4);
  const auto params = BasicModelParams<double>::initialize(cfg, rng);
  const auto batch = random_batch(cfg, 2, 5, rng);
  Rng drop(1);
  const auto tr = forward_batch(params, cfg, std::span<const std::vector<int>>(batch), ForwardOptions::from(Mode::train), &drop);
  Tensor<double> d;
  const std::vector<int> labels{1, 2};
  cce_batch_loss(tr, labels, d);
  const auto once = backward(params, cfg, tr, d);
  const auto twice = backward(params, cfg, tr, Tensor<double>(2.0 * d));
  const auto a = once.trainable();
  const auto b = twice.trainable();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CAPTURE(a[i].name);
    CHECK(((2.0 * *a[i].value) - *b[i].value).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("a certain prediction yields a zero output-bias gradient") {
  const auto cfg = tiny_model_config();
  Rng rng(6);
  auto params = ModelParams::initialize(cfg, rng);
  params.dense2_bias.setZero();
  params.dense2_bias(1) = 1000.0f;
  params.dense2_kernel.setZero();
  std::vector<std::vector<int>> batch{{1, 2, 3}, {4, 5, 6}};
  Rng drop(2);
  const auto tr = forward_batch(params, cfg, std::span<const std::vector<int>>(batch), ForwardOptions::from(Mode::train), &drop);
  CHECK(tr.probs(1, 0) == 1.0f);
  Tensor<float> d;
  const std::vector<int> labels{1, 1};
  CHECK(cce_batch_loss(tr, labels, d) == doctest::Approx(0.0).epsilon(1e-11));
  const auto g = backward(params, cfg, tr, d);
  CHECK(g.dense2_bias.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("batchnorm_apply") {
  SUBCASE("standardized input passes through") {
    Tensor<double> x(2, 4);
    x << -1, 1, -1, 1,  //
        1.5, -0.5, 0.5, -1.5;
    // Rescale the second row to unit variance.
    const double sd = std::sqrt((1.5 * 1.5 + 0.25 + 0.25 + 1.5 * 1.5) / 4.0);
    x.row(1) /= sd;
    auto st = BatchNormState<double>::identity(2);
    const auto y = batchnorm_apply(x, st, Mode::train);
    CHECK((y - x).cwiseAbs().maxCoeff() < 1e-4);
  }
  SUBCASE("train output is standardized and running stats move") {
    Rng rng(2);
    std::normal_distribution<double> n(3.0, 2.0);
    Tensor<double> x(3, 16);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    auto st = BatchNormState<double>::identity(3);
    const auto y = batchnorm_apply(x, st, Mode::train);
    for (Eigen::Index r = 0; r < 3; ++r) {
      CHECK(y.row(r).mean() == doctest::Approx(0.0).epsilon(1e-9));
      const double var = (y.row(r).array() - y.row(r).mean()).square().mean();
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
      CHECK(st.running_mean(r) == doctest::Approx(0.1 * x.row(r).mean()));
    }
  }
  SUBCASE("eval mode is repeatable and leaves stats alone") {
    Tensor<double> x = Tensor<double>::Random(2, 3);
    auto st = BatchNormState<double>::identity(2);
    st.running_mean(0) = 0.5;
    const auto a = batchnorm_apply(x, st, Mode::eval);
    const auto b = batchnorm_apply(x, st, Mode::eval);
    CHECK(a == b);
    CHECK(st.running_mean(0) == 0.5);
  }
  SUBCASE("train mode needs two samples") {
    Tensor<double> x = Tensor<double>::Random(2, 1);
    auto st = BatchNormState<double>::identity(2);
    CHECK_THROWS_AS(batchnorm_apply(x, st, Mode::train), Error);
  }
}

TEST_CASE("initialization follows the fan-in rule") {
  ModelConfig cfg = tiny_model_config();
  cfg.lstm_hidden = 16;
  Rng rng(0);
  const auto p = ModelParams::initialize(cfg, rng);
  p.check_shapes(cfg);
  CHECK(p.lstm_recurrent.cwiseAbs().maxCoeff() <= 0.25f);
  CHECK(p.lstm_bias.block(16, 0, 16, 1).minCoeff() >= 0.75f);
  CHECK(p.bn_running_var.minCoeff() == 1.0f);
  CHECK(p.dense2_kernel.rows() == cfg.dense1_units);
  CHECK(p.dense2_kernel.cols() == cfg.n_classes);
}
