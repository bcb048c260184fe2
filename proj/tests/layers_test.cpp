#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "toolbreak/grad_check.hpp"
#include "toolbreak/layers.hpp"
#include "toolbreak/model.hpp"
#include "toolbreak/optim.hpp"

namespace toolbreak {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = n(gen);
  return t;
}

ModelSpec single_layer(std::size_t length, std::size_t channels, std::vector<LayerDesc> layers) {
  ModelSpec spec;
  spec.input_length = length;
  spec.input_channels = channels;
  spec.layers = std::move(layers);
  return spec;
}

LayerDesc conv(std::size_t k, std::size_t in, std::size_t out, Padding p = Padding::same, std::size_t stride = 1) {
  LayerDesc d;
  d.kind = LayerKind::conv1d;
  d.kernel = k;
  d.in = in;
  d.out = out;
  d.padding = p;
  d.stride = stride;
  return d;
}

// Independent direct-summation oracle: build the explicitly padded input first.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, Padding padding) {
  const std::size_t B = x.extent(0), L = x.extent(1), C = x.extent(2), K = w.extent(0), O = w.extent(2);
  std::size_t left = 0, right = 0, out_len = 0;
  if (padding == Padding::valid) {
    out_len = (L - K) / stride + 1;
  } else {
    out_len = (L + stride - 1) / stride;
    const std::size_t total = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((out_len - 1) * stride + K) -
                                                              static_cast<std::ptrdiff_t>(L));
    left = total / 2;
    right = total - left;
  }
  const std::size_t P = L + left + right;
  std::vector<double> padded(B * P * C, 0.0);
  for (std::size_t bb = 0; bb < B; ++bb)
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t c = 0; c < C; ++c) padded[(bb * P + t + left) * C + c] = x.at(bb, t, c);
  Tensor out({B, out_len, O});
  for (std::size_t bb = 0; bb < B; ++bb)
    for (std::size_t t = 0; t < out_len; ++t)
      for (std::size_t o = 0; o < O; ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < K; ++i)
          for (std::size_t c = 0; c < C; ++c) s += padded[(bb * P + t * stride + i) * C + c] * w.at(i, c, o);
        out.at(bb, t, o) = s;
      }
  return out;
}

// ---------------------------------------------------------------------------
// conv1d

TEST(Conv1d, IdentityKernelReproducesInput) {
  Tensor x({1, 5, 1}, {1, -2, 3, 4.5, 0});
  Tensor w({1, 1, 1}, {1.0});
  Tensor b({1});
  EXPECT_EQ(conv1d_forward(x, w, b, 1, Padding::same), x);
}

TEST(Conv1d, ValidSumOfThree) {
  Tensor x({1, 3, 1}, {1, 2, 3});
  Tensor w({3, 1, 1}, {1, 1, 1});
  Tensor b({1});
  auto y = conv1d_forward(x, w, b, 1, Padding::valid);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_DOUBLE_EQ(y[0], 6.0);
}

TEST(Conv1d, MatchesDirectSummationOracle) {
  auto x = random_tensor({2, 16, 3}, 1);
  auto w = random_tensor({5, 3, 4}, 2);
  auto b = random_tensor({4}, 3);
  for (auto padding : {Padding::same, Padding::valid}) {
    for (std::size_t stride : {1u, 2u, 3u}) {
      auto got = conv1d_forward(x, w, b, stride, padding);
      auto want = naive_conv(x, w, b, stride, padding);
      ASSERT_EQ(got.shape(), want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
    }
  }
}

TEST(Conv1d, SamePaddingPreservesLengthAtStrideOne) {
  for (std::size_t k : {1u, 2u, 3u, 4u, 5u, 7u})
    for (std::size_t len : {1u, 5u, 16u, 33u}) {
      if (k > len + k - 1) continue;
      EXPECT_EQ(conv_output_length(len, k, 1, Padding::same), len);
      auto y = conv1d_forward(random_tensor({1, len, 2}, len), random_tensor({k, 2, 3}, k), Tensor({3}), 1,
                              Padding::same);
      EXPECT_EQ(y.extent(1), len);
    }
}

TEST(Conv1d, ShapeMismatchThrows) {
  EXPECT_THROW(conv1d_forward(Tensor({1, 5, 2}), Tensor({3, 1, 1}), Tensor({1}), 1, Padding::same), ShapeError);
  EXPECT_THROW(conv1d_forward(Tensor({1, 5, 1}), Tensor({3, 1, 2}), Tensor({1}), 1, Padding::same), ShapeError);
  EXPECT_THROW(conv1d_forward(Tensor({1, 2, 1}), Tensor({3, 1, 1}), Tensor({1}), 1, Padding::valid), ShapeError);
  EXPECT_THROW(conv1d_backward(Tensor({1, 5, 1}), Tensor({3, 1, 1}), 1, Padding::same, Tensor({1, 4, 1})), ShapeError);
}

TEST(Conv1d, ZeroUpstreamGivesZeroGradients) {
  auto x = random_tensor({2, 8, 2}, 4);
  auto w = random_tensor({3, 2, 3}, 5);
  auto g = conv1d_backward(x, w, 1, Padding::same, Tensor({2, 8, 3}));
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.kernel.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, IdentityKernelPassesUpstreamThrough) {
  auto x = random_tensor({1, 6, 1}, 6);
  auto up = random_tensor({1, 6, 1}, 7);
  auto g = conv1d_backward(x, Tensor({1, 1, 1}, {1.0}), 1, Padding::same, up);
  EXPECT_EQ(g.input, up);
}

TEST(Conv1d, GradientsMatchFiniteDifferences) {
  for (auto padding : {Padding::same, Padding::valid}) {
    auto r = grad_check(single_layer(9, 3, {conv(5, 3, 4, padding)}), 11);
    EXPECT_LT(r.max_relative_error, 1e-6) << r.worst;
    EXPECT_GT(r.checked, 100u);
    EXPECT_EQ(r.skipped, 0u);
  }
  auto strided = grad_check(single_layer(10, 2, {conv(3, 2, 2, Padding::same, 2)}), 12);
  EXPECT_LT(strided.max_relative_error, 1e-6) << strided.worst;
}

// ---------------------------------------------------------------------------
// Adjoint consistency: <u, J v> = <J^T u, v>

TEST(Adjoint, ConvAndDenseAreConsistent) {
  // Linear in the input once the bias is removed, so J v = f(v) with zero bias.
  auto w = random_tensor({5, 3, 4}, 21);
  auto v = random_tensor({2, 12, 3}, 22);
  auto u = random_tensor({2, 12, 4}, 23);
  const double lhs = dot(u, conv1d_forward(v, w, Tensor({4}), 1, Padding::same));
  const double rhs = dot(conv1d_backward(v, w, 1, Padding::same, u).input, v);
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));

  auto W = random_tensor({7, 3}, 24);
  auto dv = random_tensor({4, 7}, 25);
  auto du = random_tensor({4, 3}, 26);
  const double l2 = dot(du, dense_forward(dv, W, Tensor({3})));
  const double r2 = dot(dense_backward(dv, W, du).input, dv);
  EXPECT_NEAR(l2, r2, 1e-9 * std::max(1.0, std::abs(l2)));
}

TEST(Adjoint, PiecewiseLinearAndBatchNormAreConsistent) {
  auto x = random_tensor({2, 10, 3}, 31);
  auto v = random_tensor({2, 10, 3}, 32);
  // relu: J v = mask * v
  {
    auto u = random_tensor({2, 10, 3}, 33);
    Tensor jv = v;
    for (std::size_t i = 0; i < jv.size(); ++i) jv[i] = x[i] > 0 ? v[i] : 0.0;
    EXPECT_NEAR(dot(u, jv), dot(relu_backward(x, u), v), 1e-9);
  }
  // maxpool: J v = v gathered at argmax
  {
    auto r = maxpool1d_forward(x);
    auto u = random_tensor(r.output.shape(), 34);
    Tensor jv(r.output.shape());
    for (std::size_t i = 0; i < jv.size(); ++i) jv[i] = v[r.argmax[i]];
    EXPECT_NEAR(dot(u, jv), dot(maxpool1d_backward(x.shape(), r.argmax, u), v), 1e-9);
  }
  // batchnorm (train): J v by central difference of a smooth map
  {
    auto gamma = random_tensor({3}, 35);
    auto beta = random_tensor({3}, 36);
    auto u = random_tensor(x.shape(), 37);
    Tensor rm({3}), rv({3}, 1.0);
    BatchNormCache cache;
    batchnorm_forward(x, gamma, beta, Mode::train, rm, rv, cache);
    const double lhs_back = dot(batchnorm_backward(cache, gamma, u).input, v);
    const double h = 1e-6;
    Tensor xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xp[i] += h * v[i];
      xm[i] -= h * v[i];
    }
    BatchNormCache scratch;
    auto fp = batchnorm_forward(xp, gamma, beta, Mode::train, rm, rv, scratch);
    auto fm = batchnorm_forward(xm, gamma, beta, Mode::train, rm, rv, scratch);
    double jv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) jv += u[i] * (fp[i] - fm[i]) / (2 * h);
    EXPECT_NEAR(jv, lhs_back, 1e-7 * std::max(1.0, std::abs(jv)));
  }
}

// ---------------------------------------------------------------------------
// relu / maxpool

TEST(Relu, Definition) {
  auto y = relu_forward(Tensor({1, 2, 1}, {-1, 2}));
  EXPECT_EQ(y, Tensor({1, 2, 1}, {0, 2}));
}

TEST(MaxPool, PairwiseMaximaWithLeftmostTies) {
  auto r = maxpool1d_forward(Tensor({1, 4, 1}, {1, 3, 2, 2}));
  EXPECT_EQ(r.output, Tensor({1, 2, 1}, {3, 2}));
  auto g = maxpool1d_backward({1, 4, 1}, r.argmax, Tensor({1, 2, 1}, {10, 20}));
  EXPECT_EQ(g, Tensor({1, 4, 1}, {0, 10, 20, 0}));
}

TEST(MaxPool, OddLengthKeepsLastSample) {
  auto r = maxpool1d_forward(Tensor({1, 5, 1}, {1, 0, -4, -5, -7}));
  EXPECT_EQ(r.output, Tensor({1, 3, 1}, {1, -4, -7}));
}

TEST(MaxPool, GradientCheckAndCeilLength) {
  for (std::size_t len : {6u, 7u, 13u}) {
    auto spec = single_layer(len, 2, {LayerDesc{LayerKind::maxpool1d}});
    EXPECT_EQ(infer_shapes(spec).back()[0], (len + 1) / 2);
    auto r = grad_check(spec, 40 + len);
    EXPECT_LT(r.max_relative_error, 1e-6) << r.worst;
  }
  auto relu = grad_check(single_layer(8, 2, {LayerDesc{LayerKind::relu}}), 50);
  EXPECT_LT(relu.max_relative_error, 1e-6) << relu.worst;
}

TEST(GradCheck, ReluKinkAtZeroIsExcluded) {
  // A relu whose inputs sit exactly on the kink: every input probe flips a gate.
  ModelSpec spec = single_layer(4, 1, {LayerDesc{LayerKind::relu}});
  Model m(spec, 1);
  Tensor zero({1, 4, 1});
  m.forward(zero, Mode::train);
  auto base = m.decisions();
  Tensor bumped = zero;
  bumped[0] = 1e-5;
  m.forward(bumped, Mode::train);
  EXPECT_NE(base, m.decisions());
}

// ---------------------------------------------------------------------------
// batchnorm

TEST(BatchNorm, TrainModeStandardizesPerChannel) {
  auto x = random_tensor({4, 25, 3}, 60, 3.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += static_cast<double>(i % 3) * 5.0;
  Tensor gamma({3}, 1.0), beta({3}), rm({3}), rv({3}, 1.0);
  BatchNormCache cache;
  auto y = batchnorm_forward(x, gamma, beta, Mode::train, rm, rv, cache);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    const std::size_t n = y.size() / 3;
    for (std::size_t i = 0; i < n; ++i) mean += y[i * 3 + c];
    mean /= n;
    for (std::size_t i = 0; i < n; ++i) var += (y[i * 3 + c] - mean) * (y[i * 3 + c] - mean);
    var /= n;
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_LT(std::abs(var - 1.0), 1e-4);  // eps = 1e-5 shrinks the variance by var/(var+eps)
  }
}

TEST(BatchNorm, AffineScaleShift) {
  // Input already standardized per channel, so the output is gamma * x + beta up to eps.
  Tensor x({1, 4, 1}, {-1.5, -0.5, 0.5, 1.5});
  const double s = std::sqrt(1.25);
  for (auto& v : x.data()) v /= s;
  Tensor gamma({1}, 2.0), beta({1}, 3.0), rm({1}), rv({1}, 1.0);
  BatchNormCache cache;
  auto y = batchnorm_forward(x, gamma, beta, Mode::train, rm, rv, cache);
  double mean = 0, var = 0;
  for (double v : y.data()) mean += v;
  mean /= 4;
  for (double v : y.data()) var += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 3.0, 1e-6);
  EXPECT_NEAR(std::sqrt(var / 4), 2.0, 1e-4);
}

TEST(BatchNorm, RunningStatisticsAndEvalMode) {
  Tensor x({1, 4, 1}, {1, 2, 3, 4});
  Tensor gamma({1}, 1.0), beta({1}), rm({1}), rv({1}, 1.0);
  BatchNormCache cache;
  batchnorm_forward(x, gamma, beta, Mode::train, rm, rv, cache);
  EXPECT_NEAR(rm[0], 0.1 * 2.5, 1e-15);
  EXPECT_NEAR(rv[0], 0.9 + 0.1 * 1.25, 1e-15);
  auto y = batchnorm_forward(x, gamma, beta, Mode::eval, rm, rv, cache);
  EXPECT_NEAR(y[0], (1 - rm[0]) / std::sqrt(rv[0] + 1e-5), 1e-12);
  EXPECT_NEAR(rm[0], 0.25, 1e-15);  // eval leaves running stats alone
}

TEST(BatchNorm, DegenerateTrainBatchThrows) {
  Tensor gamma({2}, 1.0), beta({2}), rm({2}), rv({2}, 1.0);
  BatchNormCache cache;
  EXPECT_THROW(batchnorm_forward(Tensor({1, 1, 2}), gamma, beta, Mode::train, rm, rv, cache), DomainError);
  EXPECT_NO_THROW(batchnorm_forward(Tensor({1, 1, 2}), gamma, beta, Mode::eval, rm, rv, cache));
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  LayerDesc bn;
  bn.kind = LayerKind::batchnorm;
  bn.channels = 3;
  auto r = grad_check(single_layer(6, 3, {bn}), 70);
  EXPECT_LT(r.max_relative_error, 1e-5) << r.worst;
}

// ---------------------------------------------------------------------------
// dropout

TEST(Dropout, RateZeroAndEvalAreIdentity) {
  auto x = random_tensor({2, 5, 3}, 80);
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::train, 1).output, x);
  EXPECT_EQ(dropout_forward(x, 0.5, Mode::eval, 1).output, x);
  EXPECT_THROW(dropout_forward(x, 1.0, Mode::train, 1), DomainError);
  EXPECT_THROW(dropout_forward(x, -0.1, Mode::train, 1), DomainError);
}

TEST(Dropout, MonteCarloSurvivalAndExpectation) {
  Tensor x({1, 1000000, 1}, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i));
  auto r = dropout_forward(x, 0.5, Mode::train, 2024);
  std::size_t survivors = 0;
  double in_mean = 0, out_mean = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    survivors += r.mask[i] != 0.0;
    in_mean += x[i];
    out_mean += r.output[i];
  }
  EXPECT_NEAR(static_cast<double>(survivors) / x.size(), 0.5, 0.005);
  EXPECT_NEAR(out_mean / in_mean, 1.0, 0.01);
  // backward applies the same mask
  auto g = dropout_backward(r.mask, Tensor(x.shape(), 1.0));
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(g[i], r.mask[i]);
}

TEST(Dropout, SeededMasksAreReproducible) {
  auto x = random_tensor({1, 64, 2}, 81);
  EXPECT_EQ(dropout_forward(x, 0.3, Mode::train, 9).output, dropout_forward(x, 0.3, Mode::train, 9).output);
  EXPECT_NE(dropout_forward(x, 0.3, Mode::train, 9).output, dropout_forward(x, 0.3, Mode::train, 10).output);
}

TEST(Dropout, GradientsMatchFiniteDifferences) {
  LayerDesc d;
  d.kind = LayerKind::dropout;
  d.rate = 0.4;
  auto r = grad_check(single_layer(8, 2, {d}), 82);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst;
}

// ---------------------------------------------------------------------------
// dense

TEST(Dense, IdentityAndHandArithmetic) {
  Tensor x({1, 2}, {1, 2});
  Tensor eye({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(dense_forward(x, eye, Tensor({2})), x);
  EXPECT_EQ(dense_forward(x, eye, Tensor({2}, {1, 1})), Tensor({1, 2}, {2, 3}));
  EXPECT_THROW(dense_forward(x, Tensor({3, 2}), Tensor({2})), ShapeError);
  EXPECT_THROW(dense_forward(x, eye, Tensor({3})), ShapeError);
}

TEST(Dense, GradientsMatchFiniteDifferences) {
  LayerDesc d;
  d.kind = LayerKind::dense;
  d.in = 16;
  d.out = 4;
  GradCheckOptions opt;
  opt.batch = 8;
  auto r = grad_check(single_layer(16, 1, {LayerDesc{LayerKind::flatten}, d}), 90, opt);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst;
}

// ---------------------------------------------------------------------------
// softmax cross-entropy

TEST(SoftmaxXent, SymmetricAndStableCases) {
  auto r = softmax_xent(Tensor({1, 2}, {0, 0}), {0});
  EXPECT_NEAR(r.loss, std::numbers::ln2, 1e-12);
  auto big = softmax_xent(Tensor({1, 2}, {1000, 0}), {0});
  EXPECT_TRUE(std::isfinite(big.loss));
  EXPECT_NEAR(big.loss, 0.0, 1e-12);
  EXPECT_TRUE(big.grad.all_finite());
  EXPECT_THROW(softmax_xent(Tensor({1, 2}), {2}), DomainError);
  EXPECT_THROW(softmax_xent(Tensor({1, 2}), {-1}), DomainError);
}

TEST(SoftmaxXent, RowsSumToOneAndLossNonNegative) {
  auto logits = random_tensor({16, 2}, 100, 5.0);
  auto p = softmax(logits);
  for (std::size_t b = 0; b < 16; ++b) EXPECT_NEAR(p.at(b, 0) + p.at(b, 1), 1.0, 1e-12);
  std::vector<int> labels(16);
  for (std::size_t b = 0; b < 16; ++b) labels[b] = static_cast<int>(b % 2);
  EXPECT_GE(softmax_xent(logits, labels).loss, 0.0);
}

TEST(SoftmaxXent, GradientMatchesFiniteDifferences) {
  auto logits = random_tensor({4, 2}, 101);
  std::vector<int> labels{0, 1, 1, 0};
  auto r = softmax_xent(logits, labels);
  const double h = 1e-5;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Tensor p = logits, m = logits;
    p[i] += h;
    m[i] -= h;
    const double numeric = (softmax_xent(p, labels).loss - softmax_xent(m, labels).loss) / (2 * h);
    EXPECT_LT(std::abs(numeric - r.grad[i]) / std::max({std::abs(numeric), std::abs(r.grad[i]), 1e-6}), 1e-6);
  }
}

// ---------------------------------------------------------------------------
// optimizers

TEST(Optimizer, GradientDescentHandArithmetic) {
  Tensor p({1}, {1.0}), g({1}, {2.0});
  OptimizerState s;
  s.kind = OptimizerKind::gd;
  s.learning_rate = 0.1;
  gd_step({&p}, {&g}, s);
  EXPECT_DOUBLE_EQ(p[0], 0.8);
  EXPECT_EQ(s.step_count, 1u);
}

TEST(Optimizer, AdamFirstStepHasMagnitudeLearningRate) {
  for (double gv : {3.0, -0.02, 1e-3, 250.0}) {
    Tensor p({1}, {0.5}), g({1}, {gv});
    OptimizerState s;
    s.learning_rate = 1e-4;
    adam_step({&p}, {&g}, s);
    // t = 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    const double expected = 0.5 - 1e-4 * gv / (std::abs(gv) + 1e-8);
    EXPECT_NEAR(p[0], expected, 1e-12);
    EXPECT_NEAR(std::abs(p[0] - 0.5), 1e-4, 1e-6);
  }
}

TEST(Optimizer, ZeroGradient) {
  Tensor p({2}, {1.0, -1.0}), g({2});
  OptimizerState gd;
  gd.kind = OptimizerKind::gd;
  gd_step({&p}, {&g}, gd);
  EXPECT_EQ(p, Tensor({2}, {1.0, -1.0}));
  OptimizerState adam;
  adam_step({&p}, {&g}, adam);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(std::abs(p[i] - (i == 0 ? 1.0 : -1.0)), 1e-4 * 1e-6);
}

TEST(Optimizer, ShapeMismatchThrows) {
  Tensor p({2}), g({3});
  OptimizerState s;
  EXPECT_THROW(adam_step({&p}, {&g}, s), ShapeError);
  EXPECT_THROW(gd_step({&p}, {&g}, s), ShapeError);
}

// ---------------------------------------------------------------------------
// composed network

TEST(GradCheck, MicroCnnFiveLayers) {
  ScaleConfig cfg;
  cfg.input_length = 16;
  cfg.filters = {2, 2, 2};
  cfg.dense_units = 4;
  auto spec = build_cnn_scaled(cfg);
  ASSERT_LE(parameter_count(spec), 10000u);
  GradCheckOptions opt;
  opt.batch = 3;
  opt.loss = GradCheckLoss::softmax_xent;
  auto r = grad_check(spec, 7, opt);
  EXPECT_LT(r.max_relative_error, 1e-5) << r.worst;
  EXPECT_GT(r.checked, r.skipped);
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  ScaleConfig cfg;
  cfg.input_length = 32;
  cfg.filters = {2, 3, 4};
  cfg.dense_units = 5;
  auto spec = build_cnn_scaled(cfg);
  auto x = random_tensor({3, 32, 1}, 5);
  Model a(spec, 99), b(spec, 99);
  EXPECT_EQ(a.forward(x, Mode::train), b.forward(x, Mode::train));
  EXPECT_EQ(a.forward(x, Mode::train), b.forward(x, Mode::train));
  EXPECT_EQ(a.forward(x, Mode::eval), b.forward(x, Mode::eval));
}

}  // namespace
}  // namespace toolbreak
