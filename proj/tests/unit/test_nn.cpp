#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "semlink/error.hpp"
#include "semlink/gradcheck.hpp"
#include "semlink/models.hpp"
#include "semlink/nn.hpp"
#include "semlink/rng.hpp"

namespace semlink::nn {
namespace {

// Test-local central differences, kept independent of nn::grad_check.
double fd_max_error(std::vector<Parameter*> params, const std::function<double()>& loss,
                    const std::vector<std::vector<double>>& analytic, double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) {
      double& v = params[k]->value[i];
      const double saved = v;
      v = saved + h;
      const double up = loss();
      v = saved - h;
      const double down = loss();
      v = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)}));
    }
  }
  return worst;
}

std::vector<double> direct_conv(const std::vector<double>& x, std::size_t channels, std::size_t length,
                                const std::vector<double>& w, const std::vector<double>& b, std::size_t kernel) {
  // Explicitly padded buffer: 1 zero on the left, 2 on the right for kernel 4.
  const std::size_t left = (kernel - 1) / 2, right = kernel / 2;
  const std::size_t padded_len = length + left + right;
  std::vector<double> padded(channels * padded_len, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < length; ++j) padded[c * padded_len + left + j] = x[c * length + j];
  }
  const std::size_t filters = b.size();
  std::vector<double> y(filters * length);
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t j = 0; j < length; ++j) {
      double acc = b[f];
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t k = 0; k < kernel; ++k) acc += w[(f * channels + c) * kernel + k] * padded[c * padded_len + j + k];
      }
      y[f * length + j] = acc;
    }
  }
  return y;
}

TEST(Dense, ForwardCases) {
  std::vector<double> x{1.5, -2.0, 0.25};
  std::vector<double> eye{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::vector<double> zero_b(3, 0.0);
  EXPECT_EQ(dense_forward(x, eye, zero_b, Activation::kLinear), x);
  std::vector<double> zeros(3, 0.0), b{0.1, -0.2, 0.3};
  EXPECT_EQ(dense_forward(zeros, eye, b, Activation::kLinear), b);
  std::vector<double> w1{1.0}, b1{0.0}, neg{-1.0};
  EXPECT_EQ(dense_forward(neg, w1, b1, Activation::kRelu), std::vector<double>{0.0});
  std::vector<double> bad{1, 2};
  EXPECT_THROW(dense_forward(x, bad, b, Activation::kLinear), Error);
}

TEST(Conv1d, ZeroKernelGivesZero) {
  Tensor x({2, 8}, std::vector<double>(16, 3.0));
  std::vector<double> w(8 * 2 * 4, 0.0), b(8, 0.0);
  auto y = conv1d_forward(x, w, b, 4, Activation::kRelu);
  EXPECT_EQ(y.shape, (std::vector<std::size_t>{8, 8}));
  for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, ShiftKernelIsIdentityOnRamp) {
  std::vector<double> ramp(8);
  std::iota(ramp.begin(), ramp.end(), 1.0);
  Tensor x({1, 8}, ramp);
  std::vector<double> w{0, 1, 0, 0}, b{0};
  auto y = conv1d_forward(x, w, b, 4, Activation::kLinear);
  EXPECT_EQ(y.data, direct_conv(ramp, 1, 8, w, b, 4));
  for (std::size_t j = 1; j + 2 < 8; ++j) EXPECT_EQ(y.data[j], ramp[j]);
}

TEST(Conv1d, OnesKernelOnConstantInput) {
  const double c = 2.5;
  Tensor x({1, 10}, std::vector<double>(10, c));
  std::vector<double> w(4, 1.0), b{0};
  auto y = conv1d_forward(x, w, b, 4, Activation::kLinear);
  for (std::size_t j = 1; j + 2 < 10; ++j) EXPECT_DOUBLE_EQ(y.data[j], 4 * c);
  // Edges see the zero padding: j=0 reads -1..2, j=8 reads 7..10, j=9 reads 8..11.
  EXPECT_DOUBLE_EQ(y.data[0], 3 * c);
  EXPECT_DOUBLE_EQ(y.data[8], 3 * c);
  EXPECT_DOUBLE_EQ(y.data[9], 2 * c);
}

TEST(Conv1d, MatchesDirectConvolutionOnRandomInputs) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t channels = 1 + rng.below(3), filters = 1 + rng.below(4), length = 4 + rng.below(20);
    std::vector<double> x(channels * length), w(filters * channels * 4), b(filters);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : w) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    auto y = conv1d_forward(Tensor({channels, length}, x), w, b, 4, Activation::kLinear);
    auto expected = direct_conv(x, channels, length, w, b, 4);
    ASSERT_EQ(y.data.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y.data[i], expected[i], 1e-12);
  }
}

TEST(MaxPool1d, Cases) {
  EXPECT_EQ(maxpool1d_forward(Tensor({1, 4}, {1, 3, 2, 0})).data, (std::vector<double>{3, 2}));
  EXPECT_EQ(maxpool1d_forward(Tensor({1, 6}, std::vector<double>(6, 7.0))).data, std::vector<double>(3, 7.0));
  auto odd = maxpool1d_forward(Tensor({1, 5}, {1, 2, 3, 4, 5}));
  EXPECT_EQ(odd.shape[1], 2u);
  EXPECT_EQ(odd.data, (std::vector<double>{2, 4}));
  EXPECT_THROW(maxpool1d_forward(Tensor({1, 1}, {1})), Error);
}

TEST(MaxPool1d, EqualsPerWindowMaxAndNeverExceedsInputMax) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 2 + rng.below(30);
    std::vector<double> x(2 * len);
    for (double& v : x) v = rng.uniform(-5, 5);
    auto y = maxpool1d_forward(Tensor({2, len}, x));
    const double top = *std::max_element(x.begin(), x.end());
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const double v = y.data[c * (len / 2) + j];
        EXPECT_EQ(v, std::max(x[c * len + 2 * j], x[c * len + 2 * j + 1]));
        EXPECT_LE(v, top);
      }
    }
  }
}

TEST(Dropout, RateZeroAndEvalAreIdentity) {
  std::vector<double> x{1, -2, 3, 4};
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::kTrain, 1, 0), x);
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::kEval, 1, 0), x);
  EXPECT_EQ(dropout_forward(x, 0.5, Mode::kEval, 1, 0), x);
  EXPECT_THROW(dropout_forward(x, 1.0, Mode::kTrain, 1, 0), Error);
}

TEST(Dropout, TrainModeExpectationMonteCarlo) {
  const double value = 3.0;
  double total = 0.0;
  const std::size_t trials = 100000;
  for (std::size_t i = 0; i < trials; ++i) total += dropout_forward(std::vector<double>{value}, 0.5, Mode::kTrain, 77, i)[0];
  EXPECT_NEAR(total / trials, value, 0.02 * value);
}

TEST(Dropout, MaskDeterministicPerSeedAndCall) {
  auto a = dropout_mask(64, 0.5, 3, 10);
  EXPECT_EQ(a, dropout_mask(64, 0.5, 3, 10));
  EXPECT_NE(a, dropout_mask(64, 0.5, 3, 11));
  for (double m : a) EXPECT_TRUE(m == 0.0 || m == 2.0);
}

TEST(Softmax, Cases) {
  EXPECT_EQ(softmax(std::vector<double>{0, 0}), (std::vector<double>{0.5, 0.5}));
  auto big = softmax(std::vector<double>{1000, 0});
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_GE(big[1], 0.0);
  EXPECT_TRUE(std::isfinite(big[1]));
  EXPECT_THROW(softmax(std::vector<double>{}), Error);
  EXPECT_THROW(softmax(std::vector<double>{NAN, 1}), Error);
}

TEST(Softmax, ShiftInvariantAndNormalised) {
  Rng rng(3);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> z(n);
    const double scale = trial % 2 == 0 ? 1000.0 : 5.0;
    for (double& v : z) v = rng.uniform(-scale, scale);
    auto p = softmax(z);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    ASSERT_NEAR(sum, 1.0, 1e-9);
    for (double v : p) ASSERT_GE(v, 0.0);
    if (trial % 100 == 0) {
      const double c = rng.uniform(-50, 50);
      std::vector<double> shifted = z;
      for (double& v : shifted) v += c;
      auto q = softmax(shifted);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
    }
  }
}

TEST(CrossEntropy, Cases) {
  std::vector<double> target(12, 0.0);
  target[4] = 1.0;
  EXPECT_EQ(cross_entropy(target, target), 0.0);
  EXPECT_FALSE(std::signbit(cross_entropy(target, target)));
  std::vector<double> uniform(12, 1.0 / 12.0);
  EXPECT_NEAR(cross_entropy(target, uniform), 2.4849066497880004, 1e-12);
  std::vector<double> miss(12, 0.0);
  miss[0] = 1.0;
  EXPECT_NEAR(cross_entropy(target, miss), 27.631021115928547, 1e-9);
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(std::vector<double>{1, 0, 0}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1u);
}

TEST(Backward, ZeroWeightDenseSoftmaxGradient) {
  const std::vector<LayerSpec> specs = {DenseSpec{3, 4, Activation::kLinear}, SoftmaxSpec{}};
  Sequential net(specs, 1);
  auto params = net.parameters();
  std::fill(params[0]->value.begin(), params[0]->value.end(), 0.0);
  params[1]->value = {0.3, -0.1, 0.2, 0.0};
  const std::vector<double> x{0.5, -1.0, 2.0};
  const std::size_t target = 2;

  auto probs = net.forward(Tensor::vector(x), Mode::kEval).data;
  auto g = probs;
  g[target] -= 1.0;
  zero_grad(params);
  net.backward(Tensor::vector(g), 1);

  const auto expected_p = softmax(params[1]->value);
  for (std::size_t i = 0; i < 4; ++i) {
    const double gi = expected_p[i] - (i == target ? 1.0 : 0.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(params[0]->grad[i * 3 + j], gi * x[j], 1e-15);
  }
  auto loss = [&] { return cross_entropy(target, net.forward(Tensor::vector(x), Mode::kEval).data); };
  EXPECT_LE(fd_max_error(params, loss, {params[0]->grad, params[1]->grad}), 1e-8);
}

TEST(Backward, SoftmaxJacobianVectorProduct) {
  Softmax sm;
  const std::vector<double> z{0.2, -1.0, 0.7};
  sm.forward(Tensor::vector(z), Mode::kEval);
  const std::vector<double> upstream{0.3, -0.5, 1.1};
  auto g = sm.backward(Tensor::vector(upstream)).data;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> up = z, down = z;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    auto pu = softmax(up), pd = softmax(down);
    double numeric = 0.0;
    for (std::size_t k = 0; k < 3; ++k) numeric += upstream[k] * (pu[k] - pd[k]) / 2e-6;
    EXPECT_NEAR(g[i], numeric, 1e-8);
  }
}

TEST(Backward, DuplicatedSampleMatchesSingle) {
  auto model = build_baseline(4);
  Sample s;
  s.embedding.resize(100);
  Rng rng(2);
  for (double& v : s.embedding) v = rng.uniform(-1, 1);
  s.label = 7;
  std::vector<const Sample*> one{&s}, two{&s, &s};
  const double l1 = model->accumulate_gradients(one, Mode::kEval);
  std::vector<std::vector<double>> g1;
  for (auto* p : model->parameters()) g1.push_back(p->grad);
  const double l2 = model->accumulate_gradients(two, Mode::kEval);
  EXPECT_NEAR(l1, l2, 1e-15);
  auto params = model->parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < g1[k].size(); ++i) EXPECT_NEAR(params[k]->grad[i], g1[k][i], 1e-15);
  }
}

TEST(Backward, RandomThreeLayerNetsMatchFiniteDifferences) {
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    Rng rng(100 + draw);
    const std::size_t in = 2 + rng.below(6), h1 = 2 + rng.below(6), h2 = 2 + rng.below(6), out = 2 + rng.below(5);
    const std::vector<LayerSpec> specs = {DenseSpec{in, h1, Activation::kRelu}, DenseSpec{h1, h2, Activation::kRelu},
                                          DenseSpec{h2, out, Activation::kLinear}, SoftmaxSpec{}};
    Sequential net(specs, draw);
    auto params = net.parameters();
    for (auto* p : params) {
      for (double& v : p->value) v = rng.uniform(-1, 1);
    }
    std::vector<double> x(in);
    for (double& v : x) v = rng.uniform(-1, 1);
    const std::size_t target = rng.below(out);

    zero_grad(params);
    auto g = net.forward(Tensor::vector(x), Mode::kEval).data;
    g[target] -= 1.0;
    net.backward(Tensor::vector(g), 1);
    std::vector<std::vector<double>> analytic;
    for (auto* p : params) analytic.push_back(p->grad);
    auto loss = [&] { return cross_entropy(target, net.forward(Tensor::vector(x), Mode::kEval).data); };
    EXPECT_LE(fd_max_error(params, loss, analytic), 1e-5) << "draw " << draw;
  }
}

TEST(Backward, ConvPoolStackMatchesFiniteDifferences) {
  const std::vector<LayerSpec> specs = {Conv1dSpec{1, 3, 4, Activation::kRelu}, MaxPool1dSpec{},
                                        Conv1dSpec{3, 2, 4, Activation::kRelu}, MaxPool1dSpec{}, FlattenSpec{},
                                        DenseSpec{8, 5, Activation::kLinear}, SoftmaxSpec{}};
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    Sequential net(specs, draw);
    Rng rng(200 + draw);
    auto params = net.parameters();
    for (auto* p : params) {
      if (p->shape.size() == 1) {
        for (double& v : p->value) v = rng.uniform(-0.1, 0.1);
      }
    }
    std::vector<double> x(16);
    for (double& v : x) v = rng.uniform(-1, 1);
    const std::size_t target = rng.below(5);
    zero_grad(params);
    auto g = net.forward(Tensor({1, 16}, x), Mode::kEval).data;
    g[target] -= 1.0;
    net.backward(Tensor::vector(g), 1);
    std::vector<std::vector<double>> analytic;
    for (auto* p : params) analytic.push_back(p->grad);
    auto loss = [&] { return cross_entropy(target, net.forward(Tensor({1, 16}, x), Mode::kEval).data); };
    EXPECT_LE(fd_max_error(params, loss, analytic), 1e-5) << "draw " << draw;
  }
}

TEST(Forward, RepeatedCallsAreBitIdentical) {
  auto model = build_fusion(3);
  Sample s;
  s.embedding.assign(100, 0.1);
  s.image.resize(kImageFeatureDim);
  Rng rng(1);
  for (double& v : s.image) v = rng.uniform();
  const auto a = model->forward(s, Mode::kEval);
  EXPECT_EQ(a, model->forward(s, Mode::kEval));
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  Parameter p("theta", {3});
  p.value = {0.5, -1.0, 2.0};
  std::vector<Parameter*> list{&p};
  Adam adam(0.01);
  for (int i = 0; i < 50; ++i) adam.step(list);
  EXPECT_EQ(p.value, (std::vector<double>{0.5, -1.0, 2.0}));
  EXPECT_EQ(adam.state().t, 50u);
}

TEST(Adam, FirstStepMagnitude) {
  Parameter p("theta", {1});
  p.grad = {0.1};
  std::vector<Parameter*> list{&p};
  Adam adam(0.01);
  adam.step(list);
  EXPECT_NEAR(p.value[0], -0.009999999000000101, 1e-12);
  EXPECT_EQ(adam.state().t, 1u);
}

TEST(Adam, ConstantGradientMovesMonotonically) {
  Parameter p("theta", {1});
  std::vector<Parameter*> list{&p};
  Adam adam(0.01);
  p.grad = {-0.3};
  adam.step(list);
  const double after_one = p.value[0];
  adam.step(list);
  EXPECT_GT(after_one, 0.0);
  EXPECT_GT(p.value[0], after_one);
}

TEST(GradCheck, LinearOneParameterNetIsExact) {
  Parameter w("w", {1});
  w.value = {0.7};
  std::vector<Parameter*> list{&w};
  const double x = 1.3;
  auto loss = [&] { return w.value[0] * x; };
  auto grads = [&] { w.grad = {x}; };
  EXPECT_LE(grad_check(list, loss, grads).max_rel_error, 1e-9);
}

TEST(GradCheck, DetectsWrongGradient) {
  Parameter w("w", {1});
  w.value = {0.7};
  std::vector<Parameter*> list{&w};
  auto loss = [&] { return w.value[0] * w.value[0]; };
  auto grads = [&] { w.grad = {0.0}; };
  EXPECT_GT(grad_check(list, loss, grads).max_rel_error, 0.5);
}

TEST(GradCheck, SkipsCoordinatesThatCrossARelu) {
  // Pre-activation 2e-7 sits inside the +/- 1e-6 bias step, so the central
  // difference sees half a slope.
  Dense layer(1, 1, Activation::kRelu, 0);
  layer.weights().value = {1.0};
  layer.bias().value = {2e-7};
  std::vector<Parameter*> params = layer.parameters();
  auto loss = [&] { return layer.forward(Tensor::vector({0.0}), Mode::kEval).data[0]; };
  auto grads = [&] {
    zero_grad(params);
    loss();
    layer.backward(Tensor::vector({1.0}));
  };
  auto pattern = [&] {
    std::vector<std::uint8_t> out;
    layer.append_pattern(out);
    return out;
  };
  EXPECT_GT(grad_check(params, loss, grads).max_rel_error, 0.3);
  auto r = grad_check(params, loss, grads, {}, pattern);
  EXPECT_EQ(r.kinks_skipped, 1u);
  EXPECT_EQ(r.coords_checked, 1u);
  EXPECT_LE(r.max_rel_error, 1e-9);
}

TEST(GradCheck, BaselineNetworkAllCoordinates) {
  auto model = build_baseline(21);
  Rng rng(21);
  for (auto* p : model->parameters()) {
    if (p->shape.size() == 1) {
      for (double& v : p->value) v = rng.uniform(-0.1, 0.1);
    }
  }
  Sample s;
  s.embedding.resize(100);
  for (double& v : s.embedding) v = rng.uniform(-1, 1);
  s.label = 3;
  auto r = grad_check_classifier(*model, std::span<const Sample>(&s, 1));
  EXPECT_EQ(r.coords_checked, 26124u);
  EXPECT_LE(r.max_rel_error, 1e-5) << r.worst_parameter;
}

TEST(GradCheck, FusionNetworkSampledCoordinates) {
  auto sweep = grad_check_sweep(GradCheckTarget::kFusion, 2, 5, 16);
  EXPECT_LE(sweep.max_rel_error, 1e-5) << sweep.worst;
  EXPECT_GT(sweep.coords_checked, 100u);
  EXPECT_LE(sweep.kinks_skipped * 20, sweep.coords_checked);
}

}  // namespace
}  // namespace semlink::nn
