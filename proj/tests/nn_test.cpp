#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fetalnet/model/blocks.hpp"
#include "gradcheck.hpp"

using namespace fetalnet;
using namespace fetalnet::nn;
using fetalnet::model::AttentionGate;
using fetalnet::model::ConvBlock;
using fetalnet::model::ConvLstmCell;
using fetalnet::testing::dot;
using fetalnet::testing::numeric_grad;
using fetalnet::testing::random_tensor;
using fetalnet::testing::rel_error;

namespace {

constexpr double kTol = 1e-3;

/// Checks d(probe . f())/d t against the analytic gradient `analytic` on every entry.
void expect_grad(Tensor& t, const Tensor& analytic, const std::function<double()>& loss,
                 const char* what) {
  ASSERT_EQ(t.size(), analytic.size()) << what;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double num = numeric_grad(t, i, loss);
    EXPECT_LT(rel_error(analytic[i], num), kTol) << what << " entry " << i << " analytic "
                                                 << analytic[i] << " numeric " << num;
  }
}

}  // namespace

TEST(Conv2d, OnesKernelOverOnesImage) {
  Conv2d conv(1, 1, 3, false);
  conv.weight().value.fill(1.0);
  Tensor x(1, 1, 5, 5, 1.0);
  Tensor y = conv.forward(x);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 2), 9.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 2), 6.0);
}

TEST(Conv2d, MatchesDirectSum) {
  std::mt19937_64 rng(3);
  Conv2d conv(2, 3, 3, true);
  conv.init(rng);
  conv.bias().value = random_tensor(conv.bias().value.shape(), rng);
  Tensor x = random_tensor(Shape{2, 2, 4, 5}, rng);
  Tensor y = conv.forward(x);
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 3; ++o)
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 5; ++c) {
          double s = conv.bias().value[o];
          for (int i = 0; i < 2; ++i)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = r + ky - 1, xx = c + kx - 1;
                if (yy < 0 || yy >= 4 || xx < 0 || xx >= 5) continue;
                s += conv.weight().value.at(o, i, ky, kx) * x.at(n, i, yy, xx);
              }
          EXPECT_NEAR(y.at(n, o, r, c), s, 1e-12);
        }
}

TEST(Conv2d, ChannelMismatchNamesDimensions) {
  Conv2d conv(3, 2, 3);
  try {
    conv.forward(Tensor(1, 2, 4, 4));
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("expected 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("got 2"), std::string::npos);
  }
}

class ConvGrad : public ::testing::TestWithParam<int> {};

TEST_P(ConvGrad, FiniteDifferences) {
  const int k = GetParam();
  std::mt19937_64 rng(11);
  Conv2d conv(2, 3, k, true);
  conv.init(rng);
  Tensor x = random_tensor(Shape{2, 2, 4, 3}, rng);
  Tensor probe = random_tensor(Shape{2, 3, 4, 3}, rng);
  auto loss = [&] { return dot(conv.forward(x), probe); };
  conv.weight().grad.zero();
  conv.bias().grad.zero();
  Tensor dx = conv.backward(x, probe);
  expect_grad(x, dx, loss, "x");
  expect_grad(conv.weight().value, conv.weight().grad, loss, "weight");
  expect_grad(conv.bias().value, conv.bias().grad, loss, "bias");
}

INSTANTIATE_TEST_SUITE_P(Kernels, ConvGrad, ::testing::Values(1, 3, 5));

TEST(MaxPool, SingleWindow) {
  Tensor x(1, 1, 2, 2);
  x[0] = 1, x[1] = 2, x[2] = 3, x[3] = 4;
  MaxPoolCache cache;
  Tensor y = max_pool2(x, &cache);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 4.0);
  Tensor dy(1, 1, 1, 1, 2.5);
  Tensor dx = max_pool2_backward(dy, cache);
  EXPECT_EQ(dx[3], 2.5);
  EXPECT_EQ(dx[0] + dx[1] + dx[2], 0.0);
}

TEST(MaxPool, OddSizeRejected) {
  EXPECT_THROW(max_pool2(Tensor(1, 1, 3, 4), nullptr), ContractViolation);
}

TEST(Upsample, BackwardIsAdjoint) {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor(Shape{2, 3, 4, 5}, rng);
  Tensor y = random_tensor(Shape{2, 3, 8, 10}, rng);
  const double lhs = dot(upsample_bilinear(x, 8, 10), y);
  const double rhs = dot(x, upsample_bilinear_backward(y, 4, 5));
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Upsample, ConstantStaysConstant) {
  Tensor x(1, 1, 3, 3, 0.7);
  Tensor y = upsample_bilinear(x, 6, 6);
  for (double v : y.values()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(AdaptivePool, AveragesAndAdjoint) {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor(Shape{1, 2, 4, 4}, rng);
  Tensor y = adaptive_avg_pool(x, 2, 2);
  const double expect = (x.at(0, 1, 2, 0) + x.at(0, 1, 2, 1) + x.at(0, 1, 3, 0) + x.at(0, 1, 3, 1)) / 4;
  EXPECT_NEAR(y.at(0, 1, 1, 0), expect, 1e-14);
  Tensor same = adaptive_avg_pool(x, 4, 4);
  EXPECT_EQ(same, x);
  Tensor probe = random_tensor(y.shape(), rng);
  EXPECT_NEAR(dot(y, probe), dot(x, adaptive_avg_pool_backward(probe, x.shape())), 1e-12);
}

TEST(Dropout, IdentityOutsideTraining) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor(Shape{2, 4, 3, 3}, rng);
  EXPECT_EQ(dropout2d(x, 0.5, Context{false, &rng}, nullptr), x);
  EXPECT_EQ(dropout2d(x, 0.5, Context{true, nullptr}, nullptr), x);
}

TEST(Dropout, ZeroesWholeChannelsAndRescales) {
  std::mt19937_64 rng(1);
  Tensor x(8, 16, 2, 2, 1.0);
  DropoutCache cache;
  Tensor y = dropout2d(x, 0.4, Context{true, &rng}, &cache);
  int dropped = 0;
  for (int n = 0; n < 8; ++n)
    for (int c = 0; c < 16; ++c) {
      const double v = y.at(n, c, 0, 0);
      for (int i = 0; i < 4; ++i) EXPECT_EQ(y.plane(n, c)[i], v);
      if (v == 0.0) {
        ++dropped;
      } else {
        EXPECT_NEAR(v, 1.0 / 0.6, 1e-15);
      }
    }
  EXPECT_GT(dropped, 20);
  EXPECT_LT(dropped, 80);
  Tensor g = dropout2d_backward(Tensor(x.shape(), 1.0), cache);
  EXPECT_EQ(g, y);
}

TEST(BatchNorm, TrainNormalisesAndUpdatesRunningStats) {
  BatchNorm2d bn(1);
  Tensor x(2, 1, 1, 2);
  x[0] = 1, x[1] = 2, x[2] = 3, x[3] = 4;
  Tensor y = bn.forward(x, Context{true}, nullptr);
  double mean = 0, var = 0;
  for (double v : y.values()) mean += v / 4;
  for (double v : y.values()) var += (v - mean) * (v - mean) / 4;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.25 / (1.25 + 1e-5), 1e-9);
  EXPECT_NEAR(bn.running_mean().value[0], 0.25, 1e-12);
  // unbiased variance 5/3
  EXPECT_NEAR(bn.running_var().value[0], 0.9 + 0.1 * 5.0 / 3.0, 1e-12);
}

TEST(BatchNorm, EvalUsesRunningStats) {
  BatchNorm2d bn(1);
  bn.running_mean().value[0] = 2.0;
  bn.running_var().value[0] = 4.0 - 1e-5;
  bn.gamma().value[0] = 3.0;
  bn.beta().value[0] = 1.0;
  Tensor x(1, 1, 1, 1, 6.0);
  EXPECT_NEAR(bn.forward(x, Context{false}, nullptr)[0], 3.0 * 2.0 + 1.0, 1e-12);
}

TEST(BatchNorm, GradientsBothModes) {
  for (bool train : {true, false}) {
    std::mt19937_64 rng(4);
    BatchNorm2d bn(3);
    bn.gamma().value = random_tensor(bn.gamma().value.shape(), rng);
    bn.beta().value = random_tensor(bn.beta().value.shape(), rng);
    bn.running_var().value.fill(0.5);
    Tensor x = random_tensor(Shape{2, 3, 3, 2}, rng, 2.0);
    Tensor probe = random_tensor(x.shape(), rng);
    const Context ctx{train};
    auto loss = [&] { return dot(bn.forward(x, ctx, nullptr), probe); };
    BatchNormCache cache;
    bn.forward(x, ctx, &cache);
    bn.gamma().grad.zero();
    bn.beta().grad.zero();
    Tensor dx = bn.backward(probe, cache);
    expect_grad(x, dx, loss, train ? "x train" : "x eval");
    expect_grad(bn.gamma().value, bn.gamma().grad, loss, "gamma");
    expect_grad(bn.beta().value, bn.beta().grad, loss, "beta");
  }
}

TEST(Linear, BiasPassthroughAndConstantInput) {
  Linear fc(8, 4);
  for (int k = 0; k < 4; ++k) fc.bias().value[k] = k + 1;
  Tensor y = fc.forward(Tensor(1, 2, 2, 2, 3.0));
  for (int k = 0; k < 4; ++k) EXPECT_EQ(y[k], k + 1.0);
  fc.bias().value.zero();
  fc.weight().value.fill(0.5);
  y = fc.forward(Tensor(1, 2, 2, 2, 3.0));
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(y[k], 3.0 * 0.5 * 8);
}

TEST(Linear, FiniteDifferences) {
  std::mt19937_64 rng(8);
  Linear fc(6, 4);
  fc.init(rng);
  Tensor x = random_tensor(Shape{3, 6, 1, 1}, rng);
  Tensor probe = random_tensor(Shape{3, 4, 1, 1}, rng);
  auto loss = [&] { return dot(fc.forward(x), probe); };
  fc.weight().grad.zero();
  fc.bias().grad.zero();
  Tensor dx = fc.backward(x, probe);
  expect_grad(x, dx, loss, "x");
  expect_grad(fc.weight().value, fc.weight().grad, loss, "weight");
  expect_grad(fc.bias().value, fc.bias().grad, loss, "bias");
}

TEST(ConvBlock, ShapeContract) {
  std::mt19937_64 rng(1);
  ConvBlock block(4, 8, 0.2);
  block.init(rng);
  Tensor y = block.forward(random_tensor(Shape{2, 4, 6, 6}, rng), Context{}, nullptr);
  EXPECT_EQ(y.shape(), (Shape{2, 8, 6, 6}));
  EXPECT_THROW(block.forward(Tensor(1, 3, 6, 6), Context{}, nullptr), ContractViolation);
}

TEST(ConvBlock, ZeroWeightsNegativeBiasGivesZero) {
  std::mt19937_64 rng(1);
  ConvBlock block(2, 3, 0.2);
  block.conv1().weight().value.zero();
  block.conv2().weight().value.zero();
  block.conv2().bias().value.fill(-1.0);
  Tensor y = block.forward(random_tensor(Shape{1, 2, 4, 4}, rng), Context{false, &rng}, nullptr);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvBlock, EvalModeIsDeterministic) {
  std::mt19937_64 rng(1);
  ConvBlock block(2, 3, 0.5);
  block.init(rng);
  Tensor x = random_tensor(Shape{1, 2, 4, 4}, rng);
  EXPECT_EQ(block.forward(x, Context{false, &rng}, nullptr),
            block.forward(x, Context{false, &rng}, nullptr));
}

TEST(ConvBlock, FiniteDifferencesWithFrozenDropout) {
  std::mt19937_64 init(21);
  ConvBlock block(2, 3, 0.3);
  block.init(init);
  Tensor x = random_tensor(Shape{2, 2, 4, 4}, init);
  Tensor probe = random_tensor(Shape{2, 3, 4, 4}, init);
  std::mt19937_64 rng;
  auto run = [&](ConvBlock::Cache* cache) {
    rng.seed(99);
    return block.forward(x, Context{true, &rng}, cache);
  };
  auto loss = [&] { return dot(run(nullptr), probe); };
  ConvBlock::Cache cache;
  run(&cache);
  block.visit("b", [](const std::string&, Param& p) {
    if (p.trainable) p.grad.zero();
  });
  Tensor dx = block.backward(probe, cache);
  expect_grad(x, dx, loss, "x");
  block.visit("b", [&](const std::string& name, Param& p) {
    if (p.trainable) expect_grad(p.value, p.grad, loss, name.c_str());
  });
}

TEST(AttentionGate, ZeroPsiHalvesInput) {
  std::mt19937_64 rng(2);
  AttentionGate ag(3, 5, 2);
  ag.init(rng);
  ag.psi().weight().value.zero();
  Tensor x = random_tensor(Shape{1, 3, 4, 4}, rng);
  Tensor g = random_tensor(Shape{1, 5, 2, 2}, rng);
  AttentionGate::Cache cache;
  Tensor y = ag.forward(x, g, Context{}, &cache);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], 0.5 * x[i]);
}

TEST(AttentionGate, ScalarHandEvaluation) {
  AttentionGate ag(1, 1, 1);
  ag.wx().weight().value.fill(1.0);
  ag.wg().weight().value.fill(1.0);
  ag.psi().weight().value.fill(1.0);
  Tensor x(1, 1, 1, 1, 2.0);
  Tensor g(1, 1, 1, 1, -2.0);
  AttentionGate::Cache cache;
  Tensor y = ag.forward(x, g, Context{}, &cache);
  EXPECT_DOUBLE_EQ(cache.alpha[0], 0.5);
  EXPECT_DOUBLE_EQ(y[0], 1.0);
}

TEST(AttentionGate, ShapeContract) {
  const int n = 4;
  AttentionGate ag(8 * n, 16 * n, 4 * n);
  std::mt19937_64 rng(1);
  ag.init(rng);
  Tensor y = ag.forward(Tensor(1, 8 * n, 28, 28), Tensor(1, 16 * n, 14, 14), Context{}, nullptr);
  EXPECT_EQ(y.shape(), (Shape{1, 8 * n, 28, 28}));
  EXPECT_THROW(ag.forward(Tensor(1, 8 * n, 28, 28), Tensor(1, 16 * n, 10, 10), Context{}, nullptr),
               ContractViolation);
}

TEST(AttentionGate, CoefficientsInUnitIntervalAndGradients) {
  std::mt19937_64 rng(6);
  AttentionGate ag(3, 4, 2);
  ag.init(rng);
  ag.wg().bias().value = random_tensor(ag.wg().bias().value.shape(), rng);
  ag.psi().bias().value = random_tensor(ag.psi().bias().value.shape(), rng);
  Tensor x = random_tensor(Shape{2, 3, 4, 4}, rng, 3.0);
  Tensor g = random_tensor(Shape{2, 4, 2, 2}, rng, 3.0);
  Tensor probe = random_tensor(x.shape(), rng);
  AttentionGate::Cache cache;
  ag.forward(x, g, Context{}, &cache);
  for (double a : cache.alpha.values()) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
  auto loss = [&] { return dot(ag.forward(x, g, Context{}, nullptr), probe); };
  ag.visit("ag", [](const std::string&, Param& p) { p.grad.zero(); });
  auto [dx, dg] = ag.backward(probe, g, cache);
  expect_grad(x, dx, loss, "x");
  expect_grad(g, dg, loss, "g");
  ag.visit("ag", [&](const std::string& name, Param& p) {
    expect_grad(p.value, p.grad, loss, name.c_str());
  });
}

TEST(ConvLstm, ZeroWeightsFixedPoint) {
  ConvLstmCell cell(2, 3, 3);
  std::mt19937_64 rng(1);
  auto state = cell.zero_state(1, 2, 2);
  Tensor h = cell.step(random_tensor(Shape{1, 2, 2, 2}, rng), state, Context{}, nullptr);
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
  for (double v : state.c.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvLstm, ScalarRecurrenceOracle) {
  ConvLstmCell cell(1, 1, 1);
  cell.gates().weight().value.fill(1.0);
  auto state = cell.zero_state(1, 1, 1);
  ConvLstmCell::StepCache cache;
  Tensor h = cell.step(Tensor(1, 1, 1, 1, 1.0), state, Context{}, &cache);
  const double s1 = 1.0 / (1.0 + std::exp(-1.0));
  const double c1 = s1 * std::tanh(1.0);
  EXPECT_NEAR(cache.i[0], s1, 1e-15);
  EXPECT_NEAR(cache.f[0], s1, 1e-15);
  EXPECT_NEAR(cache.o[0], s1, 1e-15);
  EXPECT_NEAR(cache.g[0], std::tanh(1.0), 1e-15);
  EXPECT_NEAR(state.c[0], c1, 1e-15);
  EXPECT_NEAR(h[0], s1 * std::tanh(c1), 1e-15);
}

TEST(ConvLstm, StateShapeMismatch) {
  ConvLstmCell cell(2, 3, 3);
  auto state = cell.zero_state(1, 3, 3);
  EXPECT_THROW(cell.step(Tensor(1, 2, 2, 2), state, Context{}, nullptr), ContractViolation);
}

TEST(ConvLstm, GateRangesAndBpttGradients) {
  std::mt19937_64 rng(13);
  ConvLstmCell cell(2, 3, 3);
  cell.init(rng);
  cell.gates().bias().value = random_tensor(cell.gates().bias().value.shape(), rng);
  std::vector<Tensor> xs{random_tensor(Shape{2, 2, 3, 3}, rng), random_tensor(Shape{2, 2, 3, 3}, rng),
                         random_tensor(Shape{2, 2, 3, 3}, rng)};
  std::vector<Tensor> probes{random_tensor(Shape{2, 3, 3, 3}, rng),
                             random_tensor(Shape{2, 3, 3, 3}, rng),
                             random_tensor(Shape{2, 3, 3, 3}, rng)};
  std::vector<ConvLstmCell::StepCache> caches(3);
  auto run = [&](bool keep) {
    auto state = cell.zero_state(2, 3, 3);
    double s = 0.0;
    for (std::size_t t = 0; t < 3; ++t)
      s += dot(cell.step(xs[t], state, Context{}, keep ? &caches[t] : nullptr), probes[t]);
    return s;
  };
  run(true);
  for (const auto& c : caches) {
    for (const Tensor* gate : {&c.i, &c.f, &c.o})
      for (double v : gate->values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
    for (double v : c.g.values()) EXPECT_LT(std::abs(v), 1.0);
  }
  cell.gates().weight().grad.zero();
  cell.gates().bias().grad.zero();
  Tensor dh(2, 3, 3, 3), dc(2, 3, 3, 3);
  std::vector<Tensor> dxs(3);
  for (int t = 2; t >= 0; --t) {
    dh += probes[static_cast<std::size_t>(t)];
    dxs[static_cast<std::size_t>(t)] = cell.step_backward(dh, dc, caches[static_cast<std::size_t>(t)]);
  }
  auto loss = [&] { return run(false); };
  for (std::size_t t = 0; t < 3; ++t) expect_grad(xs[t], dxs[t], loss, "x_t");
  expect_grad(cell.gates().weight().value, cell.gates().weight().grad, loss, "gates.weight");
  expect_grad(cell.gates().bias().value, cell.gates().bias().grad, loss, "gates.bias");
}
