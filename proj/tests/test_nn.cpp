#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "grad_check.hpp"
#include "rtgan/nn/adam.hpp"
#include "rtgan/nn/ops.hpp"

namespace rtgan {
namespace {

using test::random_leaf;
using test::TensorD;
using test::VarD;
namespace ops = nn;

// Reduces any tensor to a scalar with fixed random weights so every output element matters.
VarD probe_sum(const VarD& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const VarD w = random_leaf(y.shape(), rng);
  const VarD wc = w.detach();
  auto prod = nn::make_result<double>(
      TensorD::constant({1}, y.value().data().dot(wc.value().data())), {y}, [wc](nn::Node<double>& self) {
        self.parents[0]->accumulate(wc.value().data() * self.grad[0]);
      });
  return prod;
}

TEST(Conv2d, ForwardMatchesDirectSum) {
  std::mt19937_64 rng(1);
  const VarD x = random_leaf({2, 3, 7, 6}, rng), w = random_leaf({4, 3, 3, 3}, rng), b = random_leaf({4}, rng);
  const VarD y = ops::conv2d(x, w, b, {2, 1});
  ASSERT_EQ(y.shape(), (nn::Shape{2, 4, 4, 3}));
  const auto& xv = x.value().data();
  const auto& wv = w.value().data();
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 4; ++o) {
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 3; ++j) {
          double acc = b.value().data()[o];
          for (int c = 0; c < 3; ++c) {
            for (int ki = 0; ki < 3; ++ki) {
              for (int kj = 0; kj < 3; ++kj) {
                const int yy = i * 2 - 1 + ki, xx = j * 2 - 1 + kj;
                if (yy < 0 || yy >= 7 || xx < 0 || xx >= 6) continue;
                acc += xv[((n * 3 + c) * 7 + yy) * 6 + xx] * wv[((o * 3 + c) * 3 + ki) * 3 + kj];
              }
            }
          }
          EXPECT_NEAR(y.value().data()[((n * 4 + o) * 4 + i) * 3 + j], acc, 1e-12);
        }
      }
    }
  }
}

TEST(Conv2d, Gradients) {
  std::mt19937_64 rng(2);
  const VarD x = random_leaf({2, 2, 6, 5}, rng), w = random_leaf({3, 2, 3, 3}, rng), b = random_leaf({3}, rng);
  test::expect_gradients_match({x, w, b}, [&] { return probe_sum(ops::conv2d(x, w, b, {2, 1})); });
}

TEST(Conv3d, GradientsWithAsymmetricDepthPadding) {
  std::mt19937_64 rng(3);
  const VarD x = random_leaf({1, 2, 3, 6, 6}, rng), w = random_leaf({2, 2, 4, 4, 4}, rng), b = random_leaf({2}, rng);
  ops::Conv3dOptions opt;
  opt.stride = 2;
  opt.padding = 1;
  opt.pad_front = 1;
  opt.pad_back = 2;
  const VarD y = ops::conv3d(x, w, b, opt);
  EXPECT_EQ(y.shape(), (nn::Shape{1, 2, 3, 3, 3}));
  test::expect_gradients_match({x, w, b}, [&] { return probe_sum(ops::conv3d(x, w, b, opt)); });
}

TEST(ConvTranspose2d, ShapeAndGradients) {
  std::mt19937_64 rng(4);
  const VarD x = random_leaf({2, 3, 3, 4}, rng), w = random_leaf({3, 2, 3, 3}, rng), b = random_leaf({2}, rng);
  const ops::ConvTranspose2dOptions opt{2, 1, 1};
  EXPECT_EQ(ops::conv_transpose2d(x, w, b, opt).shape(), (nn::Shape{2, 2, 6, 8}));
  test::expect_gradients_match({x, w, b}, [&] { return probe_sum(ops::conv_transpose2d(x, w, b, opt)); });
}

// A transposed convolution is the adjoint of the matching strided convolution:
// <conv(x), y> = <x, conv_transpose(y)> with zero biases.
TEST(ConvTranspose2d, IsAdjointOfConv) {
  std::mt19937_64 rng(5);
  const VarD x = random_leaf({1, 2, 8, 8}, rng), w = random_leaf({3, 2, 3, 3}, rng);
  const VarD zb3(TensorD::zeros({3})), zb2(TensorD::zeros({2}));
  const VarD cx = ops::conv2d(x, w, zb3, {2, 1});
  const VarD y = random_leaf(cx.shape(), rng);
  const VarD ty = ops::conv_transpose2d(y, w, zb2, {2, 1, 1});
  ASSERT_EQ(ty.shape(), x.shape());
  EXPECT_NEAR(cx.value().data().dot(y.value().data()), x.value().data().dot(ty.value().data()), 1e-10);
}

TEST(ReflectionPad, ValuesAndGradients) {
  TensorD t({1, 1, 2, 3});
  t.data() << 1, 2, 3, 4, 5, 6;
  const VarD x(t, true);
  const VarD y = ops::reflection_pad2d(x, nn::Index{1});
  ASSERT_EQ(y.shape(), (nn::Shape{1, 1, 4, 5}));
  Eigen::VectorXd expected(20);
  expected << 5, 4, 5, 6, 5, 2, 1, 2, 3, 2, 5, 4, 5, 6, 5, 2, 1, 2, 3, 2;
  EXPECT_EQ(y.value().data(), expected);
  std::mt19937_64 rng(6);
  const VarD z = random_leaf({2, 2, 4, 5}, rng);
  test::expect_gradients_match({z}, [&] { return probe_sum(ops::reflection_pad2d(z, nn::Index{2})); });
}

TEST(InstanceNorm, NormalizesAndGradients) {
  std::mt19937_64 rng(7);
  const VarD x = random_leaf({2, 3, 4, 5}, rng, -2.0, 3.0);
  const VarD y = ops::instance_norm(x);
  for (int g = 0; g < 6; ++g) {
    const auto seg = y.value().data().segment(g * 20, 20);
    EXPECT_NEAR(seg.mean(), 0.0, 1e-12);
    EXPECT_NEAR((seg.array() - seg.mean()).square().mean(), 1.0, 1e-3);
  }
  test::expect_gradients_match({x}, [&] { return probe_sum(ops::instance_norm(x)); });
}

TEST(Activations, Gradients) {
  std::mt19937_64 rng(8);
  // Keep inputs away from the kinks at zero.
  VarD x = random_leaf({3, 7}, rng, 0.1, 1.0);
  for (nn::Index i = 0; i < x.value().size(); i += 2) x.mutable_value().data()[i] *= -1.0;
  test::expect_gradients_match({x}, [&] { return probe_sum(ops::relu(x)); });
  test::expect_gradients_match({x}, [&] { return probe_sum(ops::leaky_relu(x, 0.2)); });
  test::expect_gradients_match({x}, [&] { return probe_sum(ops::tanh(x)); });
}

TEST(Structural, ConcatStackAddScale) {
  std::mt19937_64 rng(9);
  const VarD a = random_leaf({2, 1, 3, 4}, rng), b = random_leaf({2, 2, 3, 4}, rng), c = random_leaf({2, 1, 3, 4}, rng);
  const VarD cat = ops::concat_channels<double>({a, b});
  EXPECT_EQ(cat.shape(), (nn::Shape{2, 3, 3, 4}));
  EXPECT_EQ(cat.value().data()[12], b.value().data()[0]);
  EXPECT_EQ(cat.value().data()[36], a.value().data()[12]);
  EXPECT_EQ(cat.value().data()[48], b.value().data()[24]);
  test::expect_gradients_match({a, b}, [&] { return probe_sum(ops::concat_channels<double>({a, b})); });
  const VarD st = ops::stack_depth<double>({a, c, a});
  EXPECT_EQ(st.shape(), (nn::Shape{2, 1, 3, 3, 4}));
  test::expect_gradients_match({a, c}, [&] { return probe_sum(ops::stack_depth<double>({a, c, a})); });
  test::expect_gradients_match({a, c}, [&] { return probe_sum(ops::scale(ops::add(a, c), 0.7)); });
}

TEST(Losses, ValuesAndGradients) {
  std::mt19937_64 rng(10);
  const VarD z = random_leaf({2, 1, 3, 3}, rng, -3.0, 3.0);
  const double z0 = z.value().data()[0];
  TensorD one({1});
  one.data()[0] = z0;
  EXPECT_NEAR(ops::bce_with_logits(VarD(one), true).value().data()[0], std::log1p(std::exp(-z0)), 1e-12);
  EXPECT_NEAR(ops::bce_with_logits(VarD(one), false).value().data()[0], std::log1p(std::exp(z0)), 1e-12);
  EXPECT_NEAR(ops::mse_to_constant(VarD(one), 1.0).value().data()[0], (z0 - 1) * (z0 - 1), 1e-12);
  test::expect_gradients_match({z}, [&] { return ops::bce_with_logits(z, true); });
  test::expect_gradients_match({z}, [&] { return ops::bce_with_logits(z, false); });
  test::expect_gradients_match({z}, [&] { return ops::mse_to_constant(z, 0.0); });
  const VarD p = random_leaf({2, 3}, rng, 1.0, 2.0), q = random_leaf({2, 3}, rng, -2.0, -1.0);
  EXPECT_NEAR(ops::l1_mean(p, q).value().data()[0], (p.value().data() - q.value().data()).cwiseAbs().mean(), 1e-12);
  test::expect_gradients_match({p, q}, [&] { return ops::l1_mean(p, q); });
  test::expect_gradients_match({p, q}, [&] {
    return ops::weighted_sum<double>({ops::l1_mean(p, q), ops::mse_to_constant(p, 1.0)}, {0.3, 2.0});
  });
}

TEST(Autograd, SharedSubgraphAccumulatesAndDetachCuts) {
  std::mt19937_64 rng(11);
  const VarD x = random_leaf({4}, rng, 0.5, 1.0);
  const VarD y = ops::tanh(x);
  test::expect_gradients_match({x}, [&] {
    const VarD t = ops::tanh(x);
    return probe_sum(ops::add(t, ops::scale(t, 2.0)));
  });
  VarD x2 = random_leaf({4}, rng);
  nn::backward(probe_sum(ops::add(ops::tanh(x2).detach(), x2)));
  std::mt19937_64 probe_rng(99);
  const VarD w = random_leaf({4}, probe_rng);
  EXPECT_TRUE(x2.grad().isApprox(w.value().data()));
  EXPECT_THROW(nn::backward(y), ContractError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterList<float> params;
  Tensor<float> t({3});
  t.data() << 1.0f, -2.0f, 0.5f;
  params.push_back({"p", Var<float>(t, true)});
  nn::Adam<float> opt(params, {});
  auto loss = nn::weighted_sum<float>({nn::l1_mean(params[0].var, Var<float>(Tensor<float>::zeros({3})))}, {1.0f});
  nn::backward(loss);
  opt.step();
  // m_hat = g and v_hat = g^2, so each coordinate moves by lr * sign(g) up to eps.
  const auto& v = params[0].var.value().data();
  EXPECT_NEAR(v[0], 1.0f - 2e-4f, 1e-6);
  EXPECT_NEAR(v[1], -2.0f + 2e-4f, 1e-6);
  EXPECT_NEAR(v[2], 0.5f - 2e-4f, 1e-6);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, SkipsParametersWithoutGradient) {
  ParameterList<float> params;
  params.push_back({"a", Var<float>(Tensor<float>::constant({2}, 1.0f), true)});
  params.push_back({"b", Var<float>(Tensor<float>::constant({2}, 1.0f), true)});
  nn::Adam<float> opt(params, {});
  nn::backward(nn::mse_to_constant(params[0].var, 0.0f));
  opt.step();
  EXPECT_LT(params[0].var.value().data()[0], 1.0f);
  EXPECT_EQ(params[1].var.value().data()[0], 1.0f);
}

}  // namespace
}  // namespace rtgan
