#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "decnn/dataset_io.hpp"
#include "decnn/micro_cnn.hpp"
#include "gradcheck.hpp"

using namespace decnn;
using namespace decnn::cnn;

namespace {

ConvParams conv_params(std::size_t in, std::size_t out, std::size_t f, std::size_t s, double w, double b) {
  ConvParams p;
  p.in_channels = in;
  p.out_channels = out;
  p.filter = f;
  p.stride = s;
  p.weights.assign(out * in * f * f, w);
  p.bias.assign(out, b);
  return p;
}

std::vector<double> random_input(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = u(rng);
  return x;
}

}  // namespace

TEST(Conv, OneByOneIdentityKernelIsRelu) {
  const Tensor x({1, 2, 2}, {-1, 2, -3, 4});
  const Tensor y = conv_forward(x, conv_params(1, 1, 1, 1, 1.0, 0.0));
  EXPECT_EQ(y.shape, (std::vector<std::size_t>{1, 2, 2}));
  EXPECT_EQ(y.data, (std::vector<double>{0, 2, 0, 4}));
}

TEST(Conv, ZeroKernelsGiveZeros) {
  const Tensor x({2, 4, 4}, std::vector<double>(32, 3.0));
  const Tensor y = conv_forward(x, conv_params(2, 3, 3, 1, 0.0, 0.0));
  EXPECT_EQ(y.shape, (std::vector<std::size_t>{3, 2, 2}));
  for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(Conv, OnesGiveFours) {
  const Tensor x({1, 3, 3}, std::vector<double>(9, 1.0));
  const Tensor y = conv_forward(x, conv_params(1, 1, 2, 1, 1.0, 0.0));
  EXPECT_EQ(y.shape, (std::vector<std::size_t>{1, 2, 2}));
  EXPECT_EQ(y.data, (std::vector<double>{4, 4, 4, 4}));
}

TEST(Conv, StrideAndShapeErrors) {
  const Tensor x({1, 7, 7}, std::vector<double>(49, 1.0));
  EXPECT_EQ(conv_forward(x, conv_params(1, 1, 3, 2, 1.0, 0.0)).shape, (std::vector<std::size_t>{1, 3, 3}));
  EXPECT_THROW(conv_forward(x, conv_params(1, 1, 8, 1, 1.0, 0.0)), ContractError);
  EXPECT_THROW(conv_forward(x, conv_params(2, 1, 3, 1, 1.0, 0.0)), ContractError);
}

TEST(Pool, MaxAndAverage) {
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(pool_forward(x, 2, 2, PoolType::max).data, (std::vector<double>{4}));
  EXPECT_EQ(pool_forward(x, 2, 2, PoolType::average).data, (std::vector<double>{2.5}));
  const Tensor c({2, 4, 4}, std::vector<double>(32, 0.7));
  for (auto t : {PoolType::max, PoolType::average})
    for (double v : pool_forward(c, 3, 1, t).data) EXPECT_DOUBLE_EQ(v, 0.7);
  EXPECT_THROW(pool_forward(x, 3, 1, PoolType::max), ContractError);
}

TEST(Fc, Examples) {
  FcParams p;
  p.inputs = 2;
  p.outputs = 2;
  p.weights = {1, 1, -1, 1};
  p.bias = {0, 0};
  EXPECT_EQ(fc_forward(Tensor({2}, {1, 2}), p).data, (std::vector<double>{3, 1}));

  p.weights = {1, 0, 0, 1};
  EXPECT_EQ(fc_forward(Tensor({2}, {-5, 2}), p).data, (std::vector<double>{0, 2}));

  p.weights = {0, 0, 0, 0};
  p.bias = {-1, 2};
  EXPECT_EQ(fc_forward(Tensor({2}, {7, 9}), p).data, (std::vector<double>{0, 2}));
  EXPECT_EQ(fc_forward(Tensor({2}, {7, 9}), p, Activation::identity).data, (std::vector<double>{-1, 2}));
  EXPECT_THROW(fc_forward(Tensor({3}, {1, 2, 3}), p), ContractError);
}

TEST(SoftmaxXent, Examples) {
  const std::vector<double> uniform(10, 0.3);
  EXPECT_NEAR(softmax_xent(uniform, 3).loss, std::log(10.0), 1e-12);
  const std::vector<double> sure{50, 0, 0};
  EXPECT_LT(softmax_xent(sure, 0).loss, 1e-20);
  const std::vector<double> two{1, 2};
  const auto r = softmax_xent(two, 0);
  EXPECT_NEAR(r.loss, std::log(1 + std::exp(1.0)), 1e-12);
  EXPECT_NEAR(r.loss, 1.313262, 1e-6);
  EXPECT_NEAR(r.grad[0] + r.grad[1], 0.0, 1e-15);
  EXPECT_THROW(softmax_xent(two, 2), ContractError);
}

TEST(SoftmaxXent, Properties) {
  Rng rng(4);
  std::normal_distribution<double> g(0.0, 30.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> z(7);
    for (double& v : z) v = g(rng);
    const auto p = softmax(z);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    EXPECT_GE(softmax_xent(z, static_cast<std::size_t>(t % 7)).loss, 0.0);
  }
}

TEST(Backward, AveragePoolSpreadsGradientUniformly) {
  Rng rng(6);
  // conv(1x1, identity kernel) -> avgpool -> output; inspect the pool's input gradient via the conv bias.
  const std::vector<LayerGene> layers{ConvGene{1, 1, 1}, PoolGene{2, 2, PoolType::average}};
  Network net = Network::build(layers, {1, 4, 4}, 3, rng, Activation::identity);
  auto blocks = net.parameter_blocks();
  blocks[0][0] = 1.0;  // conv weight
  const auto x = random_input(16, rng);
  const auto logits = net.forward(x);
  const auto dl = softmax_xent(logits, 1).grad;
  const Gradients g = net.backward(dl);
  // With identity activation d loss/d conv bias = sum of conv-output grads = sum of pool-output grads.
  const auto& fc_w = blocks[2];
  double pool_out_sum = 0.0;
  for (std::size_t o = 0; o < 4; ++o)
    for (std::size_t k = 0; k < 3; ++k) pool_out_sum += dl[k] * fc_w[k * 4 + o];
  EXPECT_NEAR(g.blocks[1][0], pool_out_sum, 1e-12);
}

TEST(Backward, GradientCheckTinyNetwork) {
  Rng rng(12);
  for (Activation act : {Activation::relu, Activation::tanh}) {
    for (int trial = 0; trial < 5; ++trial) {
      const std::vector<LayerGene> layers{ConvGene{3, 2, 1}, PoolGene{2, 2, PoolType::max}, FcGene{5}};
      Network net = Network::build(layers, {1, 6, 6}, 3, rng, act);
      const auto x = random_input(36, rng);
      const auto r = gradcheck::check(net, x, static_cast<std::size_t>(trial % 3));
      EXPECT_LT(r.max_rel_error, 1e-4) << "activation " << cnn::detail::activation_name(act) << " trial " << trial;
      EXPECT_EQ(r.parameters, net.parameter_count());
    }
  }
}

TEST(Backward, GradientCheckStridedAndAverage) {
  Rng rng(21);
  const std::vector<LayerGene> layers{ConvGene{2, 3, 2}, PoolGene{2, 1, PoolType::average}, ConvGene{1, 2, 1}};
  Network net = Network::build(layers, {1, 7, 7}, 4, rng, Activation::tanh);
  const auto x = random_input(49, rng);
  EXPECT_LT(gradcheck::check(net, x, 2).max_rel_error, 1e-4);
}

TEST(Sgd, ZeroLearningRateLeavesParameters) {
  Rng rng(1);
  const std::vector<LayerGene> layers{ConvGene{3, 2, 1}, FcGene{4}};
  Network net = Network::build(layers, {1, 6, 6}, 2, rng);
  std::vector<double> before;
  for (auto b : net.parameter_blocks()) before.insert(before.end(), b.begin(), b.end());
  const auto x = random_input(36, rng);
  const Gradients g = net.backward(softmax_xent(net.forward(x), 1).grad);
  net.sgd_step(g, 0.0);
  std::vector<double> after;
  for (auto b : net.parameter_blocks()) after.insert(after.end(), b.begin(), b.end());
  EXPECT_EQ(before, after);
}

TEST(Sgd, SmallStepDecreasesLoss) {
  Rng rng(2);
  const std::vector<LayerGene> layers{ConvGene{3, 2, 1}, PoolGene{2, 2, PoolType::max}, FcGene{6}};
  for (int t = 0; t < 10; ++t) {
    Network net = Network::build(layers, {1, 6, 6}, 3, rng);
    const auto x = random_input(36, rng);
    const double before = softmax_xent(net.forward(x), 1).loss;
    const Gradients g = net.backward(softmax_xent(net.forward(x), 1).grad);
    net.sgd_step(g, 1e-3);
    EXPECT_LT(softmax_xent(net.forward(x), 1).loss, before);
  }
}

TEST(Train, ZeroEpochsLeavesNetwork) {
  Rng rng(3);
  const auto data = synth_blobs(2, 10, 1);
  const std::vector<LayerGene> layers{FcGene{4}};
  Network net = Network::build(layers, input_shape_of(data), 2, rng);
  std::vector<double> before;
  for (auto b : net.parameter_blocks()) before.insert(before.end(), b.begin(), b.end());
  train(net, data, {0, 4, 0.1}, rng);
  std::vector<double> after;
  for (auto b : net.parameter_blocks()) after.insert(after.end(), b.begin(), b.end());
  EXPECT_EQ(before, after);
}

TEST(Train, TwoBlobsReachHighAccuracy) {
  Rng rng(7);
  const auto data = synth_blobs(2, 100, 5);
  const std::vector<LayerGene> layers{FcGene{8}};
  Network net = Network::build(layers, input_shape_of(data), 2, rng);
  const auto stats = train(net, data, {5, 32, 0.01}, rng);
  EXPECT_FALSE(stats.diverged);
  EXPECT_GE(accuracy(net, data), 0.95);
}

TEST(Train, PerfectClassifierScoresOne) {
  Rng rng(8);
  const auto data = synth_blobs(3, 30, 9);
  Network net = Network::build(std::vector<LayerGene>{FcGene{16}}, input_shape_of(data), 3, rng);
  train(net, data, {20, 8, 0.05}, rng);
  EXPECT_EQ(accuracy(net, data), 1.0);
}

TEST(Train, DeterministicUnderFixedSeed) {
  const auto data = synth_blobs(3, 20, 2);
  const std::vector<LayerGene> layers{ConvGene{3, 2, 2}, FcGene{8}};
  std::vector<double> params[2];
  for (auto& p : params) {
    Rng rng(77);
    Network net = Network::build(layers, input_shape_of(data), 3, rng);
    train(net, data, {2, 8, 0.02}, rng);
    for (auto b : net.parameter_blocks()) p.insert(p.end(), b.begin(), b.end());
  }
  EXPECT_EQ(params[0], params[1]);
}

TEST(Network, MacsCountsConvAndFc) {
  Rng rng(1);
  const std::vector<LayerGene> layers{ConvGene{5, 6, 1}, PoolGene{2, 2, PoolType::max}, FcGene{100}};
  const Network net = Network::build(layers, {1, 28, 28}, 10, rng);
  EXPECT_EQ(net.macs(), 24u * 24 * 6 * 25 + 12 * 12 * 6 * 100 + 100 * 10);
  EXPECT_EQ(net.hidden_genes(), layers);
}

TEST(Checkpoint, Roundtrip) {
  Rng rng(10);
  const std::vector<LayerGene> layers{ConvGene{3, 4, 1}, PoolGene{2, 2, PoolType::average}, FcGene{7}};
  Network net = Network::build(layers, {1, 9, 9}, 3, rng, Activation::tanh);
  const auto path = (std::filesystem::temp_directory_path() / "decnn_ckpt_test.bin").string();
  save_checkpoint(net, path);
  Network back = load_checkpoint(path);
  EXPECT_EQ(back.hidden_genes(), layers);
  EXPECT_EQ(back.activation(), Activation::tanh);
  const auto x = random_input(81, rng);
  const auto a = net.forward(x);
  const std::vector<double> la(a.begin(), a.end());
  const auto b = back.forward(x);
  EXPECT_EQ(la, std::vector<double>(b.begin(), b.end()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), FormatError);
}
