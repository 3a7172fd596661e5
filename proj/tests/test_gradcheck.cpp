#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "straw3d/nn/gradcheck.hpp"
#include "straw3d/nn/ops.hpp"

using straw3d::nn::BatchNorm;
using straw3d::nn::Conv3x3;
using straw3d::nn::CrossEntropy;
using straw3d::nn::MaxPool2x2;
using straw3d::nn::ParamBlock;
using straw3d::nn::ReLU;
using straw3d::nn::Tconv3x3;
using straw3d::nn::Tensor;
using straw3d::nn::finite_difference_check;

namespace {

Tensor<double> random_tensor(int n, int c, int h, int w, unsigned seed, double scale = 1.0) {
  Tensor<double> t(n, c, h, w);
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& v : t.data) v = g(rng) * scale;
  return t;
}

// Fixed random reduction weights: turn a tensor-valued op into the scalar
// objective sum(y * r) so every output element contributes to the check.
std::vector<double> reduction(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> r(n);
  for (double& v : r) v = g(rng);
  return r;
}

double dot(const Tensor<double>& t, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) s += t.data[i] * r[i];
  return s;
}

Tensor<double> as_grad(const Tensor<double>& like, const std::vector<double>& r) {
  Tensor<double> g(like.n, like.c, like.h, like.w);
  g.data = r;
  return g;
}

// The checker holds raw pointers into grad buffers, so backward callbacks
// must fill them in place rather than swap in a fresh vector.
void store_grad(Tensor<double>& x, const Tensor<double>& dx) {
  std::copy(dx.data.begin(), dx.data.end(), x.grad.begin());
}

}  // namespace

TEST_SUITE("gradcheck") {
  TEST_CASE("a linear map checks out to near machine precision") {
    Conv3x3<double> conv(2, 3);
    std::mt19937 rng(1);
    conv.init_he(rng);
    Tensor<double> x = random_tensor(1, 2, 4, 4, 2);
    x.ensure_grad();
    const auto r = reduction(1 * 3 * 4 * 4, 3);

    auto loss = [&] { return dot(conv.forward(x), r); };
    auto backward = [&] {
      conv.zero_grad();
      x.zero_grad();
      auto y = conv.forward(x);
      store_grad(x, conv.backward(as_grad(y, r)));
    };
    const auto report = finite_difference_check<double>(
        loss, backward, {{"input", x.data.data(), x.grad.data(), x.numel()}}, 1e-8, 12, 0);
    CHECK(report.pass);
    CHECK(report.max_rel_error < 1e-8);
  }

  TEST_CASE("conv3x3 weight, bias and input gradients") {
    Conv3x3<double> conv(2, 3);
    std::mt19937 rng(11);
    conv.init_he(rng);
    for (auto& b : conv.bias) b = 0.1;
    Tensor<double> x = random_tensor(1, 2, 5, 5, 12);
    x.ensure_grad();
    const auto r = reduction(1 * 3 * 5 * 5, 13);

    auto loss = [&] { return dot(conv.forward(x), r); };
    auto backward = [&] {
      conv.zero_grad();
      x.zero_grad();
      auto y = conv.forward(x);
      store_grad(x, conv.backward(as_grad(y, r)));
    };
    const auto report = finite_difference_check<double>(
        loss, backward,
        {{"weight", conv.weight.data.data(), conv.weight.grad.data(), conv.weight.numel()},
         {"bias", conv.bias.data(), conv.bias_grad.data(), conv.bias.size()},
         {"input", x.data.data(), x.grad.data(), x.numel()}},
        1e-3, 10, 1);
    CHECK(report.pass);
    CHECK(report.max_rel_error < 1e-3);
    REQUIRE(report.blocks.size() == 3);
  }

  TEST_CASE("tconv3x3 weight, bias and input gradients") {
    Tconv3x3<double> tconv(3, 2);
    std::mt19937 rng(21);
    tconv.init_he(rng);
    for (auto& b : tconv.bias) b = -0.2;
    Tensor<double> x = random_tensor(1, 3, 4, 6, 22);
    x.ensure_grad();
    const auto r = reduction(1 * 2 * 4 * 6, 23);

    auto loss = [&] { return dot(tconv.forward(x), r); };
    auto backward = [&] {
      tconv.zero_grad();
      x.zero_grad();
      auto y = tconv.forward(x);
      store_grad(x, tconv.backward(as_grad(y, r)));
    };
    const auto report = finite_difference_check<double>(
        loss, backward,
        {{"weight", tconv.weight.data.data(), tconv.weight.grad.data(), tconv.weight.numel()},
         {"bias", tconv.bias.data(), tconv.bias_grad.data(), tconv.bias.size()},
         {"input", x.data.data(), x.grad.data(), x.numel()}},
        1e-3, 10, 2);
    CHECK(report.pass);
  }

  TEST_CASE("maxpool/unmaxpool round trip gradients") {
    // distinct values with gaps far above the probe step keep the argmax
    // stable under perturbation
    Tensor<double> x(1, 2, 6, 6);
    std::vector<int> order(x.numel());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::mt19937 rng(31);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < x.numel(); ++i) x.data[i] = 0.1 * order[i];
    x.ensure_grad();
    const auto r = reduction(x.numel(), 32);

    MaxPool2x2<double> pool;
    auto loss = [&] {
      auto y = straw3d::nn::unmaxpool2x2(pool.forward(x), pool.indices);
      return dot(y, r);
    };
    auto backward = [&] {
      x.zero_grad();
      auto pooled = pool.forward(x);
      auto y = straw3d::nn::unmaxpool2x2(pooled, pool.indices);
      auto dpooled = straw3d::nn::unmaxpool2x2_backward(as_grad(y, r), pool.indices);
      store_grad(x, pool.backward(dpooled));
    };
    const auto report = finite_difference_check<double>(
        loss, backward, {{"input", x.data.data(), x.grad.data(), x.numel()}}, 1e-6, 16, 3);
    CHECK(report.pass);
  }

  TEST_CASE("batchnorm gradients flow through the batch statistics") {
    BatchNorm<double> bn(3);
    bn.gamma = {1.3, 0.8, 1.0};
    bn.beta = {0.2, -0.1, 0.0};
    Tensor<double> x = random_tensor(2, 3, 4, 4, 41, 1.5);
    x.ensure_grad();
    const auto r = reduction(x.numel(), 42);

    auto loss = [&] { return dot(bn.forward(x), r); };
    auto backward = [&] {
      bn.zero_grad();
      x.zero_grad();
      auto y = bn.forward(x);
      store_grad(x, bn.backward(as_grad(y, r)));
    };
    const auto report = finite_difference_check<double>(
        loss, backward,
        {{"gamma", bn.gamma.data(), bn.gamma_grad.data(), bn.gamma.size()},
         {"beta", bn.beta.data(), bn.beta_grad.data(), bn.beta.size()},
         {"input", x.data.data(), x.grad.data(), x.numel()}},
        1e-3, 10, 4);
    CHECK(report.pass);
  }

  TEST_CASE("cross entropy logit gradients") {
    Tensor<double> logits = random_tensor(2, 2, 4, 4, 51, 2.0);
    logits.ensure_grad();
    std::vector<uint8_t> targets(32);
    std::mt19937 rng(52);
    for (auto& t : targets) {
      const int v = static_cast<int>(rng() % 5);
      t = v == 4 ? uint8_t(255) : uint8_t(v % 2);
    }
    std::vector<std::array<double, 2>> w{{1.7, 0.4}, {0.6, 1.2}};

    CrossEntropy<double> ce;
    auto loss = [&] { return ce.forward(logits, targets, w); };
    auto backward = [&] {
      logits.zero_grad();
      ce.forward(logits, targets, w);
      store_grad(logits, ce.backward());
    };
    const auto report = finite_difference_check<double>(
        loss, backward, {{"logits", logits.data.data(), logits.grad.data(), logits.numel()}},
        1e-3, 16, 5);
    CHECK(report.pass);
  }

  TEST_CASE("relu gradients away from the kink") {
    Tensor<double> x(1, 2, 5, 5);
    std::mt19937 rng(61);
    std::uniform_real_distribution<double> mag(0.01, 1.0);
    for (double& v : x.data) v = (rng() & 1 ? 1.0 : -1.0) * mag(rng);
    x.ensure_grad();
    const auto r = reduction(x.numel(), 62);

    ReLU<double> relu;
    auto loss = [&] { return dot(relu.forward(x), r); };
    auto backward = [&] {
      x.zero_grad();
      auto y = relu.forward(x);
      store_grad(x, relu.backward(as_grad(y, r)));
    };
    const auto report = finite_difference_check<double>(
        loss, backward, {{"input", x.data.data(), x.grad.data(), x.numel()}}, 1e-6, 16, 6);
    CHECK(report.pass);
  }

  TEST_CASE("a composite block backpropagates end to end") {
    // conv -> bn -> relu -> pool -> tconv -> unpool -> head -> cross entropy
    Conv3x3<double> conv(3, 8);
    Tconv3x3<double> tconv(8, 8);
    Tconv3x3<double> head(8, 2);
    BatchNorm<double> bn(8);
    ReLU<double> relu;
    MaxPool2x2<double> pool;
    std::mt19937 rng(71);
    conv.init_he(rng);
    tconv.init_he(rng);
    head.init_he(rng);

    Tensor<double> x = random_tensor(1, 3, 8, 8, 72);
    x.ensure_grad();
    std::vector<uint8_t> targets(64);
    for (std::size_t i = 0; i < 64; ++i) targets[i] = (i * 7 % 3 == 0) ? 255 : (i & 1);
    const std::vector<std::array<double, 2>> w{{0.8, 1.2}};
    CrossEntropy<double> ce;

    auto run = [&](bool grads) {
      auto a = conv.forward(x);
      auto b = bn.forward(a);
      auto c = relu.forward(b);
      auto p = pool.forward(c);
      auto t = tconv.forward(p);
      auto u = straw3d::nn::unmaxpool2x2(t, pool.indices);
      auto h = head.forward(u);
      const double loss = ce.forward(h, targets, w);
      if (!grads) return loss;
      auto dh = head.backward(ce.backward());
      auto dt = straw3d::nn::unmaxpool2x2_backward(dh, pool.indices);
      auto dp = tconv.backward(dt);
      auto dc = pool.backward(dp);
      auto db = relu.backward(dc);
      auto da = bn.backward(db);
      store_grad(x, conv.backward(da));
      return loss;
    };

    auto loss = [&] { return run(false); };
    auto backward = [&] {
      conv.zero_grad();
      tconv.zero_grad();
      head.zero_grad();
      bn.zero_grad();
      x.zero_grad();
      run(true);
    };
    const auto report = finite_difference_check<double>(
        loss, backward,
        {{"conv.w", conv.weight.data.data(), conv.weight.grad.data(), conv.weight.numel()},
         {"conv.b", conv.bias.data(), conv.bias_grad.data(), conv.bias.size()},
         {"tconv.w", tconv.weight.data.data(), tconv.weight.grad.data(), tconv.weight.numel()},
         {"tconv.b", tconv.bias.data(), tconv.bias_grad.data(), tconv.bias.size()},
         {"head.w", head.weight.data.data(), head.weight.grad.data(), head.weight.numel()},
         {"bn.gamma", bn.gamma.data(), bn.gamma_grad.data(), bn.gamma.size()},
         {"bn.beta", bn.beta.data(), bn.beta_grad.data(), bn.beta.size()},
         {"input", x.data.data(), x.grad.data(), x.numel()}},
        1e-3, 8, 7);
    CHECK(report.pass);
    CHECK(report.max_rel_error < 1e-3);
  }

  TEST_CASE("a sign-flipped backward pass is rejected") {
    Conv3x3<double> conv(2, 2);
    std::mt19937 rng(81);
    conv.init_he(rng);
    Tensor<double> x = random_tensor(1, 2, 4, 4, 82);
    const auto r = reduction(1 * 2 * 4 * 4, 83);

    auto loss = [&] { return dot(conv.forward(x), r); };
    auto backward = [&] {
      conv.zero_grad();
      auto y = conv.forward(x);
      conv.backward(as_grad(y, r));
      for (auto& g : conv.weight.grad) g = -g;  // deliberately corrupted
    };
    const auto report = finite_difference_check<double>(
        loss, backward,
        {{"weight", conv.weight.data.data(), conv.weight.grad.data(), conv.weight.numel()}},
        1e-3, 8, 8);
    CHECK_FALSE(report.pass);
    CHECK(report.max_rel_error > 0.5);
  }
}
