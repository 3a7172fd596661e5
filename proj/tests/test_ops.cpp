#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "straw3d/nn/ops.hpp"

using straw3d::nn::Adam;
using straw3d::nn::BatchNorm;
using straw3d::nn::Conv3x3;
using straw3d::nn::ConvAlgo;
using straw3d::nn::CrossEntropy;
using straw3d::nn::MaxPool2x2;
using straw3d::nn::ReLU;
using straw3d::nn::Tconv3x3;
using straw3d::nn::Tensor;

namespace {

template <typename S>
Tensor<S> random_tensor(int n, int c, int h, int w, unsigned seed, S scale = S(1)) {
  Tensor<S> t(n, c, h, w);
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (S& v : t.data) v = static_cast<S>(g(rng)) * scale;
  return t;
}

// Direct stride-1 pad-1 cross-correlation in double, the shape every conv
// implementation must reproduce.
template <typename S>
std::vector<double> naive_conv(const Tensor<S>& x, const Tensor<S>& w,
                               const std::vector<S>& bias) {
  std::vector<double> y(static_cast<std::size_t>(x.n) * w.n * x.h * x.w, 0.0);
  for (int in = 0; in < x.n; ++in)
    for (int oc = 0; oc < w.n; ++oc)
      for (int oy = 0; oy < x.h; ++oy)
        for (int ox = 0; ox < x.w; ++ox) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[oc]);
          for (int ic = 0; ic < x.c; ++ic)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = oy + ky - 1, sx = ox + kx - 1;
                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                acc += static_cast<double>(w.at(oc, ic, ky, kx)) * x.at(in, ic, sy, sx);
              }
          y[((static_cast<std::size_t>(in) * w.n + oc) * x.h + oy) * x.w + ox] = acc;
        }
  return y;
}

}  // namespace

TEST_SUITE("ops") {
  TEST_CASE("conv with a delta kernel reproduces its input") {
    auto x = random_tensor<float>(1, 1, 5, 7, 11);
    Conv3x3<float> conv(1, 1);
    conv.weight.at(0, 0, 1, 1) = 1.f;
    auto y = conv.forward(x);
    REQUIRE(y.same_shape(x));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data[i] == x.data[i]);
  }

  TEST_CASE("conv and tconv shape contracts") {
    Conv3x3<float> conv(6, 64);
    auto y = conv.forward(random_tensor<float>(1, 6, 64, 64, 3));
    CHECK(y.n == 1);
    CHECK(y.c == 64);
    CHECK(y.h == 64);
    CHECK(y.w == 64);

    Tconv3x3<float> tconv(64, 2);
    auto z = tconv.forward(random_tensor<float>(1, 64, 32, 32, 4));
    CHECK(z.n == 1);
    CHECK(z.c == 2);
    CHECK(z.h == 32);
    CHECK(z.w == 32);

    CHECK_THROWS_AS(conv.forward(random_tensor<float>(1, 3, 8, 8, 5)), std::invalid_argument);
    CHECK_THROWS_AS(tconv.forward(random_tensor<float>(1, 3, 8, 8, 5)), std::invalid_argument);
  }

  TEST_CASE("conv matches a direct per-pixel oracle") {
    auto x = random_tensor<double>(2, 3, 8, 7, 21);
    Conv3x3<double> conv(3, 4);
    std::mt19937 rng(22);
    conv.init_he(rng);
    std::normal_distribution<double> g(0.0, 0.5);
    for (auto& b : conv.bias) b = g(rng);

    const auto want = naive_conv(x, conv.weight, conv.bias);
    const auto y = conv.forward(x);
    for (std::size_t i = 0; i < y.numel(); ++i)
      CHECK(y.data[i] == doctest::Approx(want[i]).epsilon(1e-12));

    // float path agrees to single-precision accuracy
    Conv3x3<float> convf(3, 4);
    for (std::size_t i = 0; i < conv.weight.numel(); ++i)
      convf.weight.data[i] = static_cast<float>(conv.weight.data[i]);
    for (std::size_t i = 0; i < conv.bias.size(); ++i)
      convf.bias[i] = static_cast<float>(conv.bias[i]);
    Tensor<float> xf(2, 3, 8, 7);
    for (std::size_t i = 0; i < x.numel(); ++i) xf.data[i] = static_cast<float>(x.data[i]);
    const auto yf = convf.forward(xf);
    for (std::size_t i = 0; i < yf.numel(); ++i)
      CHECK(std::abs(yf.data[i] - want[i]) < 1e-4);
  }

  TEST_CASE("tconv is the adjoint of conv for shared weights") {
    Conv3x3<double> conv(3, 5);
    std::mt19937 rng(31);
    conv.init_he(rng);
    Tconv3x3<double> tconv(5, 3);
    tconv.weight.data = conv.weight.data;  // same (5,3,3,3) buffer layout

    const auto x = random_tensor<double>(2, 3, 6, 6, 32);
    const auto y = random_tensor<double>(2, 5, 6, 6, 33);
    const auto cx = conv.forward(x);
    const auto ty = tconv.forward(y);

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx.data[i] * y.data[i];
    for (std::size_t i = 0; i < ty.numel(); ++i) rhs += ty.data[i] * x.data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
    CHECK(std::abs(lhs - rhs) < 1e-4 * std::max(1.0, std::abs(lhs)));
  }

  TEST_CASE("maxpool takes window maxima and breaks ties row-major first") {
    Tensor<float> flat(1, 2, 4, 6);
    std::fill(flat.data.begin(), flat.data.end(), 3.25f);
    MaxPool2x2<float> pool;
    auto y = pool.forward(flat);
    CHECK(y.h == 2);
    CHECK(y.w == 3);
    for (float v : y.data) CHECK(v == 3.25f);
    for (int oy = 0; oy < 2; ++oy)
      for (int ox = 0; ox < 3; ++ox)
        for (int pl = 0; pl < 2; ++pl)
          CHECK(pool.indices.idx[(pl * 2 + oy) * 3 + ox] == (2 * oy) * 6 + 2 * ox);

    // distinct values: exhaustive window oracle
    auto x = random_tensor<float>(1, 1, 4, 4, 41);
    auto p = pool.forward(x);
    for (int oy = 0; oy < 2; ++oy)
      for (int ox = 0; ox < 2; ++ox) {
        float want = x.at(0, 0, 2 * oy, 2 * ox);
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            want = std::max(want, x.at(0, 0, 2 * oy + dy, 2 * ox + dx));
        CHECK(p.at(0, 0, oy, ox) == want);
      }

    // every index stays inside its own 2x2 window
    auto big = random_tensor<float>(2, 3, 8, 6, 42);
    auto pb = pool.forward(big);
    CHECK(pb.n == 2);
    CHECK(pb.c == 3);
    CHECK(pb.h == 4);
    CHECK(pb.w == 3);
    for (int pl = 0; pl < 6; ++pl)
      for (int oy = 0; oy < 4; ++oy)
        for (int ox = 0; ox < 3; ++ox) {
          const int idx = pool.indices.idx[(pl * 4 + oy) * 3 + ox];
          const int iy = idx / 6, ix = idx % 6;
          CHECK(iy / 2 == oy);
          CHECK(ix / 2 == ox);
        }

    Tensor<float> odd(1, 1, 3, 4);
    CHECK_THROWS_AS(pool.forward(odd), std::invalid_argument);
  }

  TEST_CASE("unmaxpool scatters to argmax cells and preserves mass") {
    auto x = random_tensor<float>(2, 2, 6, 4, 51);
    MaxPool2x2<float> pool;
    auto pooled = pool.forward(x);
    auto back = straw3d::nn::unmaxpool2x2(pooled, pool.indices);
    REQUIRE(back.same_shape(x));

    double in_sum = 0.0, out_sum = 0.0;
    for (float v : pooled.data) in_sum += v;
    for (float v : back.data) out_sum += v;
    CHECK(out_sum == doctest::Approx(in_sum).epsilon(1e-6));

    // each window max lands on its original cell; the other cells are zero
    std::size_t nonzero = 0;
    for (int pl = 0; pl < 4; ++pl)
      for (std::size_t i = 0; i < 24; ++i) {
        const float v = back.data[pl * 24 + i];
        if (v != 0.f) {
          ++nonzero;
          CHECK(v == x.data[pl * 24 + i]);
        }
      }
    CHECK(nonzero == pooled.numel());

    Tensor<float> wrong(2, 2, 3, 3);
    CHECK_THROWS_AS(straw3d::nn::unmaxpool2x2(wrong, pool.indices), std::invalid_argument);
  }

  TEST_CASE("pad_to_even replicates edges and crop undoes it") {
    auto x = random_tensor<float>(1, 2, 5, 7, 61);
    auto p = straw3d::nn::pad_to_even(x);
    CHECK(p.h == 6);
    CHECK(p.w == 8);
    for (int ic = 0; ic < 2; ++ic) {
      for (int iy = 0; iy < 5; ++iy) CHECK(p.at(0, ic, iy, 7) == x.at(0, ic, iy, 6));
      for (int ix = 0; ix < 7; ++ix) CHECK(p.at(0, ic, 5, ix) == x.at(0, ic, 4, ix));
      CHECK(p.at(0, ic, 5, 7) == x.at(0, ic, 4, 6));
    }
    auto c = straw3d::nn::crop(p, 5, 7);
    REQUIRE(c.same_shape(x));
    CHECK(std::memcmp(c.data.data(), x.data.data(), x.numel() * sizeof(float)) == 0);

    auto even = random_tensor<float>(1, 1, 4, 4, 62);
    auto pe = straw3d::nn::pad_to_even(even);
    CHECK(pe.same_shape(even));

    // folding gradients back: replicated cells add into their source
    Tensor<float> ones(1, 1, 6, 8);
    std::fill(ones.data.begin(), ones.data.end(), 1.f);
    auto folded = straw3d::nn::pad_to_even_backward(ones, 5, 7);
    CHECK(folded.at(0, 0, 2, 3) == 1.f);
    CHECK(folded.at(0, 0, 2, 6) == 2.f);
    CHECK(folded.at(0, 0, 4, 3) == 2.f);
    CHECK(folded.at(0, 0, 4, 6) == 4.f);
  }

  TEST_CASE("batchnorm normalizes per channel and tracks running stats") {
    auto x = random_tensor<double>(2, 3, 4, 4, 71);
    for (std::size_t i = 0; i < x.numel(); ++i) x.data[i] = x.data[i] * 1.7 + 0.4;
    BatchNorm<double> bn(3);
    auto y = bn.forward(x);

    const std::size_t hw = 16, count = 2 * hw;
    for (int ic = 0; ic < 3; ++ic) {
      double sum = 0.0, sq = 0.0;
      for (int in = 0; in < 2; ++in)
        for (std::size_t i = 0; i < hw; ++i) {
          const double v = y.data[(in * 3 + ic) * hw + i];
          sum += v;
          sq += v * v;
        }
      const double mean = sum / count;
      CHECK(std::abs(mean) < 1e-5);
      CHECK(sq / count - mean * mean == doctest::Approx(1.0).epsilon(1e-3));

      // momentum 0.1 from fresh (0, 1) state; running variance is unbiased
      double xsum = 0.0, xsq = 0.0;
      for (int in = 0; in < 2; ++in)
        for (std::size_t i = 0; i < hw; ++i) {
          const double v = x.data[(in * 3 + ic) * hw + i];
          xsum += v;
          xsq += v * v;
        }
      const double bmean = xsum / count;
      const double bvar = xsq / count - bmean * bmean;
      CHECK(bn.running_mean[ic] == doctest::Approx(0.1 * bmean).epsilon(1e-10));
      CHECK(bn.running_var[ic] ==
            doctest::Approx(0.9 + 0.1 * bvar * count / (count - 1.0)).epsilon(1e-10));
    }

    // already-normalized input is (nearly) a fixed point
    Tensor<double> z = x;
    for (int ic = 0; ic < 3; ++ic) {
      double sum = 0.0, sq = 0.0;
      for (int in = 0; in < 2; ++in)
        for (std::size_t i = 0; i < hw; ++i) sum += z.data[(in * 3 + ic) * hw + i];
      const double mean = sum / count;
      for (int in = 0; in < 2; ++in)
        for (std::size_t i = 0; i < hw; ++i) {
          double& v = z.data[(in * 3 + ic) * hw + i];
          v -= mean;
          sq += v * v;
        }
      const double sd = std::sqrt(sq / count);
      for (int in = 0; in < 2; ++in)
        for (std::size_t i = 0; i < hw; ++i) z.data[(in * 3 + ic) * hw + i] /= sd;
    }
    BatchNorm<double> bn2(3);
    auto fz = bn2.forward(z);
    for (std::size_t i = 0; i < z.numel(); ++i) CHECK(std::abs(fz.data[i] - z.data[i]) < 1e-4);

    // eval mode uses the running stats, not the batch
    BatchNorm<double> bn3(2);
    bn3.running_mean = {0.5, -1.0};
    bn3.running_var = {4.0, 0.25};
    bn3.gamma = {2.0, 1.0};
    bn3.beta = {0.0, 3.0};
    bn3.training = false;
    auto e = bn3.forward(random_tensor<double>(1, 2, 2, 2, 72));
    auto xi = random_tensor<double>(1, 2, 2, 2, 72);
    for (int ic = 0; ic < 2; ++ic)
      for (std::size_t i = 0; i < 4; ++i) {
        const double want = bn3.gamma[ic] * (xi.data[ic * 4 + i] - bn3.running_mean[ic]) /
                                std::sqrt(bn3.running_var[ic] + 1e-5) +
                            bn3.beta[ic];
        CHECK(e.data[ic * 4 + i] == doctest::Approx(want).epsilon(1e-12));
      }
  }

  TEST_CASE("softmax rows sum to one") {
    auto logits = random_tensor<double>(2, 2, 3, 5, 81, 3.0);
    auto p = straw3d::nn::softmax_channels(logits);
    for (int in = 0; in < 2; ++in)
      for (std::size_t i = 0; i < 15; ++i) {
        const double a = p.data[in * 30 + i], b = p.data[in * 30 + 15 + i];
        CHECK(a >= 0.0);
        CHECK(b >= 0.0);
        CHECK(a + b == doctest::Approx(1.0).epsilon(1e-6));
      }
  }

  TEST_CASE("weighted cross entropy matches the summation oracle") {
    // uniform logits, equal weights: ln 2
    Tensor<double> uniform(1, 2, 4, 4);
    std::vector<uint8_t> targets(16, 0);
    for (std::size_t i = 8; i < 16; ++i) targets[i] = 1;
    CrossEntropy<double> ce;
    CHECK(ce.forward(uniform, targets, {{1.0, 1.0}}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // saturated correct logits drive the loss to zero
    Tensor<double> confident(1, 2, 4, 4);
    for (std::size_t i = 0; i < 16; ++i) confident.data[targets[i] * 16 + i] = 20.0;
    CHECK(ce.forward(confident, targets, {{1.0, 1.0}}) <= 1e-6);

    // random case, per-item weights, invalid pixels excluded
    auto logits = random_tensor<double>(2, 2, 3, 4, 91, 2.0);
    std::vector<uint8_t> t(24);
    std::mt19937 rng(92);
    for (auto& v : t) {
      const int r = static_cast<int>(rng() % 5);
      v = r == 4 ? uint8_t(255) : uint8_t(r % 2);
    }
    std::vector<std::array<double, 2>> w{{0.3, 1.7}, {1.1, 0.9}};
    const double loss = ce.forward(logits, t, w);

    double num = 0.0, den = 0.0;
    for (int in = 0; in < 2; ++in)
      for (std::size_t i = 0; i < 12; ++i) {
        const uint8_t tv = t[in * 12 + i];
        if (tv > 1) continue;
        const double l0 = logits.data[in * 24 + i], l1 = logits.data[in * 24 + 12 + i];
        const double p = std::exp((tv ? l1 : l0)) / (std::exp(l0) + std::exp(l1));
        num -= w[in][tv] * std::log(p);
        den += w[in][tv];
      }
    CHECK(loss == doctest::Approx(num / den).epsilon(1e-6));

    // gradients vanish on invalid pixels
    auto dl = ce.backward();
    for (int in = 0; in < 2; ++in)
      for (std::size_t i = 0; i < 12; ++i)
        if (t[in * 12 + i] > 1) {
          CHECK(dl.data[in * 24 + i] == 0.0);
          CHECK(dl.data[in * 24 + 12 + i] == 0.0);
        }
  }

  TEST_CASE("cross entropy rejects degenerate batches") {
    Tensor<double> logits(1, 2, 2, 2);
    std::vector<uint8_t> invalid(4, 255);
    CrossEntropy<double> ce;
    CHECK_THROWS_AS(ce.forward(logits, invalid, {{1.0, 1.0}}), std::runtime_error);

    std::vector<uint8_t> ok(4, 0);
    CHECK_THROWS_AS(ce.forward(logits, ok, {{0.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(ce.forward(logits, ok, {{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}),
                    std::invalid_argument);
  }

  TEST_CASE("adam follows the bias-corrected update") {
    // first step moves by ~lr * sign(g)
    std::vector<double> w{1.0, -1.0, 2.0};
    std::vector<double> g{0.3, -0.2, 0.5};
    Adam<double> opt;
    opt.lr = 1e-3;
    opt.attach(w.data(), g.data(), 3);
    const std::vector<double> w0 = w;
    opt.step();
    for (int i = 0; i < 3; ++i) {
      const double want = w0[i] - opt.lr * (g[i] > 0 ? 1.0 : -1.0);
      CHECK(std::abs(w[i] - want) < opt.lr * 1e-4);
    }

    // zero gradient from a fresh state changes nothing
    std::vector<double> w2{0.7};
    std::vector<double> g2{0.0};
    Adam<double> opt2;
    opt2.attach(w2.data(), g2.data(), 1);
    opt2.step();
    CHECK(w2[0] == 0.7);

    // 100 steps on f(x) = x^2 from x = 1 converge near the minimum
    std::vector<double> x{1.0};
    std::vector<double> gx{0.0};
    Adam<double> opt3;
    opt3.lr = 0.1;
    opt3.attach(x.data(), gx.data(), 1);
    for (int i = 0; i < 100; ++i) {
      gx[0] = 2.0 * x[0];
      opt3.step();
    }
    CHECK(std::abs(x[0]) < 0.05);
  }

  TEST_CASE("forward passes are bit-deterministic") {
    auto x = random_tensor<float>(2, 8, 12, 12, 101);
    Conv3x3<float> conv(8, 8);
    std::mt19937 rng(102);
    conv.init_he(rng);
    auto a = conv.forward(x);
    auto b = conv.forward(x);
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.numel() * sizeof(float)) == 0);
  }
}
