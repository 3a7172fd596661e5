#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "straw3d/nn/tensor.hpp"

namespace straw3d::nn {

// Argmax positions recorded by a 2x2 max-pool: for every pooled cell, the
// flat index (y * w + x) of the winning cell inside the pre-pool plane.
struct PoolIndices {
  int n = 0, c = 0, h = 0, w = 0;  // pooled output shape
  int src_h = 0, src_w = 0;        // pre-pool plane dims
  std::vector<int> idx;
};

enum class ConvAlgo { kAuto, kGemm, kWinograd };

// 3x3 convolution, stride 1, zero padding 1 (cross-correlation, spatial
// dims preserved). weight is (out, in, 3, 3). backward() accumulates into
// weight.grad / bias.grad and returns the input gradient.
template <typename S>
struct Conv3x3 {
  Tensor<S> weight;
  std::vector<S> bias, bias_grad;
  ConvAlgo algo = ConvAlgo::kAuto;

  Conv3x3() = default;
  Conv3x3(int in_ch, int out_ch)
      : weight(out_ch, in_ch, 3, 3), bias(out_ch, S(0)), bias_grad(out_ch, S(0)) {
    weight.ensure_grad();
  }

  void init_he(std::mt19937& rng);
  Tensor<S> forward(const Tensor<S>& x);
  Tensor<S> backward(const Tensor<S>& dy);
  void zero_grad() {
    weight.zero_grad();
    std::fill(bias_grad.begin(), bias_grad.end(), S(0));
  }

 private:
  Tensor<S> input_;
};

// 3x3 transpose convolution, stride 1, padding 1: the exact adjoint of
// Conv3x3's linear map. weight is (in, out, 3, 3).
template <typename S>
struct Tconv3x3 {
  Tensor<S> weight;
  std::vector<S> bias, bias_grad;
  ConvAlgo algo = ConvAlgo::kAuto;

  Tconv3x3() = default;
  Tconv3x3(int in_ch, int out_ch)
      : weight(in_ch, out_ch, 3, 3), bias(out_ch, S(0)), bias_grad(out_ch, S(0)) {
    weight.ensure_grad();
  }

  void init_he(std::mt19937& rng);
  Tensor<S> forward(const Tensor<S>& x);
  Tensor<S> backward(const Tensor<S>& dy);
  void zero_grad() {
    weight.zero_grad();
    std::fill(bias_grad.begin(), bias_grad.end(), S(0));
  }

 private:
  Tensor<S> input_;
};

// 2x2 max-pool, stride 2. Spatial dims must be even (pad_to_even upstream).
// Ties resolve to the first cell in row-major order.
template <typename S>
struct MaxPool2x2 {
  PoolIndices indices;

  Tensor<S> forward(const Tensor<S>& x);
  Tensor<S> backward(const Tensor<S>& dy) const;
};

// Scatters pooled values back to their argmax cells; everything else zero.
template <typename S>
Tensor<S> unmaxpool2x2(const Tensor<S>& x, const PoolIndices& indices);
template <typename S>
Tensor<S> unmaxpool2x2_backward(const Tensor<S>& dy, const PoolIndices& indices);

// Replicates the last row/column when a spatial dim is odd, so pooling
// always sees even input. crop() undoes it after the matching unpool.
template <typename S>
Tensor<S> pad_to_even(const Tensor<S>& x);
template <typename S>
Tensor<S> pad_to_even_backward(const Tensor<S>& dy, int orig_h, int orig_w);
template <typename S>
Tensor<S> crop(const Tensor<S>& x, int out_h, int out_w);
template <typename S>
Tensor<S> crop_backward(const Tensor<S>& dy, int orig_h, int orig_w);

// Per-channel batch normalization over batch x H x W, eps 1e-5. Training
// mode normalizes with batch statistics and updates running stats with
// momentum 0.1 (unbiased variance, matching the usual convention); eval
// mode normalizes with the running stats.
template <typename S>
struct BatchNorm {
  std::vector<S> gamma, beta, gamma_grad, beta_grad;
  std::vector<S> running_mean, running_var;
  S eps = S(1e-5);
  S momentum = S(0.1);
  bool training = true;

  BatchNorm() = default;
  explicit BatchNorm(int channels)
      : gamma(channels, S(1)),
        beta(channels, S(0)),
        gamma_grad(channels, S(0)),
        beta_grad(channels, S(0)),
        running_mean(channels, S(0)),
        running_var(channels, S(1)) {}

  Tensor<S> forward(const Tensor<S>& x);
  Tensor<S> backward(const Tensor<S>& dy);
  void zero_grad() {
    std::fill(gamma_grad.begin(), gamma_grad.end(), S(0));
    std::fill(beta_grad.begin(), beta_grad.end(), S(0));
  }

 private:
  Tensor<S> xhat_;
  std::vector<S> inv_std_;
  bool cached_training_ = true;
};

template <typename S>
struct ReLU {
  Tensor<S> forward(const Tensor<S>& x);
  Tensor<S> backward(const Tensor<S>& dy) const;

 private:
  std::vector<uint8_t> mask_;
};

// Softmax over the channel dimension, numerically stable.
template <typename S>
Tensor<S> softmax_channels(const Tensor<S>& logits);

// Weighted two-class cross entropy over valid pixels of a (N, 2, H, W)
// logit tensor. targets holds one uint8 per pixel in batch-major order
// (0 background, 1 fruit, 255 invalid); class_weight is one {w_bg, w_fruit}
// pair per batch item. loss = -sum(w[t] log p[t]) / sum(w[t]) over valid
// pixels. A batch with no valid pixel is an error.
template <typename S>
struct CrossEntropy {
  S forward(const Tensor<S>& logits, const std::vector<uint8_t>& targets,
            const std::vector<std::array<S, 2>>& class_weight);
  Tensor<S> backward() const;

 private:
  Tensor<S> prob_;
  std::vector<uint8_t> targets_;
  std::vector<std::array<S, 2>> weights_;
  S weight_sum_ = S(0);
};

// One optimizer slot per registered parameter block. Standard Adam with
// bias correction; attach() order defines the state layout inside step().
template <typename S>
struct Adam {
  S lr = S(1e-3);
  S beta1 = S(0.9), beta2 = S(0.999);
  S eps = S(1e-8);
  long t = 0;

  void attach(S* param, const S* grad, std::size_t size) {
    params_.push_back({param, grad, size});
    m_.emplace_back(size, S(0));
    v_.emplace_back(size, S(0));
  }
  void attach(Tensor<S>& p) {
    p.ensure_grad();
    attach(p.data.data(), p.grad.data(), p.numel());
  }
  void attach(std::vector<S>& param, const std::vector<S>& grad) {
    attach(param.data(), grad.data(), param.size());
  }
  void step();
  std::size_t block_count() const { return params_.size(); }

 private:
  struct Slot {
    S* param;
    const S* grad;
    std::size_t size;
  };
  std::vector<Slot> params_;
  std::vector<std::vector<S>> m_, v_;
};

}  // namespace straw3d::nn
