#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "straw3d/nn/ops.hpp"

namespace straw3d::nn {

enum class DecoderMode { kConv, kTconv };

struct NetConfig {
  int in_channels = 6;  // 3 (points), 6 (+normals) or 9 (+color)
  DecoderMode decoder = DecoderMode::kTconv;
};

// Serialization tags for parameter/state buffers.
enum : uint32_t {
  kBlockConvWeight = 1,
  kBlockConvBias = 2,
  kBlockTconvWeight = 3,
  kBlockTconvBias = 4,
  kBlockBnGamma = 5,
  kBlockBnBeta = 6,
  kBlockBnMean = 7,
  kBlockBnVar = 8,
};

template <typename S>
struct NetBlock {
  uint32_t kind;
  std::string name;
  std::vector<uint32_t> dims;
  S* data;
  S* grad;  // null for running statistics
  std::size_t size;
};

// Encoder-decoder segmentation network over organized point-cloud feature
// stacks: a VGG16-style contracting path whose four pooling index sets
// drive the matching unpools on the expanding path, with the pre-pool
// feature map of each scale added back in after its unpool. The decoder
// uses transpose convolutions (or plain convolutions, for the ablation);
// every (t)conv except the 2-channel head is followed by batch norm and
// ReLU. Spatial dims are padded to even before each pool and cropped back
// after the unpool, so any input of at least 16x16 flows through.
template <typename S>
class Cnn3d {
 public:
  Cnn3d() = default;
  explicit Cnn3d(const NetConfig& cfg, unsigned seed = 0);

  const NetConfig& config() const { return cfg_; }

  // training=true uses batch statistics in the norm layers (and updates
  // their running counterparts); training=false uses the running stats.
  Tensor<S> forward(const Tensor<S>& x, bool training);

  // Accumulates parameter gradients from the logit gradient and returns
  // the input gradient. Must follow a forward() call.
  Tensor<S> backward(const Tensor<S>& dlogits);

  void zero_grad();
  void register_params(Adam<S>& opt);

  // All parameter and state buffers in serialization order.
  std::vector<NetBlock<S>> blocks();

 private:
  NetConfig cfg_;
  std::vector<Conv3x3<S>> enc_;
  std::vector<BatchNorm<S>> enc_bn_;
  std::vector<ReLU<S>> enc_relu_;
  std::array<MaxPool2x2<S>, 4> pool_;
  std::vector<Conv3x3<S>> dec_conv_;
  std::vector<Tconv3x3<S>> dec_tconv_;
  std::vector<BatchNorm<S>> dec_bn_;
  std::vector<ReLU<S>> dec_relu_;

  std::array<std::pair<int, int>, 4> scale_dims_;  // pre-pool H,W per scale
  std::array<Tensor<S>, 4> skips_;
  std::array<Tensor<S>, 4> dskips_;

  Tensor<S> decoder_forward(int j, const Tensor<S>& x);
  Tensor<S> decoder_backward(int j, const Tensor<S>& dy);
};

// Binary checkpoint: magic "CN3D", version, input channel count, decoder
// mode, then every block with kind, dims and 32-bit little-endian payload.
// Round trips are bit-exact.
void save_checkpoint(const std::string& path, Cnn3d<float>& net);
Cnn3d<float> load_checkpoint(const std::string& path);

}  // namespace straw3d::nn
