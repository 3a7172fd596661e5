#include "straw3d/nn/net.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace straw3d::nn {

namespace {

// Encoder: conv widths per layer; a 2x2 pool follows layers 1, 3, 6 and 9.
// Layers 10-12 form the latent stack at 1/16 resolution.
constexpr int kEncOut[13] = {64,  64,  128, 128, 256, 256, 256,
                             512, 512, 512, 512, 512, 512};
constexpr int kPoolAfter[4] = {1, 3, 6, 9};

// Decoder: three 512-wide layers at 1/16, then two layers per merge scale
// (one at the last) and a 2-channel head. Unpool + skip-add happens before
// layers 3, 5, 7 and 8.
constexpr int kDecIn[9] = {512, 512, 512, 512, 512, 256, 256, 128, 64};
constexpr int kDecOut[9] = {512, 512, 512, 512, 256, 256, 128, 64, 2};

template <typename S>
void add_inplace(Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_shape(b)) throw std::logic_error("skip add: shape mismatch");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

}  // namespace

template <typename S>
Cnn3d<S>::Cnn3d(const NetConfig& cfg, unsigned seed) : cfg_(cfg) {
  if (cfg.in_channels != 3 && cfg.in_channels != 6 && cfg.in_channels != 9)
    throw std::invalid_argument("network input must have 3, 6 or 9 channels, got " +
                                std::to_string(cfg.in_channels));
  std::mt19937 rng(seed);
  enc_.reserve(13);
  enc_bn_.reserve(13);
  enc_relu_.resize(13);
  int in = cfg.in_channels;
  for (int i = 0; i < 13; ++i) {
    enc_.emplace_back(in, kEncOut[i]);
    enc_.back().init_he(rng);
    enc_bn_.emplace_back(kEncOut[i]);
    in = kEncOut[i];
  }
  dec_bn_.reserve(8);
  dec_relu_.resize(8);
  for (int j = 0; j < 9; ++j) {
    if (cfg_.decoder == DecoderMode::kTconv) {
      dec_tconv_.emplace_back(kDecIn[j], kDecOut[j]);
      dec_tconv_.back().init_he(rng);
    } else {
      dec_conv_.emplace_back(kDecIn[j], kDecOut[j]);
      dec_conv_.back().init_he(rng);
    }
    if (j < 8) dec_bn_.emplace_back(kDecOut[j]);
  }
}

template <typename S>
Tensor<S> Cnn3d<S>::decoder_forward(int j, const Tensor<S>& x) {
  Tensor<S> t = cfg_.decoder == DecoderMode::kTconv ? dec_tconv_[j].forward(x)
                                                    : dec_conv_[j].forward(x);
  if (j < 8) t = dec_relu_[j].forward(dec_bn_[j].forward(t));
  return t;
}

template <typename S>
Tensor<S> Cnn3d<S>::decoder_backward(int j, const Tensor<S>& dy) {
  Tensor<S> d = dy;
  if (j < 8) d = dec_bn_[j].backward(dec_relu_[j].backward(d));
  return cfg_.decoder == DecoderMode::kTconv ? dec_tconv_[j].backward(d)
                                             : dec_conv_[j].backward(d);
}

template <typename S>
Tensor<S> Cnn3d<S>::forward(const Tensor<S>& x, bool training) {
  if (x.c != cfg_.in_channels)
    throw std::invalid_argument("forward: expected " + std::to_string(cfg_.in_channels) +
                                " input channels, got " + std::to_string(x.c));
  if (x.h < 16 || x.w < 16)
    throw std::invalid_argument("forward: spatial dims must be at least 16x16");
  for (auto& bn : enc_bn_) bn.training = training;
  for (auto& bn : dec_bn_) bn.training = training;

  Tensor<S> t = x;
  int scale = 0;
  for (int i = 0; i < 13; ++i) {
    t = enc_relu_[i].forward(enc_bn_[i].forward(enc_[i].forward(t)));
    if (scale < 4 && i == kPoolAfter[scale]) {
      skips_[scale] = t;
      scale_dims_[scale] = {t.h, t.w};
      t = pool_[scale].forward(pad_to_even(t));
      ++scale;
    }
  }

  for (int j = 0; j < 9; ++j) {
    // merge points: unpool against the matching encoder scale, crop the
    // even-padding back off, then add the skip feature map
    int merge = j == 3 ? 3 : j == 5 ? 2 : j == 7 ? 1 : j == 8 ? 0 : -1;
    if (merge >= 0) {
      t = crop(unmaxpool2x2(t, pool_[merge].indices), scale_dims_[merge].first,
               scale_dims_[merge].second);
      add_inplace(t, skips_[merge]);
    }
    t = decoder_forward(j, t);
  }
  return t;
}

template <typename S>
Tensor<S> Cnn3d<S>::backward(const Tensor<S>& dlogits) {
  Tensor<S> d = dlogits;
  for (int j = 8; j >= 0; --j) {
    d = decoder_backward(j, d);
    int merge = j == 3 ? 3 : j == 5 ? 2 : j == 7 ? 1 : j == 8 ? 0 : -1;
    if (merge >= 0) {
      dskips_[merge] = d;  // the add routes the same gradient to the skip
      d = unmaxpool2x2_backward(
          crop_backward(d, pool_[merge].indices.src_h, pool_[merge].indices.src_w),
          pool_[merge].indices);
    }
  }

  int scale = 3;
  for (int i = 12; i >= 0; --i) {
    if (scale >= 0 && i == kPoolAfter[scale]) {
      d = pad_to_even_backward(pool_[scale].backward(d), scale_dims_[scale].first,
                               scale_dims_[scale].second);
      add_inplace(d, dskips_[scale]);
      --scale;
    }
    d = enc_[i].backward(enc_bn_[i].backward(enc_relu_[i].backward(d)));
  }
  return d;
}

template <typename S>
void Cnn3d<S>::zero_grad() {
  for (auto& c : enc_) c.zero_grad();
  for (auto& b : enc_bn_) b.zero_grad();
  for (auto& c : dec_conv_) c.zero_grad();
  for (auto& c : dec_tconv_) c.zero_grad();
  for (auto& b : dec_bn_) b.zero_grad();
}

template <typename S>
void Cnn3d<S>::register_params(Adam<S>& opt) {
  for (auto& blk : blocks())
    if (blk.grad) opt.attach(blk.data, blk.grad, blk.size);
}

template <typename S>
std::vector<NetBlock<S>> Cnn3d<S>::blocks() {
  std::vector<NetBlock<S>> out;
  auto dims4 = [](const Tensor<S>& t) {
    return std::vector<uint32_t>{uint32_t(t.n), uint32_t(t.c), uint32_t(t.h),
                                 uint32_t(t.w)};
  };
  auto push_vec = [&](uint32_t kind, const std::string& name, std::vector<S>& v,
                      std::vector<S>* g) {
    out.push_back({kind, name, {uint32_t(v.size())}, v.data(),
                   g ? g->data() : nullptr, v.size()});
  };
  auto push_bn = [&](BatchNorm<S>& bn, const std::string& name) {
    push_vec(kBlockBnGamma, name + ".gamma", bn.gamma, &bn.gamma_grad);
    push_vec(kBlockBnBeta, name + ".beta", bn.beta, &bn.beta_grad);
    push_vec(kBlockBnMean, name + ".running_mean", bn.running_mean, nullptr);
    push_vec(kBlockBnVar, name + ".running_var", bn.running_var, nullptr);
  };
  for (int i = 0; i < 13; ++i) {
    std::string name = "enc" + std::to_string(i);
    enc_[i].weight.ensure_grad();
    out.push_back({kBlockConvWeight, name + ".weight", dims4(enc_[i].weight),
                   enc_[i].weight.data.data(), enc_[i].weight.grad.data(),
                   enc_[i].weight.numel()});
    push_vec(kBlockConvBias, name + ".bias", enc_[i].bias, &enc_[i].bias_grad);
    push_bn(enc_bn_[i], name + ".bn");
  }
  const bool tconv = cfg_.decoder == DecoderMode::kTconv;
  for (int j = 0; j < 9; ++j) {
    std::string name = "dec" + std::to_string(j);
    Tensor<S>& w = tconv ? dec_tconv_[j].weight : dec_conv_[j].weight;
    w.ensure_grad();
    out.push_back({tconv ? kBlockTconvWeight : kBlockConvWeight, name + ".weight",
                   dims4(w), w.data.data(), w.grad.data(), w.numel()});
    if (tconv)
      push_vec(kBlockTconvBias, name + ".bias", dec_tconv_[j].bias,
               &dec_tconv_[j].bias_grad);
    else
      push_vec(kBlockConvBias, name + ".bias", dec_conv_[j].bias,
               &dec_conv_[j].bias_grad);
    if (j < 8) push_bn(dec_bn_[j], name + ".bn");
  }
  return out;
}

template class Cnn3d<float>;
template class Cnn3d<double>;

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

constexpr uint32_t kCkptVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, Cnn3d<float>& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write("CN3D", 4);
  put_u32(os, kCkptVersion);
  put_u32(os, uint32_t(net.config().in_channels));
  put_u32(os, net.config().decoder == DecoderMode::kTconv ? 1 : 0);
  auto blocks = net.blocks();
  put_u32(os, uint32_t(blocks.size()));
  for (const auto& blk : blocks) {
    put_u32(os, blk.kind);
    put_u32(os, uint32_t(blk.dims.size()));
    for (uint32_t d : blk.dims) put_u32(os, d);
    static_assert(sizeof(float) == 4 && std::endian::native == std::endian::little);
    os.write(reinterpret_cast<const char*>(blk.data),
             std::streamsize(blk.size * sizeof(float)));
  }
  if (!os) throw std::runtime_error("short write on checkpoint: " + path);
}

Cnn3d<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CN3D", 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  uint32_t version = get_u32(is);
  if (version != kCkptVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + ": " + path);
  NetConfig cfg;
  cfg.in_channels = int(get_u32(is));
  uint32_t dec = get_u32(is);
  if (dec > 1) throw std::runtime_error("corrupt decoder mode in checkpoint: " + path);
  cfg.decoder = dec ? DecoderMode::kTconv : DecoderMode::kConv;
  Cnn3d<float> net(cfg, 0);
  auto blocks = net.blocks();
  uint32_t count = get_u32(is);
  if (!is || count != blocks.size())
    throw std::runtime_error("checkpoint does not match the network layout (" +
                             std::to_string(count) + " blocks, expected " +
                             std::to_string(blocks.size()) + "): " + path);
  for (auto& blk : blocks) {
    uint32_t kind = get_u32(is);
    uint32_t ndim = get_u32(is);
    std::vector<uint32_t> dims(ndim);
    for (auto& d : dims) d = get_u32(is);
    if (!is || kind != blk.kind || dims != blk.dims)
      throw std::runtime_error("checkpoint does not match the network layout at " +
                               blk.name + ": " + path);
    is.read(reinterpret_cast<char*>(blk.data),
            std::streamsize(blk.size * sizeof(float)));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  is.peek();
  if (!is.eof()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return net;
}

}  // namespace straw3d::nn
