#include "straw3d/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "straw3d/blas.hpp"
#include "straw3d/nn/winograd.hpp"

namespace straw3d::nn {

namespace {

// Lowered 3x3 patch matrix for output rows [y0, y0 + ny) of one batch item:
// col[(ic*9 + k) * (ny*w) + r*w + x] = x[ic][y0 + r + ky - 1][x + kx - 1],
// zero outside the image. Row-aligned chunks keep this a set of shifted
// row copies.
template <typename S>
void im2col3x3_rows(const S* x, int c, int h, int w, int y0, int ny, S* col) {
  const std::size_t len = static_cast<std::size_t>(ny) * w;
  for (int ic = 0; ic < c; ++ic) {
    const S* plane = x + static_cast<std::size_t>(ic) * h * w;
    for (int k = 0; k < 9; ++k) {
      const int ky = k / 3 - 1, kx = k % 3 - 1;
      S* dst = col + (static_cast<std::size_t>(ic) * 9 + k) * len;
      for (int r = 0; r < ny; ++r) {
        const int sy = y0 + r + ky;
        S* drow = dst + static_cast<std::size_t>(r) * w;
        if (sy < 0 || sy >= h) {
          std::fill(drow, drow + w, S(0));
          continue;
        }
        const S* srow = plane + static_cast<std::size_t>(sy) * w;
        if (kx == 0) {
          std::copy(srow, srow + w, drow);
        } else if (kx < 0) {
          drow[0] = S(0);
          std::copy(srow, srow + (w - 1), drow + 1);
        } else {
          std::copy(srow + 1, srow + w, drow);
          drow[w - 1] = S(0);
        }
      }
    }
  }
}

// Rows per lowering chunk, bounded so the chunk buffer stays ~32 MB even
// for wide-channel layers and full-resolution frames.
int chunk_rows(int c, int h, int w) {
  const std::size_t budget = std::size_t(8) << 20;  // elements
  const std::size_t per_row = static_cast<std::size_t>(c) * 9 * w;
  const std::size_t rows = std::max<std::size_t>(1, budget / std::max<std::size_t>(1, per_row));
  return static_cast<int>(std::min<std::size_t>(h, rows));
}

template <typename S>
bool want_winograd(ConvAlgo algo, int in_ch, int out_ch) {
  if (algo == ConvAlgo::kWinograd) return true;
  if (algo != ConvAlgo::kAuto) return false;
  // The tile transforms only amortize at training widths; the check build
  // (double) keeps the plain lowering for reference-grade arithmetic.
  return std::is_same_v<S, float> && in_ch >= 32 && out_ch >= 32;
}

// y = conv3x3(x; weight) + bias, stride 1, zero padding 1. weight is
// (out, in, 3, 3); bias may be empty. Shared by every (transpose-)conv
// forward and input-gradient path.
template <typename S>
void conv_core(const Tensor<S>& x, const Tensor<S>& weight, const std::vector<S>& bias,
               ConvAlgo algo, Tensor<S>& y) {
  const int out_ch = weight.n, in_ch = weight.c;
  if (x.c != in_ch)
    throw std::invalid_argument("conv3x3: input has " + std::to_string(x.c) +
                                " channels, weights expect " + std::to_string(in_ch));
  if (x.h < 1 || x.w < 1) throw std::invalid_argument("conv3x3: empty spatial dims");
  if (!bias.empty() && static_cast<int>(bias.size()) != out_ch)
    throw std::invalid_argument("conv3x3: bias length mismatch");

  if (want_winograd<S>(algo, in_ch, out_ch)) {
    winograd_conv3x3(x, weight, bias, y);
    return;
  }

  y = Tensor<S>(x.n, out_ch, x.h, x.w);
  const std::size_t hw = x.plane();
  const int rows = chunk_rows(in_ch, x.h, x.w);
  thread_local std::vector<S> col;
  col.resize(static_cast<std::size_t>(in_ch) * 9 * rows * x.w);

  for (int in = 0; in < x.n; ++in) {
    const S* xi = x.data.data() + static_cast<std::size_t>(in) * in_ch * hw;
    S* yi = y.data.data() + static_cast<std::size_t>(in) * out_ch * hw;
    for (int y0 = 0; y0 < x.h; y0 += rows) {
      const int ny = std::min(rows, x.h - y0);
      const std::size_t len = static_cast<std::size_t>(ny) * x.w;
      im2col3x3_rows(xi, in_ch, x.h, x.w, y0, ny, col.data());
      gemm<S>(false, false, out_ch, len, static_cast<std::size_t>(in_ch) * 9, S(1),
              weight.data.data(), static_cast<std::size_t>(in_ch) * 9, col.data(), len, S(0),
              yi + static_cast<std::size_t>(y0) * x.w, hw);
    }
    if (!bias.empty()) {
      for (int oc = 0; oc < out_ch; ++oc) {
        S* plane = yi + static_cast<std::size_t>(oc) * hw;
        const S b = bias[oc];
        for (std::size_t i = 0; i < hw; ++i) plane[i] += b;
      }
    }
  }
}

// dw[a][b][ky][kx] += sum_p va[a][p] * vb[b][p + k - 1] over every batch
// item; the (va, vb) = (dy, x) order gives conv weight gradients and the
// swapped order gives transpose-conv weight gradients.
template <typename S>
void accumulate_dw(const Tensor<S>& va, const Tensor<S>& vb, S* dw) {
  const std::size_t hw = va.plane();
  const int rows = chunk_rows(vb.c, vb.h, vb.w);
  thread_local std::vector<S> col;
  col.resize(static_cast<std::size_t>(vb.c) * 9 * rows * vb.w);

  for (int in = 0; in < va.n; ++in) {
    const S* ai = va.data.data() + static_cast<std::size_t>(in) * va.c * hw;
    const S* bi = vb.data.data() + static_cast<std::size_t>(in) * vb.c * hw;
    for (int y0 = 0; y0 < vb.h; y0 += rows) {
      const int ny = std::min(rows, vb.h - y0);
      const std::size_t len = static_cast<std::size_t>(ny) * vb.w;
      im2col3x3_rows(bi, vb.c, vb.h, vb.w, y0, ny, col.data());
      gemm<S>(false, true, va.c, static_cast<std::size_t>(vb.c) * 9, len, S(1),
              ai + static_cast<std::size_t>(y0) * vb.w, hw, col.data(), len, S(1), dw,
              static_cast<std::size_t>(vb.c) * 9);
    }
  }
}

// (a, b, 3, 3) -> (b, a, 3, 3) with both spatial dims flipped: turns a
// convolution weight into the weight of its adjoint map and vice versa.
template <typename S>
Tensor<S> flip_transpose(const Tensor<S>& w) {
  Tensor<S> out(w.c, w.n, 3, 3);
  for (int a = 0; a < w.n; ++a)
    for (int b = 0; b < w.c; ++b)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
          out.at(b, a, ky, kx) = w.at(a, b, 2 - ky, 2 - kx);
  return out;
}

template <typename S>
void accumulate_db(const Tensor<S>& dy, std::vector<S>& db) {
  const std::size_t hw = dy.plane();
  for (int in = 0; in < dy.n; ++in)
    for (int oc = 0; oc < dy.c; ++oc) {
      const S* plane = dy.data.data() + (static_cast<std::size_t>(in) * dy.c + oc) * hw;
      S s = 0;
      for (std::size_t i = 0; i < hw; ++i) s += plane[i];
      db[oc] += s;
    }
}

template <typename S>
void he_init(Tensor<S>& weight, int fan_in, std::mt19937& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (S& v : weight.data) v = static_cast<S>(dist(rng));
}

}  // namespace

template <typename S>
void Conv3x3<S>::init_he(std::mt19937& rng) {
  he_init(weight, weight.c * 9, rng);
  std::fill(bias.begin(), bias.end(), S(0));
}

template <typename S>
Tensor<S> Conv3x3<S>::forward(const Tensor<S>& x) {
  input_ = x;
  Tensor<S> y;
  conv_core(x, weight, bias, algo, y);
  return y;
}

template <typename S>
Tensor<S> Conv3x3<S>::backward(const Tensor<S>& dy) {
  if (dy.c != weight.n || dy.n != input_.n || dy.h != input_.h || dy.w != input_.w)
    throw std::invalid_argument("conv3x3 backward: gradient shape mismatch");
  weight.ensure_grad();
  accumulate_dw(dy, input_, weight.grad.data());
  accumulate_db(dy, bias_grad);
  Tensor<S> dx;
  conv_core(dy, flip_transpose(weight), {}, algo, dx);
  return dx;
}

template <typename S>
void Tconv3x3<S>::init_he(std::mt19937& rng) {
  he_init(weight, weight.n * 9, rng);
  std::fill(bias.begin(), bias.end(), S(0));
}

template <typename S>
Tensor<S> Tconv3x3<S>::forward(const Tensor<S>& x) {
  input_ = x;
  Tensor<S> y;
  conv_core(x, flip_transpose(weight), bias, algo, y);
  return y;
}

template <typename S>
Tensor<S> Tconv3x3<S>::backward(const Tensor<S>& dy) {
  if (dy.c != weight.c || dy.n != input_.n || dy.h != input_.h || dy.w != input_.w)
    throw std::invalid_argument("tconv3x3 backward: gradient shape mismatch");
  weight.ensure_grad();
  accumulate_dw(input_, dy, weight.grad.data());
  accumulate_db(dy, bias_grad);
  Tensor<S> dx;
  conv_core(dy, weight, {}, algo, dx);
  return dx;
}

template <typename S>
Tensor<S> MaxPool2x2<S>::forward(const Tensor<S>& x) {
  if (x.h % 2 != 0 || x.w % 2 != 0)
    throw std::invalid_argument("maxpool2x2: spatial dims must be even");
  Tensor<S> y(x.n, x.c, x.h / 2, x.w / 2);
  indices = PoolIndices{x.n, x.c, y.h, y.w, x.h, x.w, std::vector<int>(y.numel(), 0)};
  const std::size_t planes = static_cast<std::size_t>(x.n) * x.c;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const S* src = x.data.data() + pl * x.plane();
    S* dst = y.data.data() + pl * y.plane();
    int* idx = indices.idx.data() + pl * y.plane();
    for (int oy = 0; oy < y.h; ++oy)
      for (int ox = 0; ox < y.w; ++ox) {
        int best = (2 * oy) * x.w + 2 * ox;
        S bv = src[best];
        // row-major scan keeps the first max on ties
        const int cand[3] = {best + 1, best + x.w, best + x.w + 1};
        for (int ci : cand)
          if (src[ci] > bv) {
            bv = src[ci];
            best = ci;
          }
        dst[oy * y.w + ox] = bv;
        idx[oy * y.w + ox] = best;
      }
  }
  return y;
}

template <typename S>
Tensor<S> MaxPool2x2<S>::backward(const Tensor<S>& dy) const {
  if (dy.n != indices.n || dy.c != indices.c || dy.h != indices.h || dy.w != indices.w)
    throw std::invalid_argument("maxpool2x2 backward: gradient shape mismatch");
  Tensor<S> dx(dy.n, dy.c, indices.src_h, indices.src_w);
  const std::size_t planes = static_cast<std::size_t>(dy.n) * dy.c;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const S* g = dy.data.data() + pl * dy.plane();
    S* out = dx.data.data() + pl * dx.plane();
    const int* idx = indices.idx.data() + pl * dy.plane();
    for (std::size_t i = 0; i < dy.plane(); ++i) out[idx[i]] += g[i];
  }
  return dx;
}

template <typename S>
Tensor<S> unmaxpool2x2(const Tensor<S>& x, const PoolIndices& indices) {
  if (x.n != indices.n || x.c != indices.c || x.h != indices.h || x.w != indices.w)
    throw std::invalid_argument("unmaxpool2x2: input shape does not match indices");
  Tensor<S> y(x.n, x.c, indices.src_h, indices.src_w);
  const std::size_t planes = static_cast<std::size_t>(x.n) * x.c;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const S* src = x.data.data() + pl * x.plane();
    S* dst = y.data.data() + pl * y.plane();
    const int* idx = indices.idx.data() + pl * x.plane();
    for (std::size_t i = 0; i < x.plane(); ++i) dst[idx[i]] = src[i];
  }
  return y;
}

template <typename S>
Tensor<S> unmaxpool2x2_backward(const Tensor<S>& dy, const PoolIndices& indices) {
  if (dy.n != indices.n || dy.c != indices.c || dy.h != indices.src_h || dy.w != indices.src_w)
    throw std::invalid_argument("unmaxpool2x2 backward: gradient shape mismatch");
  Tensor<S> dx(indices.n, indices.c, indices.h, indices.w);
  const std::size_t planes = static_cast<std::size_t>(dy.n) * dy.c;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const S* g = dy.data.data() + pl * dy.plane();
    S* out = dx.data.data() + pl * dx.plane();
    const int* idx = indices.idx.data() + pl * dx.plane();
    for (std::size_t i = 0; i < dx.plane(); ++i) out[i] = g[idx[i]];
  }
  return dx;
}

template <typename S>
Tensor<S> pad_to_even(const Tensor<S>& x) {
  const int nh = x.h + (x.h & 1), nw = x.w + (x.w & 1);
  if (nh == x.h && nw == x.w) return x;
  Tensor<S> y(x.n, x.c, nh, nw);
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < nh; ++iy) {
        const int sy = std::min(iy, x.h - 1);
        const S* srow = &x.data[x.index(in, ic, sy, 0)];
        S* drow = &y.data[y.index(in, ic, iy, 0)];
        std::copy(srow, srow + x.w, drow);
        for (int ix = x.w; ix < nw; ++ix) drow[ix] = srow[x.w - 1];
      }
  return y;
}

template <typename S>
Tensor<S> pad_to_even_backward(const Tensor<S>& dy, int orig_h, int orig_w) {
  if (dy.h == orig_h && dy.w == orig_w) return dy;
  Tensor<S> dx(dy.n, dy.c, orig_h, orig_w);
  for (int in = 0; in < dy.n; ++in)
    for (int ic = 0; ic < dy.c; ++ic)
      for (int iy = 0; iy < dy.h; ++iy) {
        const int ty = std::min(iy, orig_h - 1);
        for (int ix = 0; ix < dy.w; ++ix) {
          const int tx = std::min(ix, orig_w - 1);
          dx.at(in, ic, ty, tx) += dy.at(in, ic, iy, ix);
        }
      }
  return dx;
}

template <typename S>
Tensor<S> crop(const Tensor<S>& x, int out_h, int out_w) {
  if (out_h > x.h || out_w > x.w) throw std::invalid_argument("crop: target exceeds input");
  if (out_h == x.h && out_w == x.w) return x;
  Tensor<S> y(x.n, x.c, out_h, out_w);
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < out_h; ++iy) {
        const S* srow = &x.data[x.index(in, ic, iy, 0)];
        std::copy(srow, srow + out_w, &y.data[y.index(in, ic, iy, 0)]);
      }
  return y;
}

template <typename S>
Tensor<S> crop_backward(const Tensor<S>& dy, int orig_h, int orig_w) {
  if (dy.h == orig_h && dy.w == orig_w) return dy;
  Tensor<S> dx(dy.n, dy.c, orig_h, orig_w);
  for (int in = 0; in < dy.n; ++in)
    for (int ic = 0; ic < dy.c; ++ic)
      for (int iy = 0; iy < dy.h; ++iy) {
        const S* srow = &dy.data[dy.index(in, ic, iy, 0)];
        std::copy(srow, srow + dy.w, &dx.data[dx.index(in, ic, iy, 0)]);
      }
  return dx;
}

template <typename S>
Tensor<S> BatchNorm<S>::forward(const Tensor<S>& x) {
  const int channels = static_cast<int>(gamma.size());
  if (x.c != channels) throw std::invalid_argument("batchnorm: channel mismatch");
  const std::size_t hw = x.plane();
  const std::size_t count = static_cast<std::size_t>(x.n) * hw;
  if (count == 0) throw std::invalid_argument("batchnorm: empty input");

  Tensor<S> y(x.n, x.c, x.h, x.w);
  xhat_ = Tensor<S>(x.n, x.c, x.h, x.w);
  inv_std_.assign(channels, S(0));
  cached_training_ = training;

  for (int ic = 0; ic < channels; ++ic) {
    S mean, istd;
    if (training) {
      double sum = 0.0, sq = 0.0;
      for (int in = 0; in < x.n; ++in) {
        const S* plane = x.data.data() + (static_cast<std::size_t>(in) * x.c + ic) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum += plane[i];
          sq += static_cast<double>(plane[i]) * plane[i];
        }
      }
      const double m = sum / count;
      const double var = std::max(0.0, sq / count - m * m);
      mean = static_cast<S>(m);
      istd = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      const double unbiased = count > 1 ? var * count / (count - 1.0) : var;
      running_mean[ic] = (S(1) - momentum) * running_mean[ic] + momentum * mean;
      running_var[ic] = (S(1) - momentum) * running_var[ic] + momentum * static_cast<S>(unbiased);
    } else {
      mean = running_mean[ic];
      istd = S(1) / std::sqrt(running_var[ic] + eps);
    }
    inv_std_[ic] = istd;
    const S g = gamma[ic], b = beta[ic];
    for (int in = 0; in < x.n; ++in) {
      const S* xp = x.data.data() + (static_cast<std::size_t>(in) * x.c + ic) * hw;
      S* hp = xhat_.data.data() + (static_cast<std::size_t>(in) * x.c + ic) * hw;
      S* yp = y.data.data() + (static_cast<std::size_t>(in) * x.c + ic) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        hp[i] = (xp[i] - mean) * istd;
        yp[i] = g * hp[i] + b;
      }
    }
  }
  return y;
}

template <typename S>
Tensor<S> BatchNorm<S>::backward(const Tensor<S>& dy) {
  if (!dy.same_shape(xhat_)) throw std::invalid_argument("batchnorm backward: shape mismatch");
  const int channels = static_cast<int>(gamma.size());
  const std::size_t hw = dy.plane();
  const double count = static_cast<double>(dy.n) * hw;
  Tensor<S> dx(dy.n, dy.c, dy.h, dy.w);

  for (int ic = 0; ic < channels; ++ic) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int in = 0; in < dy.n; ++in) {
      const S* gp = dy.data.data() + (static_cast<std::size_t>(in) * dy.c + ic) * hw;
      const S* hp = xhat_.data.data() + (static_cast<std::size_t>(in) * dy.c + ic) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += gp[i];
        sum_dy_xhat += static_cast<double>(gp[i]) * hp[i];
      }
    }
    gamma_grad[ic] += static_cast<S>(sum_dy_xhat);
    beta_grad[ic] += static_cast<S>(sum_dy);

    const S g_istd = gamma[ic] * inv_std_[ic];
    for (int in = 0; in < dy.n; ++in) {
      const S* gp = dy.data.data() + (static_cast<std::size_t>(in) * dy.c + ic) * hw;
      const S* hp = xhat_.data.data() + (static_cast<std::size_t>(in) * dy.c + ic) * hw;
      S* dp = dx.data.data() + (static_cast<std::size_t>(in) * dy.c + ic) * hw;
      if (cached_training_) {
        // d/dx of batch-stat normalization: the mean and variance terms
        // feed back through every element of the channel
        const S a = static_cast<S>(sum_dy / count);
        const S b = static_cast<S>(sum_dy_xhat / count);
        for (std::size_t i = 0; i < hw; ++i) dp[i] = g_istd * (gp[i] - a - hp[i] * b);
      } else {
        for (std::size_t i = 0; i < hw; ++i) dp[i] = g_istd * gp[i];
      }
    }
  }
  return dx;
}

template <typename S>
Tensor<S> ReLU<S>::forward(const Tensor<S>& x) {
  Tensor<S> y(x.n, x.c, x.h, x.w);
  mask_.assign(x.numel(), 0);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (x.data[i] > S(0)) {
      y.data[i] = x.data[i];
      mask_[i] = 1;
    }
  }
  return y;
}

template <typename S>
Tensor<S> ReLU<S>::backward(const Tensor<S>& dy) const {
  if (dy.numel() != mask_.size()) throw std::invalid_argument("relu backward: shape mismatch");
  Tensor<S> dx(dy.n, dy.c, dy.h, dy.w);
  for (std::size_t i = 0; i < dy.numel(); ++i)
    if (mask_[i]) dx.data[i] = dy.data[i];
  return dx;
}

template <typename S>
Tensor<S> softmax_channels(const Tensor<S>& logits) {
  Tensor<S> p(logits.n, logits.c, logits.h, logits.w);
  const std::size_t hw = logits.plane();
  for (int in = 0; in < logits.n; ++in) {
    const S* base = logits.data.data() + static_cast<std::size_t>(in) * logits.c * hw;
    S* out = p.data.data() + static_cast<std::size_t>(in) * logits.c * hw;
    for (std::size_t i = 0; i < hw; ++i) {
      S m = base[i];
      for (int ic = 1; ic < logits.c; ++ic) m = std::max(m, base[ic * hw + i]);
      S denom = S(0);
      for (int ic = 0; ic < logits.c; ++ic) {
        const S e = std::exp(base[ic * hw + i] - m);
        out[ic * hw + i] = e;
        denom += e;
      }
      for (int ic = 0; ic < logits.c; ++ic) out[ic * hw + i] /= denom;
    }
  }
  return p;
}

template <typename S>
S CrossEntropy<S>::forward(const Tensor<S>& logits, const std::vector<uint8_t>& targets,
                           const std::vector<std::array<S, 2>>& class_weight) {
  if (logits.c != 2) throw std::invalid_argument("cross entropy: expected 2 logit channels");
  const std::size_t hw = logits.plane();
  if (targets.size() != static_cast<std::size_t>(logits.n) * hw)
    throw std::invalid_argument("cross entropy: target count mismatch");
  if (class_weight.size() != 1 && class_weight.size() != static_cast<std::size_t>(logits.n))
    throw std::invalid_argument("cross entropy: one weight pair per batch item (or one shared)");
  for (const auto& cw : class_weight)
    if (!(cw[0] > S(0)) || !(cw[1] > S(0)))
      throw std::invalid_argument("cross entropy: class weights must be positive");

  prob_ = softmax_channels(logits);
  targets_ = targets;
  weights_.assign(logits.n, class_weight.size() == 1 ? class_weight[0] : std::array<S, 2>{});
  if (class_weight.size() != 1) weights_ = class_weight;

  double loss = 0.0, wsum = 0.0;
  for (int in = 0; in < logits.n; ++in) {
    const S* base = logits.data.data() + static_cast<std::size_t>(in) * 2 * hw;
    const uint8_t* t = targets.data() + static_cast<std::size_t>(in) * hw;
    for (std::size_t i = 0; i < hw; ++i) {
      if (t[i] > 1) continue;
      const S l0 = base[i], l1 = base[hw + i];
      const S m = std::max(l0, l1);
      const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
      const double w = weights_[in][t[i]];
      loss += w * (lse - (t[i] ? l1 : l0));
      wsum += w;
    }
  }
  if (wsum == 0.0) throw std::runtime_error("cross entropy: batch has no valid pixels");
  weight_sum_ = static_cast<S>(wsum);
  return static_cast<S>(loss / wsum);
}

template <typename S>
Tensor<S> CrossEntropy<S>::backward() const {
  if (prob_.numel() == 0) throw std::logic_error("cross entropy backward before forward");
  Tensor<S> dl(prob_.n, 2, prob_.h, prob_.w);
  const std::size_t hw = prob_.plane();
  for (int in = 0; in < prob_.n; ++in) {
    const S* p = prob_.data.data() + static_cast<std::size_t>(in) * 2 * hw;
    const uint8_t* t = targets_.data() + static_cast<std::size_t>(in) * hw;
    S* g = dl.data.data() + static_cast<std::size_t>(in) * 2 * hw;
    for (std::size_t i = 0; i < hw; ++i) {
      if (t[i] > 1) continue;
      const S scale = weights_[in][t[i]] / weight_sum_;
      g[i] = scale * (p[i] - (t[i] == 0 ? S(1) : S(0)));
      g[hw + i] = scale * (p[hw + i] - (t[i] == 1 ? S(1) : S(0)));
    }
  }
  return dl;
}

template <typename S>
void Adam<S>::step() {
  ++t;
  const double bc1 = 1.0 - std::pow(static_cast<double>(beta1), static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(static_cast<double>(beta2), static_cast<double>(t));
  for (std::size_t s = 0; s < params_.size(); ++s) {
    S* w = params_[s].param;
    const S* g = params_[s].grad;
    S* m = m_[s].data();
    S* v = v_[s].data();
    for (std::size_t i = 0; i < params_[s].size; ++i) {
      m[i] = beta1 * m[i] + (S(1) - beta1) * g[i];
      v[i] = beta2 * v[i] + (S(1) - beta2) * g[i] * g[i];
      const S mhat = static_cast<S>(m[i] / bc1);
      const S vhat = static_cast<S>(v[i] / bc2);
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template struct Conv3x3<float>;
template struct Conv3x3<double>;
template struct Tconv3x3<float>;
template struct Tconv3x3<double>;
template struct MaxPool2x2<float>;
template struct MaxPool2x2<double>;
template struct BatchNorm<float>;
template struct BatchNorm<double>;
template struct ReLU<float>;
template struct ReLU<double>;
template struct CrossEntropy<float>;
template struct CrossEntropy<double>;
template struct Adam<float>;
template struct Adam<double>;

template Tensor<float> unmaxpool2x2(const Tensor<float>&, const PoolIndices&);
template Tensor<double> unmaxpool2x2(const Tensor<double>&, const PoolIndices&);
template Tensor<float> unmaxpool2x2_backward(const Tensor<float>&, const PoolIndices&);
template Tensor<double> unmaxpool2x2_backward(const Tensor<double>&, const PoolIndices&);
template Tensor<float> pad_to_even(const Tensor<float>&);
template Tensor<double> pad_to_even(const Tensor<double>&);
template Tensor<float> pad_to_even_backward(const Tensor<float>&, int, int);
template Tensor<double> pad_to_even_backward(const Tensor<double>&, int, int);
template Tensor<float> crop(const Tensor<float>&, int, int);
template Tensor<double> crop(const Tensor<double>&, int, int);
template Tensor<float> crop_backward(const Tensor<float>&, int, int);
template Tensor<double> crop_backward(const Tensor<double>&, int, int);
template Tensor<float> softmax_channels(const Tensor<float>&);
template Tensor<double> softmax_channels(const Tensor<double>&);

}  // namespace straw3d::nn
