#include "straw3d/nn/winograd.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "straw3d/blas.hpp"

namespace straw3d::nn {

namespace {

// F(4x4,3x3) over interpolation points {0, +-1, +-2, inf}. Each 6x6 matrix
// product is two passes of the corresponding 6-point stencil.

template <typename S>
inline void input_stencil(const S d[6], S o[6]) {
  o[0] = S(4) * d[0] - S(5) * d[2] + d[4];
  o[1] = S(-4) * d[1] - S(4) * d[2] + d[3] + d[4];
  o[2] = S(4) * d[1] - S(4) * d[2] - d[3] + d[4];
  o[3] = S(-2) * d[1] - d[2] + S(2) * d[3] + d[4];
  o[4] = S(2) * d[1] - d[2] - S(2) * d[3] + d[4];
  o[5] = S(4) * d[1] - S(5) * d[3] + d[5];
}

template <typename S>
inline void weight_stencil(const S g[3], S o[6]) {
  o[0] = g[0] / S(4);
  o[1] = (-g[0] - g[1] - g[2]) / S(6);
  o[2] = (-g[0] + g[1] - g[2]) / S(6);
  o[3] = g[0] / S(24) + g[1] / S(12) + g[2] / S(6);
  o[4] = g[0] / S(24) - g[1] / S(12) + g[2] / S(6);
  o[5] = g[2];
}

template <typename S>
inline void output_stencil(const S m[6], S o[4]) {
  o[0] = m[0] + m[1] + m[2] + m[3] + m[4];
  o[1] = m[1] - m[2] + S(2) * m[3] - S(2) * m[4];
  o[2] = m[1] + m[2] + S(4) * m[3] + S(4) * m[4];
  o[3] = m[1] - m[2] + S(8) * m[3] - S(8) * m[4] + m[5];
}

// B^T d B for one 6x6 input patch.
template <typename S>
void transform_input_tile(const S d[36], S u[36]) {
  S tmp[36], col[6], out[6];
  for (int j = 0; j < 6; ++j) {
    for (int i = 0; i < 6; ++i) col[i] = d[i * 6 + j];
    input_stencil(col, out);
    for (int i = 0; i < 6; ++i) tmp[i * 6 + j] = out[i];
  }
  for (int i = 0; i < 6; ++i) input_stencil(tmp + i * 6, u + i * 6);
}

// G g G^T for one 3x3 kernel.
template <typename S>
void transform_weight(const S g[9], S u[36]) {
  S tmp[18], col[3], out[6];
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) col[i] = g[i * 3 + j];
    weight_stencil(col, out);
    for (int i = 0; i < 6; ++i) tmp[i * 3 + j] = out[i];
  }
  for (int i = 0; i < 6; ++i) weight_stencil(tmp + i * 3, u + i * 6);
}

// A^T m A for one 6x6 product tile.
template <typename S>
void transform_output_tile(const S m[36], S o[16]) {
  S tmp[24], col[6], out[4];
  for (int j = 0; j < 6; ++j) {
    for (int i = 0; i < 6; ++i) col[i] = m[i * 6 + j];
    output_stencil(col, out);
    for (int i = 0; i < 4; ++i) tmp[i * 6 + j] = out[i];
  }
  for (int i = 0; i < 4; ++i) output_stencil(tmp + i * 6, o + i * 4);
}

}  // namespace

template <typename S>
void winograd_conv3x3(const Tensor<S>& x, const Tensor<S>& weight, const std::vector<S>& bias,
                      Tensor<S>& y) {
  const int out_ch = weight.n, in_ch = weight.c;
  if (x.c != in_ch) throw std::invalid_argument("winograd: channel mismatch");
  if (weight.h != 3 || weight.w != 3) throw std::invalid_argument("winograd: 3x3 kernels only");

  y = Tensor<S>(x.n, out_ch, x.h, x.w);
  const int th = (x.h + 3) / 4, tw = (x.w + 3) / 4;
  const std::size_t total_tiles = static_cast<std::size_t>(th) * tw;
  const std::size_t hw = x.plane();

  // V[pos][k][c]: transformed kernels, shared across tiles and batch items
  thread_local std::vector<S> vbuf;
  vbuf.resize(static_cast<std::size_t>(36) * out_ch * in_ch);
  {
    S u[36];
    for (int k = 0; k < out_ch; ++k)
      for (int c = 0; c < in_ch; ++c) {
        transform_weight(&weight.data[weight.index(k, c, 0, 0)], u);
        for (int pos = 0; pos < 36; ++pos)
          vbuf[(static_cast<std::size_t>(pos) * out_ch + k) * in_ch + c] = u[pos];
      }
  }

  // Tiles are processed in chunks so U/M stay a few tens of MB at full
  // frame resolution.
  const std::size_t budget = std::size_t(6) << 20;  // elements per buffer
  const std::size_t tn = std::clamp<std::size_t>(
      budget / (36 * static_cast<std::size_t>(std::max(in_ch, out_ch))), 16, total_tiles);
  thread_local std::vector<S> ubuf, mbuf;
  ubuf.resize(36 * tn * in_ch);
  mbuf.resize(36 * tn * out_ch);

  for (int in = 0; in < x.n; ++in) {
    const S* xi = x.data.data() + static_cast<std::size_t>(in) * in_ch * hw;
    S* yi = y.data.data() + static_cast<std::size_t>(in) * out_ch * hw;

    for (std::size_t t0 = 0; t0 < total_tiles; t0 += tn) {
      const std::size_t cnt = std::min(tn, total_tiles - t0);

      for (int ic = 0; ic < in_ch; ++ic) {
        const S* plane = xi + static_cast<std::size_t>(ic) * hw;
        for (std::size_t j = 0; j < cnt; ++j) {
          const std::size_t tile = t0 + j;
          const int ty = static_cast<int>(tile) / tw, tx = static_cast<int>(tile) % tw;
          const int y0 = 4 * ty - 1, x0 = 4 * tx - 1;
          S d[36];
          if (y0 >= 0 && y0 + 6 <= x.h && x0 >= 0 && x0 + 6 <= x.w) {
            for (int r = 0; r < 6; ++r)
              std::copy(plane + static_cast<std::size_t>(y0 + r) * x.w + x0,
                        plane + static_cast<std::size_t>(y0 + r) * x.w + x0 + 6, d + r * 6);
          } else {
            for (int r = 0; r < 6; ++r) {
              const int sy = y0 + r;
              for (int cx = 0; cx < 6; ++cx) {
                const int sx = x0 + cx;
                d[r * 6 + cx] = (sy >= 0 && sy < x.h && sx >= 0 && sx < x.w)
                                    ? plane[static_cast<std::size_t>(sy) * x.w + sx]
                                    : S(0);
              }
            }
          }
          S u[36];
          transform_input_tile(d, u);
          for (int pos = 0; pos < 36; ++pos)
            ubuf[(static_cast<std::size_t>(pos) * in_ch + ic) * cnt + j] = u[pos];
        }
      }

      for (int pos = 0; pos < 36; ++pos)
        gemm<S>(false, false, out_ch, cnt, in_ch, S(1),
                vbuf.data() + static_cast<std::size_t>(pos) * out_ch * in_ch, in_ch,
                ubuf.data() + static_cast<std::size_t>(pos) * in_ch * cnt, cnt, S(0),
                mbuf.data() + static_cast<std::size_t>(pos) * out_ch * cnt, cnt);

      for (int k = 0; k < out_ch; ++k) {
        const S b = bias.empty() ? S(0) : bias[k];
        S* oplane = yi + static_cast<std::size_t>(k) * hw;
        for (std::size_t j = 0; j < cnt; ++j) {
          const std::size_t tile = t0 + j;
          const int ty = static_cast<int>(tile) / tw, tx = static_cast<int>(tile) % tw;
          S m[36], o[16];
          for (int pos = 0; pos < 36; ++pos)
            m[pos] = mbuf[(static_cast<std::size_t>(pos) * out_ch + k) * cnt + j];
          transform_output_tile(m, o);
          const int ylim = std::min(4, x.h - 4 * ty), xlim = std::min(4, x.w - 4 * tx);
          for (int r = 0; r < ylim; ++r) {
            S* orow = oplane + static_cast<std::size_t>(4 * ty + r) * x.w + 4 * tx;
            for (int cx = 0; cx < xlim; ++cx) orow[cx] = o[r * 4 + cx] + b;
          }
        }
      }
    }
  }
}

template void winograd_conv3x3<float>(const Tensor<float>&, const Tensor<float>&,
                                      const std::vector<float>&, Tensor<float>&);
template void winograd_conv3x3<double>(const Tensor<double>&, const Tensor<double>&,
                                       const std::vector<double>&, Tensor<double>&);

}  // namespace straw3d::nn
