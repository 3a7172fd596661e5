#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace straw3d::nn {

// Dense batch-major (N, C, H, W) tensor, row-major storage. S is float in
// training builds and double in gradient-check mode. The gradient buffer is
// allocated lazily; when present it always matches data in length.
template <typename S>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<S> data;
  std::vector<S> grad;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(check_shape(n_, c_, h_, w_), S(0)) {}

  std::size_t numel() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

  std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
  }
  S& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
  S at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), S(0));
  }

 private:
  static std::size_t check_shape(int n_, int c_, int h_, int w_) {
    if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
      throw std::invalid_argument("tensor dimensions must be non-negative");
    return static_cast<std::size_t>(n_) * c_ * h_ * w_;
  }
};

}  // namespace straw3d::nn
