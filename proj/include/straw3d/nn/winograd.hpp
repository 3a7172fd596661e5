#pragma once

#include <vector>

#include "straw3d/nn/tensor.hpp"

namespace straw3d::nn {

// 3x3 convolution, stride 1, zero padding 1, computed with the Winograd
// F(4x4,3x3) tile transform: ~2.25x fewer multiplies than direct form.
// weight is (out, in, 3, 3); bias may be empty. y is resized to match.
template <typename S>
void winograd_conv3x3(const Tensor<S>& x, const Tensor<S>& weight,
                      const std::vector<S>& bias, Tensor<S>& y);

}  // namespace straw3d::nn
