#pragma once

// Internal reference kernels. All convolution variants accumulate each output
// element in a fixed order so results do not depend on row-level threading.

#include "segforge/tensor.hpp"

namespace segforge::kernels {

// Cross-correlation, SAME padding, stride 1. Weights are KH x KW x Cin x Cout.
Tensor conv2d_direct(const Tensor& x, const Tensor& w, int threads);
Tensor conv2d_im2col(const Tensor& x, const Tensor& w, int threads);

// Transpose convolution; output is exactly (H*stride, W*stride, Cout).
// Requires kernel >= stride. Weights are KH x KW x Cin x Cout with Cin the
// operator's input channel count.
Tensor conv_transpose2d_direct(const Tensor& x, const Tensor& w, int stride, int threads);
Tensor conv_transpose2d_im2col(const Tensor& x, const Tensor& w, int stride, int threads);

Tensor bias_add(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
Tensor maxpool2x2(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor softmax_channels(const Tensor& x);
Tensor batchnorm_frozen(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& mean, const Tensor& var, double epsilon);

}  // namespace segforge::kernels
