// Copyright 2026 The hsiseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "hsiseg/tensor.hpp"

// Forward and adjoint kernels for the primitives of the autoencoder. These
// work on plain tensors; the tape in autodiff.hpp wires them together.
//
// Volumes are laid out [channels, height, width, depth] with depth (the
// spectral axis) contiguous. A rank-3 volume is read as a single channel.
// Kernels are [out_channels, in_channels, kh, kw, kd]; a rank-4 kernel
// [out_channels, kh, kw, kd] has one input channel.

namespace hsiseg::ops {

struct ConvGeometry {
  std::size_t in_channels, out_channels;
  std::size_t in_h, in_w, in_d;
  std::size_t k_h, k_w, k_d;
  std::size_t out_h, out_w, out_d;
};

/// Validates shapes for a valid, unit-stride 3D convolution.
ConvGeometry conv_geometry(const Shape& input, const Shape& kernels);

/// Geometry of the transposed convolution that is the adjoint of the
/// convolution with the same kernels: `input` has out_channels channels.
ConvGeometry transpose_geometry(const Shape& input, const Shape& kernels);

/// out[k,i,j,l] = bias[k] + sum_{c,a,b,e} x[c,i+a,j+b,l+e] * w[k,c,a,b,e]
Tensor conv3d_valid(const Tensor& input, const Tensor& kernels,
                    const Tensor& bias);

/// Adjoint of conv3d_valid in its input argument, plus a per-channel bias.
/// The result has the shape of the convolution's input.
Tensor conv3d_transpose(const Tensor& input, const Tensor& kernels,
                        const Tensor& bias);

/// Accumulates gradients of conv3d_valid. Any output pointer may be null.
void conv3d_valid_backward(const Tensor& input, const Tensor& kernels,
                           const Tensor& grad_out, Tensor* grad_input,
                           Tensor* grad_kernels, Tensor* grad_bias);

void conv3d_transpose_backward(const Tensor& input, const Tensor& kernels,
                               const Tensor& grad_out, Tensor* grad_input,
                               Tensor* grad_kernels, Tensor* grad_bias);

/// out = weights * input + bias, weights [n, m].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

void dense_backward(const Tensor& input, const Tensor& weights,
                    const Tensor& grad_out, Tensor* grad_input,
                    Tensor* grad_weights, Tensor* grad_bias);

}  // namespace hsiseg::ops
