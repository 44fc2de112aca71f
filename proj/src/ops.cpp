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

#include "hsiseg/ops.hpp"

#include "hsiseg/error.hpp"

namespace hsiseg::ops {
namespace {

struct VolumeDims {
  std::size_t c, h, w, d;
};

VolumeDims volume_dims(const Shape& s) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  require(s.size() == 4, ErrorKind::kShape,
          "volume must be rank 3 or 4, got " + shape_string(s));
  return {s[0], s[1], s[2], s[3]};
}

struct KernelDims {
  std::size_t out, in, h, w, d;
};

KernelDims kernel_dims(const Shape& s) {
  if (s.size() == 4) return {s[0], 1, s[1], s[2], s[3]};
  require(s.size() == 5, ErrorKind::kShape,
          "kernels must be rank 4 or 5, got " + shape_string(s));
  return {s[0], s[1], s[2], s[3], s[4]};
}

// out[k,i,j,:] += sum_{c,a,b,e} w[k,c,a,b,e] * x[c,i+a,j+b,:+e]
// This is the forward correlation; `x` has g.in_channels channels.
void correlate(const ConvGeometry& g, const double* x, const double* w,
               double* out) {
  const std::size_t x_plane = g.in_w * g.in_d;
  const std::size_t x_chan = g.in_h * x_plane;
  const std::size_t w_chan = g.k_h * g.k_w * g.k_d;
  const std::size_t o_plane = g.out_w * g.out_d;
  const std::size_t o_chan = g.out_h * o_plane;
  for (std::size_t k = 0; k < g.out_channels; ++k) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const double* wk = w + (k * g.in_channels + c) * w_chan;
      const double* xc = x + c * x_chan;
      for (std::size_t i = 0; i < g.out_h; ++i) {
        for (std::size_t j = 0; j < g.out_w; ++j) {
          double* orow = out + k * o_chan + i * o_plane + j * g.out_d;
          for (std::size_t a = 0; a < g.k_h; ++a) {
            for (std::size_t b = 0; b < g.k_w; ++b) {
              const double* xrow = xc + (i + a) * x_plane + (j + b) * g.in_d;
              const double* wrow = wk + (a * g.k_w + b) * g.k_d;
              for (std::size_t e = 0; e < g.k_d; ++e) {
                const double wv = wrow[e];
                const double* xs = xrow + e;
                for (std::size_t l = 0; l < g.out_d; ++l) orow[l] += wv * xs[l];
              }
            }
          }
        }
      }
    }
  }
}

// x[c,i+a,j+b,:+e] += sum_k w[k,c,a,b,e] * y[k,i,j,:]
// Exact adjoint of correlate in its first argument.
void scatter(const ConvGeometry& g, const double* y, const double* w,
             double* x) {
  const std::size_t x_plane = g.in_w * g.in_d;
  const std::size_t x_chan = g.in_h * x_plane;
  const std::size_t w_chan = g.k_h * g.k_w * g.k_d;
  const std::size_t y_plane = g.out_w * g.out_d;
  const std::size_t y_chan = g.out_h * y_plane;
  for (std::size_t k = 0; k < g.out_channels; ++k) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const double* wk = w + (k * g.in_channels + c) * w_chan;
      double* xc = x + c * x_chan;
      for (std::size_t i = 0; i < g.out_h; ++i) {
        for (std::size_t j = 0; j < g.out_w; ++j) {
          const double* yrow = y + k * y_chan + i * y_plane + j * g.out_d;
          for (std::size_t a = 0; a < g.k_h; ++a) {
            for (std::size_t b = 0; b < g.k_w; ++b) {
              double* xrow = xc + (i + a) * x_plane + (j + b) * g.in_d;
              const double* wrow = wk + (a * g.k_w + b) * g.k_d;
              for (std::size_t e = 0; e < g.k_d; ++e) {
                const double wv = wrow[e];
                double* xs = xrow + e;
                for (std::size_t l = 0; l < g.out_d; ++l) xs[l] += wv * yrow[l];
              }
            }
          }
        }
      }
    }
  }
}

// w[k,c,a,b,e] += sum_{i,j,l} y[k,i,j,l] * x[c,i+a,j+b,l+e]
void weight_gradient(const ConvGeometry& g, const double* x, const double* y,
                     double* w) {
  const std::size_t x_plane = g.in_w * g.in_d;
  const std::size_t x_chan = g.in_h * x_plane;
  const std::size_t w_chan = g.k_h * g.k_w * g.k_d;
  const std::size_t y_plane = g.out_w * g.out_d;
  const std::size_t y_chan = g.out_h * y_plane;
  for (std::size_t k = 0; k < g.out_channels; ++k) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      double* wk = w + (k * g.in_channels + c) * w_chan;
      const double* xc = x + c * x_chan;
      for (std::size_t i = 0; i < g.out_h; ++i) {
        for (std::size_t j = 0; j < g.out_w; ++j) {
          const double* yrow = y + k * y_chan + i * y_plane + j * g.out_d;
          for (std::size_t a = 0; a < g.k_h; ++a) {
            for (std::size_t b = 0; b < g.k_w; ++b) {
              const double* xrow = xc + (i + a) * x_plane + (j + b) * g.in_d;
              double* wrow = wk + (a * g.k_w + b) * g.k_d;
              for (std::size_t e = 0; e < g.k_d; ++e) {
                const double* xs = xrow + e;
                double s = 0.0;
                for (std::size_t l = 0; l < g.out_d; ++l) s += yrow[l] * xs[l];
                wrow[e] += s;
              }
            }
          }
        }
      }
    }
  }
}

void require_same_shape(const Tensor& t, const Shape& shape,
                        const char* what) {
  require(t.shape() == shape, ErrorKind::kShape,
          std::string(what) + " has shape " + shape_string(t.shape()) +
              ", expected " + shape_string(shape));
}

}  // namespace

ConvGeometry conv_geometry(const Shape& input, const Shape& kernels) {
  const VolumeDims v = volume_dims(input);
  const KernelDims k = kernel_dims(kernels);
  require(k.in == v.c, ErrorKind::kShape,
          "kernel input channels " + std::to_string(k.in) +
              " != volume channels " + std::to_string(v.c));
  require(k.h <= v.h && k.w <= v.w && k.d <= v.d && k.h && k.w && k.d,
          ErrorKind::kShape,
          "kernel " + shape_string(kernels) + " larger than input " +
              shape_string(input));
  return {v.c,  k.out, v.h,           v.w,           v.d,          k.h,
          k.w,  k.d,   v.h - k.h + 1, v.w - k.w + 1, v.d - k.d + 1};
}

ConvGeometry transpose_geometry(const Shape& input, const Shape& kernels) {
  const VolumeDims v = volume_dims(input);
  const KernelDims k = kernel_dims(kernels);
  require(k.out == v.c, ErrorKind::kShape,
          "transposed conv input channels " + std::to_string(v.c) +
              " != kernel output channels " + std::to_string(k.out));
  require(k.h && k.w && k.d && v.h && v.w && v.d, ErrorKind::kShape,
          "empty transposed conv operand");
  return {k.in,          k.out,         v.h + k.h - 1, v.w + k.w - 1,
          v.d + k.d - 1, k.h,           k.w,           k.d,
          v.h,           v.w,           v.d};
}

Tensor conv3d_valid(const Tensor& input, const Tensor& kernels,
                    const Tensor& bias) {
  const ConvGeometry g = conv_geometry(input.shape(), kernels.shape());
  require_same_shape(bias, {g.out_channels}, "conv bias");
  Tensor out({g.out_channels, g.out_h, g.out_w, g.out_d});
  const std::size_t per_channel = g.out_h * g.out_w * g.out_d;
  for (std::size_t k = 0; k < g.out_channels; ++k)
    std::fill_n(out.data().begin() + k * per_channel, per_channel, bias[k]);
  correlate(g, input.data().data(), kernels.data().data(), out.data().data());
  return out;
}

Tensor conv3d_transpose(const Tensor& input, const Tensor& kernels,
                        const Tensor& bias) {
  const ConvGeometry g = transpose_geometry(input.shape(), kernels.shape());
  require_same_shape(bias, {g.in_channels}, "transposed conv bias");
  Tensor out({g.in_channels, g.in_h, g.in_w, g.in_d});
  const std::size_t per_channel = g.in_h * g.in_w * g.in_d;
  for (std::size_t c = 0; c < g.in_channels; ++c)
    std::fill_n(out.data().begin() + c * per_channel, per_channel, bias[c]);
  scatter(g, input.data().data(), kernels.data().data(), out.data().data());
  return out;
}

void conv3d_valid_backward(const Tensor& input, const Tensor& kernels,
                           const Tensor& grad_out, Tensor* grad_input,
                           Tensor* grad_kernels, Tensor* grad_bias) {
  const ConvGeometry g = conv_geometry(input.shape(), kernels.shape());
  require(grad_out.size() == g.out_channels * g.out_h * g.out_w * g.out_d,
          ErrorKind::kShape, "conv grad_out size mismatch");
  if (grad_input)
    scatter(g, grad_out.data().data(), kernels.data().data(),
            grad_input->data().data());
  if (grad_kernels)
    weight_gradient(g, input.data().data(), grad_out.data().data(),
                    grad_kernels->data().data());
  if (grad_bias) {
    const std::size_t per_channel = g.out_h * g.out_w * g.out_d;
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < per_channel; ++i)
        s += grad_out[k * per_channel + i];
      (*grad_bias)[k] += s;
    }
  }
}

void conv3d_transpose_backward(const Tensor& input, const Tensor& kernels,
                               const Tensor& grad_out, Tensor* grad_input,
                               Tensor* grad_kernels, Tensor* grad_bias) {
  const ConvGeometry g = transpose_geometry(input.shape(), kernels.shape());
  require(grad_out.size() == g.in_channels * g.in_h * g.in_w * g.in_d,
          ErrorKind::kShape, "transposed conv grad_out size mismatch");
  if (grad_input)
    correlate(g, grad_out.data().data(), kernels.data().data(),
              grad_input->data().data());
  if (grad_kernels)
    weight_gradient(g, grad_out.data().data(), input.data().data(),
                    grad_kernels->data().data());
  if (grad_bias) {
    const std::size_t per_channel = g.in_h * g.in_w * g.in_d;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < per_channel; ++i)
        s += grad_out[c * per_channel + i];
      (*grad_bias)[c] += s;
    }
  }
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require(weights.rank() == 2, ErrorKind::kShape, "dense weights must be rank 2");
  const std::size_t n = weights.extent(0), m = weights.extent(1);
  require(input.size() == m, ErrorKind::kShape,
          "dense input length " + std::to_string(input.size()) +
              " != weight columns " + std::to_string(m));
  require_same_shape(bias, {n}, "dense bias");
  Tensor out({n});
  const double* x = input.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* wr = weights.data().data() + r * m;
    double s = bias[r];
    for (std::size_t c = 0; c < m; ++c) s += wr[c] * x[c];
    out[r] = s;
  }
  return out;
}

void dense_backward(const Tensor& input, const Tensor& weights,
                    const Tensor& grad_out, Tensor* grad_input,
                    Tensor* grad_weights, Tensor* grad_bias) {
  const std::size_t n = weights.extent(0), m = weights.extent(1);
  require(grad_out.size() == n && input.size() == m, ErrorKind::kShape,
          "dense backward size mismatch");
  for (std::size_t r = 0; r < n; ++r) {
    const double g = grad_out[r];
    const double* wr = weights.data().data() + r * m;
    if (grad_input) {
      double* gi = grad_input->data().data();
      for (std::size_t c = 0; c < m; ++c) gi[c] += g * wr[c];
    }
    if (grad_weights) {
      double* gw = grad_weights->data().data() + r * m;
      const double* x = input.data().data();
      for (std::size_t c = 0; c < m; ++c) gw[c] += g * x[c];
    }
    if (grad_bias) (*grad_bias)[r] += g;
  }
}

}  // namespace hsiseg::ops
