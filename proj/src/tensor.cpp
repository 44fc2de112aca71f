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

#include "hsiseg/tensor.hpp"

#include <cmath>
#include <sstream>

#include "hsiseg/error.hpp"

namespace hsiseg {

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kState: return "state";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kUndefined: return "undefined-input";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kSizeMismatch: return "size-mismatch";
    case ErrorKind::kNumerical: return "numerical";
  }
  return "unknown";
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == shape_size(shape_), ErrorKind::kShape,
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_string(shape_));
}

void Tensor::reshape(Shape shape) {
  require(shape_size(shape) == data_.size(), ErrorKind::kShape,
          "cannot reshape " + shape_string(shape_) + " to " +
              shape_string(shape));
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

void Tensor::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require(other.data_.size() == data_.size(), ErrorKind::kShape,
          "tensor += with mismatched sizes " + shape_string(shape_) + " vs " +
              shape_string(other.shape_));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

double dot(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), ErrorKind::kShape, "dot of mismatched sizes");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace hsiseg
