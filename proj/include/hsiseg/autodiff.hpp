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

#include <cstddef>
#include <functional>
#include <vector>

#include "hsiseg/rng.hpp"
#include "hsiseg/tensor.hpp"

namespace hsiseg::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

enum class Mode { kTrain, kInfer };

/// Linear record of executed primitives. Nodes are appended in execution
/// order and backward() visits them in exact reverse order, so gradients
/// of fan-out nodes are summed before the node itself is processed.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  /// A value with no gradient.
  Var constant(Tensor value);
  /// A differentiable leaf owned by the tape; read its gradient via grad().
  Var variable(Tensor value);
  /// A differentiable leaf that borrows `value` and accumulates its
  /// gradient into `grad_sink` during backward(). Both must outlive the tape.
  Var parameter(const Tensor& value, Tensor& grad_sink);
  /// Borrowed value without a gradient.
  Var borrowed(const Tensor& value);

  /// Appends the result of a primitive. `fn` runs during backward() only if
  /// the result received a gradient.
  Var record(Tensor value, bool requires_grad, BackwardFn fn);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient buffer for `v`, allocated on first use; null when `v` does not
  /// require a gradient. Only valid while backward() runs or afterwards.
  Tensor* grad_slot(Var v);

  /// Gradient accumulated for an owned variable (zeros if untouched).
  Tensor grad(Var v) const;

  /// Seeds d(root)/d(root) = 1 and propagates adjoints. `root` must be a
  /// single-element tensor.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    Tensor* sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Differentiable primitives. Shapes follow hsiseg::ops.

Var conv3d_valid(Tape& tape, Var input, Var kernels, Var bias);
Var conv3d_transpose(Tape& tape, Var input, Var kernels, Var bias);
Var dense(Tape& tape, Var input, Var weights, Var bias);

/// Inverted dropout: in train mode each element is zeroed with probability
/// p and survivors are scaled by 1/(1-p); in infer mode the input passes
/// through unchanged. `rng` is only consulted in train mode.
Var dropout(Tape& tape, Var input, double p, Mode mode, Rng* rng);

Var reshape(Tape& tape, Var input, Shape shape);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);

/// sum(x^2)
Var sum_of_squares(Tape& tape, Var x);

/// sum((x - target)^2); the target is a constant.
Var squared_error(Tape& tape, Var x, const Tensor& target);

/// Student's-t soft assignment of latents [p, n] (or [n]) to centers [J, n];
/// result [p, J], rows sum to one.
Var soft_assign(Tape& tape, Var latents, Var centers);

/// sum_ij t_ij log(t_ij / max(q_ij, 1e-12)); t is a constant and terms
/// with t_ij = 0 contribute nothing.
Var kl_divergence(Tape& tape, const Tensor& target, Var q);

/// Clamp floor applied to q inside the KL logarithm.
inline constexpr double kAssignmentFloor = 1e-12;

/// Central-difference check of a scalar-valued composite op. `f` builds a
/// graph from the variable it is given and returns the scalar result.
/// Returns max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
using ScalarFn = std::function<Var(Tape&, Var)>;
double grad_check(const ScalarFn& f, const Tensor& params, double eps);

}  // namespace hsiseg::ad
