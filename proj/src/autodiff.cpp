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

#include "hsiseg/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "hsiseg/error.hpp"
#include "hsiseg/ops.hpp"

namespace hsiseg::ad {

Var Tape::constant(Tensor value) { return record(std::move(value), false, {}); }

Var Tape::variable(Tensor value) { return record(std::move(value), true, {}); }

Var Tape::parameter(const Tensor& value, Tensor& grad_sink) {
  require(grad_sink.shape() == value.shape(), ErrorKind::kShape,
          "parameter gradient sink has shape " +
              shape_string(grad_sink.shape()) + ", expected " +
              shape_string(value.shape()));
  Node node;
  node.borrowed = &value;
  node.sink = &grad_sink;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

Var Tape::borrowed(const Tensor& value) {
  Node node;
  node.borrowed = &value;
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn fn) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return {nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.borrowed ? *n.borrowed : n.owned;
}

Tensor* Tape::grad_slot(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return nullptr;
  if (n.sink) return n.sink;
  if (n.grad.empty()) n.grad = Tensor(value(v).shape());
  return &n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.sink) return *n.sink;
  if (n.grad.empty()) return Tensor(value(v).shape());
  return n.grad;
}

void Tape::backward(Var root) {
  require(value(root).size() == 1, ErrorKind::kContract,
          "backward() needs a scalar root, got shape " +
              shape_string(value(root).shape()));
  Tensor* seed = grad_slot(root);
  if (!seed) return;
  (*seed)[0] += 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

bool any_grad(const Tape& t, std::initializer_list<Var> vs) {
  return std::any_of(vs.begin(), vs.end(),
                     [&](Var v) { return t.requires_grad(v); });
}

}  // namespace

Var conv3d_valid(Tape& tape, Var input, Var kernels, Var bias) {
  Tensor out = ops::conv3d_valid(tape.value(input), tape.value(kernels),
                                 tape.value(bias));
  return tape.record(std::move(out), any_grad(tape, {input, kernels, bias}),
                     [=](Tape& t, const Tensor& g) {
                       ops::conv3d_valid_backward(
                           t.value(input), t.value(kernels), g,
                           t.grad_slot(input), t.grad_slot(kernels),
                           t.grad_slot(bias));
                     });
}

Var conv3d_transpose(Tape& tape, Var input, Var kernels, Var bias) {
  Tensor out = ops::conv3d_transpose(tape.value(input), tape.value(kernels),
                                     tape.value(bias));
  return tape.record(std::move(out), any_grad(tape, {input, kernels, bias}),
                     [=](Tape& t, const Tensor& g) {
                       ops::conv3d_transpose_backward(
                           t.value(input), t.value(kernels), g,
                           t.grad_slot(input), t.grad_slot(kernels),
                           t.grad_slot(bias));
                     });
}

Var dense(Tape& tape, Var input, Var weights, Var bias) {
  Tensor out =
      ops::dense(tape.value(input), tape.value(weights), tape.value(bias));
  return tape.record(std::move(out), any_grad(tape, {input, weights, bias}),
                     [=](Tape& t, const Tensor& g) {
                       ops::dense_backward(t.value(input), t.value(weights), g,
                                           t.grad_slot(input),
                                           t.grad_slot(weights),
                                           t.grad_slot(bias));
                     });
}

Var dropout(Tape& tape, Var input, double p, Mode mode, Rng* rng) {
  require(p >= 0.0 && p < 1.0, ErrorKind::kParameter,
          "dropout probability must lie in [0, 1), got " + std::to_string(p));
  const Tensor& x = tape.value(input);
  if (mode == Mode::kInfer || p == 0.0) {
    return tape.record(x, tape.requires_grad(input),
                       [=](Tape& t, const Tensor& g) {
                         if (Tensor* gi = t.grad_slot(input)) *gi += g;
                       });
  }
  require(rng != nullptr, ErrorKind::kContract,
          "train-mode dropout needs a generator");
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(x.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng->uniform() < p ? 0.0 : keep_scale;
    out[i] = x[i] * mask[i];
  }
  return tape.record(std::move(out), tape.requires_grad(input),
                     [=, mask = std::move(mask)](Tape& t, const Tensor& g) {
                       Tensor* gi = t.grad_slot(input);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         (*gi)[i] += g[i] * mask[i];
                     });
}

Var reshape(Tape& tape, Var input, Shape shape) {
  Tensor out = tape.value(input).reshaped(std::move(shape));
  return tape.record(std::move(out), tape.requires_grad(input),
                     [=](Tape& t, const Tensor& g) {
                       Tensor* gi = t.grad_slot(input);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         (*gi)[i] += g[i];
                     });
}

Var add(Tape& tape, Var a, Var b) {
  Tensor out = tape.value(a);
  out += tape.value(b);
  return tape.record(std::move(out), any_grad(tape, {a, b}),
                     [=](Tape& t, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(a)) *ga += g;
                       if (Tensor* gb = t.grad_slot(b)) *gb += g;
                     });
}

Var scale(Tape& tape, Var a, double factor) {
  Tensor out = tape.value(a);
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), tape.requires_grad(a),
                     [=](Tape& t, const Tensor& g) {
                       Tensor* ga = t.grad_slot(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         (*ga)[i] += factor * g[i];
                     });
}

Var sum_of_squares(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  double s = 0.0;
  for (double v : xv.data()) s += v * v;
  return tape.record(Tensor({1}, s), tape.requires_grad(x),
                     [=](Tape& t, const Tensor& g) {
                       const Tensor& xv = t.value(x);
                       Tensor* gx = t.grad_slot(x);
                       for (std::size_t i = 0; i < xv.size(); ++i)
                         (*gx)[i] += 2.0 * xv[i] * g[0];
                     });
}

Var squared_error(Tape& tape, Var x, const Tensor& target) {
  const Tensor& xv = tape.value(x);
  require(xv.size() == target.size(), ErrorKind::kShape,
          "squared_error operands differ: " + shape_string(xv.shape()) +
              " vs " + shape_string(target.shape()));
  Tensor diff(xv.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    diff[i] = xv[i] - target[i];
    s += diff[i] * diff[i];
  }
  return tape.record(Tensor({1}, s), tape.requires_grad(x),
                     [=, diff = std::move(diff)](Tape& t, const Tensor& g) {
                       Tensor* gx = t.grad_slot(x);
                       for (std::size_t i = 0; i < diff.size(); ++i)
                         (*gx)[i] += 2.0 * diff[i] * g[0];
                     });
}

Var soft_assign(Tape& tape, Var latents, Var centers) {
  const Tensor& z = tape.value(latents);
  const Tensor& mu = tape.value(centers);
  require(mu.rank() == 2, ErrorKind::kShape, "centers must be [J, n]");
  const std::size_t clusters = mu.extent(0), dim = mu.extent(1);
  require(dim > 0 && z.size() % dim == 0, ErrorKind::kShape,
          "latent length " + std::to_string(z.size()) +
              " incompatible with center dimension " + std::to_string(dim));
  const std::size_t rows = z.size() / dim;
  // kernel[i,j] = 1 / (1 + |z_i - mu_j|^2); q = kernel / row sum.
  Tensor kernel({rows, clusters});
  Tensor q({rows, clusters});
  for (std::size_t i = 0; i < rows; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < clusters; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = z[i * dim + c] - mu.at(j, c);
        d2 += diff * diff;
      }
      kernel.at(i, j) = 1.0 / (1.0 + d2);
      row_sum += kernel.at(i, j);
    }
    for (std::size_t j = 0; j < clusters; ++j)
      q.at(i, j) = kernel.at(i, j) / row_sum;
  }
  Tensor q_copy = q;
  return tape.record(
      std::move(q), any_grad(tape, {latents, centers}),
      [=, kernel = std::move(kernel), q = std::move(q_copy)](
          Tape& t, const Tensor& g) {
        const Tensor& z = t.value(latents);
        const Tensor& mu = t.value(centers);
        Tensor* gz = t.grad_slot(latents);
        Tensor* gmu = t.grad_slot(centers);
        for (std::size_t i = 0; i < rows; ++i) {
          // dL/dkernel_ij = (g_ij - sum_k g_ik q_ik) / S_i, S_i = k_ij / q_ij
          double gq = 0.0;
          for (std::size_t j = 0; j < clusters; ++j)
            gq += g.at(i, j) * q.at(i, j);
          for (std::size_t j = 0; j < clusters; ++j) {
            const double kij = kernel.at(i, j);
            const double row_sum = kij / q.at(i, j);
            const double g_kernel = (g.at(i, j) - gq) / row_sum;
            // dkernel/d(d2) = -kernel^2; d(d2)/dz = 2 (z - mu)
            const double coeff = -2.0 * g_kernel * kij * kij;
            for (std::size_t c = 0; c < dim; ++c) {
              const double diff = z[i * dim + c] - mu.at(j, c);
              if (gz) (*gz)[i * dim + c] += coeff * diff;
              if (gmu) gmu->at(j, c) -= coeff * diff;
            }
          }
        }
      });
}

Var kl_divergence(Tape& tape, const Tensor& target, Var q) {
  const Tensor& qv = tape.value(q);
  require(qv.size() == target.size(), ErrorKind::kShape,
          "kl_divergence operands differ: " + shape_string(qv.shape()) +
              " vs " + shape_string(target.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < qv.size(); ++i) {
    const double ti = target[i];
    if (ti > 0.0) s += ti * std::log(ti / std::max(qv[i], kAssignmentFloor));
  }
  return tape.record(Tensor({1}, s), tape.requires_grad(q),
                     [=, target = target](Tape& t, const Tensor& g) {
                       const Tensor& qv = t.value(q);
                       Tensor* gq = t.grad_slot(q);
                       for (std::size_t i = 0; i < qv.size(); ++i) {
                         if (target[i] > 0.0 && qv[i] > kAssignmentFloor)
                           (*gq)[i] -= g[0] * target[i] / qv[i];
                       }
                     });
}

double grad_check(const ScalarFn& f, const Tensor& params, double eps) {
  require(eps > 0.0, ErrorKind::kParameter, "grad_check step must be > 0");
  auto evaluate = [&](const Tensor& p) {
    Tape tape;
    const Var out = f(tape, tape.variable(p));
    require(tape.value(out).size() == 1, ErrorKind::kContract,
            "grad_check needs a scalar-valued function, got shape " +
                shape_string(tape.value(out).shape()));
    return tape.value(out)[0];
  };

  Tape tape;
  const Var x = tape.variable(params);
  const Var out = f(tape, x);
  require(tape.value(out).size() == 1, ErrorKind::kContract,
          "grad_check needs a scalar-valued function, got shape " +
              shape_string(tape.value(out).shape()));
  tape.backward(out);
  const Tensor analytic = tape.grad(x);

  double worst = 0.0;
  Tensor probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + eps;
    const double up = evaluate(probe);
    probe[i] = params[i] - eps;
    const double down = evaluate(probe);
    probe[i] = params[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace hsiseg::ad
