/*
 * Copyright 2026 GeoFuse Contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEOFUSE_TENSOR_HPP_
#define GEOFUSE_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "geofuse/common.hpp"
#include "geofuse/rng.hpp"

namespace geofuse {

// Dense 64-bit float tensor with reverse-mode differentiation.
//
// Storage is a flat row-major buffer plus an explicit shape record. Each
// operation appends a node to an implicit tape (the parent links of the
// result); backward() walks the tape in reverse topological order and
// accumulates gradients into every reachable leaf. Values are immutable after
// construction except for gradient buffers and explicit parameter updates
// between steps.

class Node;
using NodePtr = std::shared_ptr<Node>;

class Node {
 public:
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<NodePtr> parents;
  // Reads this->grad and accumulates contributions into parents' grads.
  std::function<void(Node&)> backward_fn;
  std::uint64_t visit_mark = 0;

  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Value-semantics handle to a tape node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  // Entries drawn uniformly from [lo, hi).
  static Tensor uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t size() const { return node_->size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  const std::vector<double>& values() const { return node_->value; }
  // Mutable access for parameter updates and the finite-difference oracle.
  std::vector<double>& mutable_values() { return node_->value; }

  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->size(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// A named leaf tensor tracked by gradient collection.
struct Parameter {
  std::string name;
  Tensor tensor;

  Parameter() = default;
  Parameter(std::string n, Tensor t);
};

// Ordered registry of the parameters reachable from a model root. Names must
// be unique; gradient collection visits each parameter exactly once.
class ParameterStore {
 public:
  void add(Parameter* p);
  const std::vector<Parameter*>& all() const { return params_; }
  Parameter* find(const std::string& name) const;
  std::size_t total_size() const;
  void zero_grads();

 private:
  std::vector<Parameter*> params_;
};

using GradMap = std::map<std::string, std::vector<double>>;

// While a guard is alive on this thread, ops produce untracked results.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// ---- Operations -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor neg(const Tensor& a);
Tensor add_const(const Tensor& a, double c);
Tensor mul_const(const Tensor& a, double c);
// Broadcasts a length-n row vector over an m-by-n matrix.
Tensor add_rowvec(const Tensor& mat, const Tensor& vec);
// Scales a tensor by a scalar (1-element) tensor; both sides differentiable.
Tensor scale(const Tensor& s, const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// y = x.W + b with x either a length-k vector or an m-by-k matrix.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo);

Tensor softmax_last_axis(const Tensor& x);
// Per-slice standardization over the last axis, then affine with gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
// Normalizes a vector to unit length; guarded by eps for near-zero inputs.
Tensor l2_normalize(const Tensor& v, double eps = 1e-12);
// Row-wise l2_normalize of a matrix.
Tensor l2_normalize_rows(const Tensor& m, double eps = 1e-12);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_last_axis(const Tensor& m);   // (m, n) -> (m)
Tensor mean_last_axis(const Tensor& m);  // (m, n) -> (m)
Tensor mean_axis0(const Tensor& m);      // (m, n) -> (n)
Tensor dot(const Tensor& a, const Tensor& b);

Tensor slice_cols(const Tensor& m, std::size_t c0, std::size_t c1);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor stack_rows(const std::vector<Tensor>& rows);
// Row r of a matrix as a length-n vector.
Tensor get_row(const Tensor& m, std::size_t r);
// Concatenation of 1-D vectors into one longer vector.
Tensor concat_vec(const std::vector<Tensor>& parts);

// Mean over rows of -log softmax(logits)[label]; numerically stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);
// Mean sigmoid binary cross-entropy against constant 0/1 targets.
Tensor sigmoid_bce_with_logits(const Tensor& logits, const std::vector<double>& targets);

// ---- Differentiation ------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Gradients of leaf tensors accumulate
// additively across calls; intermediate nodes are reset per sweep.
void backward(const Tensor& loss);

// Convenience: backward() then a copy of every registered parameter gradient.
GradMap backward(const Tensor& loss, const ParameterStore& params);

GradMap collect_grads(const ParameterStore& params);

// Central-difference gradient oracle: (f(p+h) - f(p-h)) / (2h) per coordinate
// of every parameter. f must be a deterministic scalar function.
GradMap finite_diff_grad(const std::function<double()>& f,
                         const std::vector<Parameter*>& params, double h = 1e-5);

// |a - b| / max(1, |a|, |b|), the relative-error metric used by all checks.
double rel_err(double a, double b);

}  // namespace geofuse

#endif  // GEOFUSE_TENSOR_HPP_
