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

#include "geofuse/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace geofuse {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError(concat("zero-length axis in shape ", shape_str(shape)));
    n *= d;
  }
  return n;
}

#ifndef NDEBUG
void debug_check_finite(const Node& n, const char* op) {
  for (double v : n.value) {
    if (!std::isfinite(v)) {
      std::fprintf(stderr, "geofuse: non-finite value after %s\n", op);
      assert(false && "non-finite tensor value");
    }
  }
}
#define GF_CHECK_FINITE(node, op) debug_check_finite(node, op)
#define GF_DLOG(...) std::fprintf(stderr, __VA_ARGS__)
#else
#define GF_CHECK_FINITE(node, op) ((void)0)
#define GF_DLOG(...) ((void)0)
#endif

NodePtr make_node(std::vector<std::size_t> shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

bool any_requires(std::initializer_list<const Tensor*> ts) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : ts)
    if (t->node() && t->node()->requires_grad) return true;
  return false;
}

// Attaches tape links only when the result is tracked.
void track(const NodePtr& out, std::initializer_list<const Tensor*> parents,
           std::function<void(Node&)> fn) {
  bool req = false;
  if (g_grad_enabled) {
    for (const Tensor* p : parents)
      if (p->node()->requires_grad) req = true;
  }
  if (!req) return;
  out->requires_grad = true;
  out->parents.reserve(parents.size());
  for (const Tensor* p : parents) out->parents.push_back(p->node());
  out->backward_fn = std::move(fn);
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) throw ShapeError(concat(op, ": expected 2-D tensor, got ", shape_str(t.shape())));
}

// ---- matrix kernels --------------------------------------------------------
// C (m x n) = / += A (m x k) . B (k x n)
void mm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (m x n) += A (m x k) . B(n x k)^T
void mm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] += acc;
    }
  }
}

// C (k x n) += A (m x k)^T . B (m x n)
void mm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      double* crow = c + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = shape_product(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, 0.0));
  node->requires_grad = requires_grad;
  node->is_leaf = requires_grad;
  return Tensor(node);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v, bool requires_grad) {
  std::size_t n = shape_product(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, v));
  node->requires_grad = requires_grad;
  node->is_leaf = requires_grad;
  return Tensor(node);
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  std::size_t n = shape_product(shape);
  if (n != data.size())
    throw ShapeError(concat("from_data: shape ", shape_str(shape), " needs ", n,
                            " values, got ", data.size()));
  auto node = make_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  node->is_leaf = requires_grad;
  return Tensor(node);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi,
                       bool requires_grad) {
  std::size_t n = shape_product(shape);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(lo, hi);
  auto node = make_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  node->is_leaf = requires_grad;
  return Tensor(node);
}

std::size_t Tensor::rows() const {
  if (ndim() == 0) throw ShapeError("rows(): empty shape");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (ndim() != 2) throw ShapeError(concat("cols(): expected 2-D tensor, got ", shape_str(shape())));
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1)
    throw ShapeError(concat("item(): tensor of shape ", shape_str(shape()), " is not scalar"));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (ndim() != 2) throw ShapeError(concat("at(r,c): expected 2-D tensor, got ", shape_str(shape())));
  return node_->value[r * node_->shape[1] + c];
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    static const std::vector<double> kEmpty;
    return kEmpty;
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->size(), 0.0);
}

// ---- Parameter / store ------------------------------------------------------

Parameter::Parameter(std::string n, Tensor t) : name(std::move(n)), tensor(std::move(t)) {
  tensor.node()->requires_grad = true;
  tensor.node()->is_leaf = true;
}

void ParameterStore::add(Parameter* p) {
  if (find(p->name)) throw ConfigError(concat("duplicate parameter name '", p->name, "'"));
  params_.push_back(p);
}

Parameter* ParameterStore::find(const std::string& name) const {
  for (Parameter* p : params_)
    if (p->name == name) return p;
  return nullptr;
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (Parameter* p : params_) n += p->tensor.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (Parameter* p : params_) p->tensor.zero_grad();
}

// ---- grad mode --------------------------------------------------------------

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- elementwise ops ---------------------------------------------------------

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(concat(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                            shape_str(b.shape())));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a, &b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      Node* par = self.parents[p].get();
      if (!par->requires_grad) continue;
      par->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) par->grad[i] += self.grad[i];
    }
  });
  GF_CHECK_FINITE(*node, "add");
  return Tensor(node);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a, &b}, [](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
  GF_CHECK_FINITE(*node, "sub");
  return Tensor(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a, &b}, [](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pb->grad[i] += self.grad[i] * pa->value[i];
    }
  });
  GF_CHECK_FINITE(*node, "mul");
  return Tensor(node);
}

Tensor neg(const Tensor& a) { return mul_const(a, -1.0); }

Tensor add_const(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a}, [](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
  });
  GF_CHECK_FINITE(*node, "add_const");
  return Tensor(node);
}

Tensor mul_const(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a}, [c](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += c * self.grad[i];
  });
  GF_CHECK_FINITE(*node, "mul_const");
  return Tensor(node);
}

Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
  require_2d(mat, "add_rowvec");
  if (vec.ndim() != 1 || vec.size() != mat.cols())
    throw ShapeError(concat("add_rowvec: matrix ", shape_str(mat.shape()), " vs vector ",
                            shape_str(vec.shape())));
  const std::size_t m = mat.rows(), n = mat.cols();
  std::vector<double> out(mat.size());
  const auto& mv = mat.values();
  const auto& vv = vec.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = mv[i * n + j] + vv[j];
  auto node = make_node(mat.shape(), std::move(out));
  track(node, {&mat, &vec}, [m, n](Node& self) {
    Node* pm = self.parents[0].get();
    Node* pv = self.parents[1].get();
    if (pm->requires_grad) {
      pm->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pm->grad[i] += self.grad[i];
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pv->grad[j] += self.grad[i * n + j];
    }
  });
  GF_CHECK_FINITE(*node, "add_rowvec");
  return Tensor(node);
}

Tensor scale(const Tensor& s, const Tensor& x) {
  if (s.size() != 1)
    throw ShapeError(concat("scale: gate must be scalar, got ", shape_str(s.shape())));
  const double sv = s.values()[0];
  std::vector<double> out(x.size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * xv[i];
  auto node = make_node(x.shape(), std::move(out));
  track(node, {&s, &x}, [sv](Node& self) {
    Node* ps = self.parents[0].get();
    Node* px = self.parents[1].get();
    if (ps->requires_grad) {
      ps->ensure_grad();
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * px->value[i];
      ps->grad[0] += acc;
    }
    if (px->requires_grad) {
      px->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += sv * self.grad[i];
    }
  });
  GF_CHECK_FINITE(*node, "scale");
  return Tensor(node);
}

// ---- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError(concat("matmul: inner axes differ, ", shape_str(a.shape()), " vs ",
                            shape_str(b.shape())));
  std::vector<double> out(m * n);
  mm_nn(a.values().data(), b.values().data(), out.data(), m, k, n, false);
  auto node = make_node({m, n}, std::move(out));
  track(node, {&a, &b}, [m, k, n](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    if (pa->requires_grad) {
      pa->ensure_grad();
      mm_nt(self.grad.data(), pb->value.data(), pa->grad.data(), m, n, k);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      mm_tn(pa->value.data(), self.grad.data(), pb->grad.data(), m, k, n);
    }
  });
  GF_CHECK_FINITE(*node, "matmul");
  return Tensor(node);
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto& av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  auto node = make_node({n, m}, std::move(out));
  track(node, {&a}, [m, n](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) pa->grad[i * n + j] += self.grad[j * m + i];
  });
  return Tensor(node);
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_2d(w, "affine");
  const std::size_t k = w.rows(), n = w.cols();
  if (b.ndim() != 1 || b.size() != n)
    throw ShapeError(concat("affine: bias ", shape_str(b.shape()), " vs weight ",
                            shape_str(w.shape())));
  const bool vector_input = (x.ndim() == 1);
  const std::size_t m = vector_input ? 1 : x.rows();
  const std::size_t xk = vector_input ? x.size() : x.cols();
  if (xk != k)
    throw ShapeError(concat("affine: input ", shape_str(x.shape()), " vs weight ",
                            shape_str(w.shape())));
  std::vector<double> out(m * n);
  mm_nn(x.values().data(), w.values().data(), out.data(), m, k, n, false);
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  std::vector<std::size_t> out_shape = vector_input ? std::vector<std::size_t>{n}
                                                    : std::vector<std::size_t>{m, n};
  auto node = make_node(std::move(out_shape), std::move(out));
  track(node, {&x, &w, &b}, [m, k, n](Node& self) {
    Node* px = self.parents[0].get();
    Node* pw = self.parents[1].get();
    Node* pb = self.parents[2].get();
    if (px->requires_grad) {
      px->ensure_grad();
      mm_nt(self.grad.data(), pw->value.data(), px->grad.data(), m, n, k);
    }
    if (pw->requires_grad) {
      pw->ensure_grad();
      mm_tn(px->value.data(), self.grad.data(), pw->grad.data(), m, k, n);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pb->grad[j] += self.grad[i * n + j];
    }
  });
  GF_CHECK_FINITE(*node, "affine");
  return Tensor(node);
}

// ---- pointwise nonlinearities -----------------------------------------------

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a}, [](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa->grad[i] += self.grad[i] * self.value[i];
  });
  return Tensor(node);
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(av[i]);
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a}, [](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      pa->grad[i] += self.grad[i] / pa->value[i];
  });
  return Tensor(node);
}

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] * kInvSqrt2));
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a}, [](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double x = pa->value[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      pa->grad[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
  GF_CHECK_FINITE(*node, "gelu");
  return Tensor(node);
}

Tensor clamp_min(const Tensor& a, double lo) {
  std::vector<double> out(a.size());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(av[i], lo);
  auto node = make_node(a.shape(), std::move(out));
  track(node, {&a}, [lo](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (pa->value[i] > lo) pa->grad[i] += self.grad[i];
  });
  return Tensor(node);
}

// ---- normalizations -----------------------------------------------------------

Tensor softmax_last_axis(const Tensor& x) {
  if (x.ndim() == 0) throw ShapeError("softmax_last_axis: empty shape");
  const std::size_t d = x.shape().back();
  const std::size_t slices = x.size() / d;
  std::vector<double> out(x.size());
  const auto& xv = x.values();
  for (std::size_t s = 0; s < slices; ++s) {
    const double* row = xv.data() + s * d;
    double* orow = out.data() + s * d;
    double mx = row[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (std::size_t j = 0; j < d; ++j) orow[j] /= denom;
  }
  auto node = make_node(x.shape(), std::move(out));
  track(node, {&x}, [d, slices](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t s = 0; s < slices; ++s) {
      const double* y = self.value.data() + s * d;
      const double* g = self.grad.data() + s * d;
      double* dx = pa->grad.data() + s * d;
      double gy = 0.0;
      for (std::size_t j = 0; j < d; ++j) gy += g[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) dx[j] += y[j] * (g[j] - gy);
    }
  });
  GF_CHECK_FINITE(*node, "softmax_last_axis");
  return Tensor(node);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (eps <= 0.0) throw ConfigError(concat("layer_norm: eps must be > 0, got ", eps));
  if (x.ndim() == 0) throw ShapeError("layer_norm: empty shape");
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d)
    throw ShapeError(concat("layer_norm: affine params ", shape_str(gamma.shape()), "/",
                            shape_str(beta.shape()), " vs last axis ", d));
  const std::size_t slices = x.size() / d;
  std::vector<double> out(x.size());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(slices);
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (std::size_t s = 0; s < slices; ++s) {
    const double* row = xv.data() + s * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[s] = istd;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mean) * istd;
      (*xhat)[s * d + j] = xh;
      out[s * d + j] = gv[j] * xh + bv[j];
    }
  }
  auto node = make_node(x.shape(), std::move(out));
  track(node, {&x, &gamma, &beta}, [d, slices, xhat, inv_std](Node& self) {
    Node* px = self.parents[0].get();
    Node* pg = self.parents[1].get();
    Node* pb = self.parents[2].get();
    const double dn = static_cast<double>(d);
    for (std::size_t s = 0; s < slices; ++s) {
      const double* g = self.grad.data() + s * d;
      const double* xh = xhat->data() + s * d;
      if (pg->requires_grad) {
        pg->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) pg->grad[j] += g[j] * xh[j];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) pb->grad[j] += g[j];
      }
      if (px->requires_grad) {
        px->ensure_grad();
        const double istd = (*inv_std)[s];
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double dxh = g[j] * pg->value[j];
          sum_dxh += dxh;
          sum_dxh_xh += dxh * xh[j];
        }
        double* dx = px->grad.data() + s * d;
        for (std::size_t j = 0; j < d; ++j) {
          const double dxh = g[j] * pg->value[j];
          dx[j] += istd * (dxh - sum_dxh / dn - xh[j] * (sum_dxh_xh / dn));
        }
      }
    }
  });
  GF_CHECK_FINITE(*node, "layer_norm");
  return Tensor(node);
}

namespace {
// Shared forward/backward for vector and row-wise variants.
// Returns true when the eps guard was taken (norm <= eps).
bool l2norm_row(const double* x, double* y, std::size_t d, double eps, double* denom_out) {
  double nsq = 0.0;
  for (std::size_t j = 0; j < d; ++j) nsq += x[j] * x[j];
  double n = std::sqrt(nsq);
  const bool guarded = !(n > eps);
  if (guarded) {
    GF_DLOG("geofuse: l2_normalize guarded a near-zero vector (norm=%.3e)\n", n);
  }
  double denom = std::max(n, eps);
  if (denom == 0.0) {
    // eps == 0 and an exactly-zero vector: pass it through.
    std::fill(y, y + d, 0.0);
    *denom_out = 1.0;
    return true;
  }
  for (std::size_t j = 0; j < d; ++j) y[j] = x[j] / denom;
  *denom_out = denom;
  return guarded;
}

void l2norm_row_backward(const double* y, const double* g, double* dx, std::size_t d,
                         double denom, bool guarded) {
  if (guarded) {
    for (std::size_t j = 0; j < d; ++j) dx[j] += g[j] / denom;
    return;
  }
  double gy = 0.0;
  for (std::size_t j = 0; j < d; ++j) gy += g[j] * y[j];
  for (std::size_t j = 0; j < d; ++j) dx[j] += (g[j] - y[j] * gy) / denom;
}
}  // namespace

Tensor l2_normalize(const Tensor& v, double eps) {
  if (eps < 0.0) throw ConfigError("l2_normalize: eps must be >= 0");
  if (v.ndim() != 1)
    throw ShapeError(concat("l2_normalize: expected vector, got ", shape_str(v.shape())));
  const std::size_t d = v.size();
  std::vector<double> out(d);
  double denom = 0.0;
  const bool guarded = l2norm_row(v.values().data(), out.data(), d, eps, &denom);
  auto node = make_node(v.shape(), std::move(out));
  track(node, {&v}, [d, denom, guarded](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    l2norm_row_backward(self.value.data(), self.grad.data(), pa->grad.data(), d, denom, guarded);
  });
  GF_CHECK_FINITE(*node, "l2_normalize");
  return Tensor(node);
}

Tensor l2_normalize_rows(const Tensor& m, double eps) {
  require_2d(m, "l2_normalize_rows");
  const std::size_t r = m.rows(), d = m.cols();
  std::vector<double> out(m.size());
  auto denoms = std::make_shared<std::vector<double>>(r);
  auto guards = std::make_shared<std::vector<bool>>(r);
  for (std::size_t i = 0; i < r; ++i)
    (*guards)[i] = l2norm_row(m.values().data() + i * d, out.data() + i * d, d, eps,
                              &(*denoms)[i]);
  auto node = make_node(m.shape(), std::move(out));
  track(node, {&m}, [r, d, denoms, guards](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      l2norm_row_backward(self.value.data() + i * d, self.grad.data() + i * d,
                          pa->grad.data() + i * d, d, (*denoms)[i], (*guards)[i]);
    }
  });
  GF_CHECK_FINITE(*node, "l2_normalize_rows");
  return Tensor(node);
}

// ---- reductions -----------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto node = make_node({1}, {s});
  track(node, {&a}, [](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (auto& g : pa->grad) g += self.grad[0];
  });
  return Tensor(node);
}

Tensor mean_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  auto node = make_node({1}, {s * inv});
  track(node, {&a}, [inv](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (auto& g : pa->grad) g += self.grad[0] * inv;
  });
  return Tensor(node);
}

Tensor sum_last_axis(const Tensor& m) {
  require_2d(m, "sum_last_axis");
  const std::size_t r = m.rows(), n = m.cols();
  std::vector<double> out(r, 0.0);
  const auto& mv = m.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += mv[i * n + j];
  auto node = make_node({r}, std::move(out));
  track(node, {&m}, [r, n](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < n; ++j) pa->grad[i * n + j] += self.grad[i];
  });
  return Tensor(node);
}

Tensor mean_last_axis(const Tensor& m) {
  require_2d(m, "mean_last_axis");
  const std::size_t r = m.rows(), n = m.cols();
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> out(r, 0.0);
  const auto& mv = m.values();
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += mv[i * n + j];
    out[i] = s * inv;
  }
  auto node = make_node({r}, std::move(out));
  track(node, {&m}, [r, n, inv](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < n; ++j) pa->grad[i * n + j] += self.grad[i] * inv;
  });
  return Tensor(node);
}

Tensor mean_axis0(const Tensor& m) {
  require_2d(m, "mean_axis0");
  const std::size_t r = m.rows(), n = m.cols();
  const double inv = 1.0 / static_cast<double>(r);
  std::vector<double> out(n, 0.0);
  const auto& mv = m.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += mv[i * n + j];
  for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
  auto node = make_node({n}, std::move(out));
  track(node, {&m}, [r, n, inv](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < n; ++j) pa->grad[i * n + j] += self.grad[j] * inv;
  });
  return Tensor(node);
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.size() != b.size())
    throw ShapeError(concat("dot: shapes ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
  double s = 0.0;
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  auto node = make_node({1}, {s});
  track(node, {&a, &b}, [](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    const double g = self.grad[0];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < pb->grad.size(); ++i) pb->grad[i] += g * pa->value[i];
    }
  });
  return Tensor(node);
}

// ---- reshaping -------------------------------------------------------------------

Tensor slice_cols(const Tensor& m, std::size_t c0, std::size_t c1) {
  require_2d(m, "slice_cols");
  const std::size_t r = m.rows(), n = m.cols();
  if (c0 >= c1 || c1 > n)
    throw ShapeError(concat("slice_cols: invalid range [", c0, ", ", c1, ") for ",
                            shape_str(m.shape())));
  const std::size_t w = c1 - c0;
  std::vector<double> out(r * w);
  const auto& mv = m.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = mv[i * n + c0 + j];
  auto node = make_node({r, w}, std::move(out));
  track(node, {&m}, [r, n, c0, w](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) pa->grad[i * n + c0 + j] += self.grad[i * w + j];
  });
  return Tensor(node);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != r)
      throw ShapeError(concat("concat_cols: row mismatch ", shape_str(p.shape()), " vs ",
                              shape_str(parts[0].shape())));
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    widths.push_back(w);
    const auto& pv = p.values();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * total + off + j] = pv[i * w + j];
    off += w;
  }
  auto node = make_node({r, total}, std::move(out));
  bool req = false;
  if (grad_enabled())
    for (const auto& p : parts)
      if (p.node()->requires_grad) req = true;
  if (req) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward_fn = [r, total, widths](Node& self) {
      std::size_t off2 = 0;
      for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
        Node* pa = self.parents[pi].get();
        const std::size_t w = widths[pi];
        if (pa->requires_grad) {
          pa->ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j)
              pa->grad[i * w + j] += self.grad[i * total + off2 + j];
        }
        off2 += w;
      }
    };
  }
  return Tensor(node);
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t d = rows[0].size();
  for (const auto& rt : rows) {
    if (rt.ndim() != 1 || rt.size() != d)
      throw ShapeError(concat("stack_rows: row shape ", shape_str(rt.shape()),
                              " vs expected (", d, ")"));
  }
  const std::size_t b = rows.size();
  std::vector<double> out(b * d);
  for (std::size_t i = 0; i < b; ++i)
    std::copy(rows[i].values().begin(), rows[i].values().end(), out.begin() + i * d);
  auto node = make_node({b, d}, std::move(out));
  bool req = false;
  if (grad_enabled())
    for (const auto& rt : rows)
      if (rt.node()->requires_grad) req = true;
  if (req) {
    node->requires_grad = true;
    for (const auto& rt : rows) node->parents.push_back(rt.node());
    node->backward_fn = [d](Node& self) {
      for (std::size_t i = 0; i < self.parents.size(); ++i) {
        Node* pa = self.parents[i].get();
        if (!pa->requires_grad) continue;
        pa->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) pa->grad[j] += self.grad[i * d + j];
      }
    };
  }
  return Tensor(node);
}

Tensor get_row(const Tensor& m, std::size_t r) {
  require_2d(m, "get_row");
  const std::size_t rows = m.rows(), n = m.cols();
  if (r >= rows)
    throw ShapeError(concat("get_row: row ", r, " out of range for ", shape_str(m.shape())));
  std::vector<double> out(n);
  std::copy(m.values().begin() + r * n, m.values().begin() + (r + 1) * n, out.begin());
  auto node = make_node({n}, std::move(out));
  track(node, {&m}, [r, n](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    for (std::size_t j = 0; j < n; ++j) pa->grad[r * n + j] += self.grad[j];
  });
  return Tensor(node);
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_vec: no parts");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 1)
      throw ShapeError(concat("concat_vec: expected vectors, got ", shape_str(p.shape())));
    total += p.size();
  }
  std::vector<double> out;
  out.reserve(total);
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    sizes.push_back(p.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  auto node = make_node({total}, std::move(out));
  bool req = false;
  if (grad_enabled())
    for (const auto& p : parts)
      if (p.node()->requires_grad) req = true;
  if (req) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward_fn = [sizes](Node& self) {
      std::size_t off = 0;
      for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
        Node* pa = self.parents[pi].get();
        if (pa->requires_grad) {
          pa->ensure_grad();
          for (std::size_t j = 0; j < sizes[pi]; ++j) pa->grad[j] += self.grad[off + j];
        }
        off += sizes[pi];
      }
    };
  }
  return Tensor(node);
}

// ---- composite losses --------------------------------------------------------------

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  require_2d(logits, "softmax_cross_entropy");
  const std::size_t b = logits.rows(), c = logits.cols();
  if (labels.size() != b)
    throw ShapeError(concat("softmax_cross_entropy: ", labels.size(), " labels for ", b, " rows"));
  for (std::size_t i = 0; i < b; ++i)
    if (labels[i] >= c)
      throw DataError(concat("softmax_cross_entropy: label ", labels[i],
                             " out of range for ", c, " classes"));
  const auto& xv = logits.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = xv.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (std::size_t j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
    lse = mx + std::log(lse);
    loss += lse - row[labels[i]];
  }
  loss /= static_cast<double>(b);
  auto node = make_node({1}, {loss});
  auto labels_copy = std::make_shared<std::vector<std::size_t>>(labels);
  track(node, {&logits}, [b, c, labels_copy](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    const double g = self.grad[0] / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
      const double* row = pa->value.data() + i * c;
      double mx = row[0];
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
      double denom = 0.0;
      for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
      double* dst = pa->grad.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) {
        double p = std::exp(row[j] - mx) / denom;
        dst[j] += g * (p - ((*labels_copy)[i] == j ? 1.0 : 0.0));
      }
    }
  });
  GF_CHECK_FINITE(*node, "softmax_cross_entropy");
  return Tensor(node);
}

Tensor sigmoid_bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
  if (logits.size() != targets.size())
    throw ShapeError(concat("sigmoid_bce: ", targets.size(), " targets for ",
                            logits.size(), " logits"));
  const auto& xv = logits.values();
  const std::size_t n = xv.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xv[i];
    // max(x,0) - x*t + log(1 + exp(-|x|)) is the stable form.
    loss += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::fabs(x)));
  }
  loss /= static_cast<double>(n);
  auto node = make_node({1}, {loss});
  auto tcopy = std::make_shared<std::vector<double>>(targets);
  track(node, {&logits}, [n, tcopy](Node& self) {
    Node* pa = self.parents[0].get();
    pa->ensure_grad();
    const double g = self.grad[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-pa->value[i]));
      pa->grad[i] += g * (s - (*tcopy)[i]);
    }
  });
  GF_CHECK_FINITE(*node, "sigmoid_bce_with_logits");
  return Tensor(node);
}

// ---- backward ------------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ShapeError("backward: undefined loss tensor");
  if (loss.size() != 1)
    throw ShapeError(concat("backward: loss must be scalar, got shape ",
                            shape_str(loss.shape())));
  Node* root = loss.node().get();
  if (!root->requires_grad) return;  // constant loss: all gradients stay zero

  // Iterative post-order DFS over tracked nodes.
  static std::atomic<std::uint64_t> sweep_counter{1};
  const std::uint64_t mark = sweep_counter.fetch_add(1);
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  root->visit_mark = mark;
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (parent->requires_grad && parent->visit_mark != mark) {
        parent->visit_mark = mark;
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Intermediates get a fresh buffer per sweep; leaves accumulate across sweeps.
  for (Node* n : order) {
    if (n->is_leaf)
      n->ensure_grad();
    else
      n->grad.assign(n->size(), 0.0);
  }
  if (root->is_leaf)
    root->grad[0] += 1.0;
  else
    root->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

GradMap backward(const Tensor& loss, const ParameterStore& params) {
  backward(loss);
  return collect_grads(params);
}

GradMap collect_grads(const ParameterStore& params) {
  GradMap out;
  for (Parameter* p : params.all()) {
    if (p->tensor.has_grad())
      out[p->name] = p->tensor.grad();
    else
      out[p->name] = std::vector<double>(p->tensor.size(), 0.0);
  }
  return out;
}

GradMap finite_diff_grad(const std::function<double()>& f,
                         const std::vector<Parameter*>& params, double h) {
  if (h <= 0.0) throw ConfigError("finite_diff_grad: h must be > 0");
  GradMap out;
  for (Parameter* p : params) {
    std::vector<double> g(p->tensor.size(), 0.0);
    auto& vals = p->tensor.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = f();
      vals[i] = orig - h;
      const double fm = f();
      vals[i] = orig;
      g[i] = (fp - fm) / (2.0 * h);
    }
    out[p->name] = std::move(g);
  }
  return out;
}

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace geofuse
