// Copyright (c) 2026 The vstyle Authors
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

#include "vstyle/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "vstyle/param_store.hpp"
#include "vstyle/rng.hpp"

namespace vstyle {

namespace {

thread_local Tape* g_tape = nullptr;
thread_local bool g_grad_enabled = true;

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                   Eigen::Dynamic,
                                                   Eigen::RowMajor>>;

void check_finite(const char* op, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("op '") + op +
                         "' produced a non-finite value");
    }
  }
}

bool recording() { return g_grad_enabled && g_tape != nullptr; }

// Builds an op node. Parents and the pull-back are kept only when the result
// participates in an active tape and some parent requires grad; otherwise the
// node degenerates to a constant leaf.
Tensor make_op(const char* op, Shape shape, DBuf value,
               std::initializer_list<Tensor> parents,
               std::function<void(TensorNode&)> bw) {
  check_finite(op, value);
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (recording()) {
    for (const Tensor& p : parents) {
      if (p.defined() && p.node()->requires_grad) needs = true;
    }
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& p : parents) {
      if (p.defined()) node->parents.push_back(p.node());
    }
    node->backward = std::move(bw);
    g_tape->record(node);
  }
  return Tensor(node);
}

// Accumulate g into the parent's grad buffer unless it is a constant.
void accum(const NodePtr& parent, std::span<const double> g) {
  if (!parent->requires_grad) return;
  auto& buf = parent->grad_buf();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

}  // namespace

std::int64_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::int64_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ')';
  return os.str();
}

DBuf& TensorNode::grad_buf() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  n->value.assign(shape_numel(shape), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::full(Shape shape, double v) {
  auto n = std::make_shared<TensorNode>();
  n->value.assign(shape_numel(shape), v);
  n->shape = std::move(shape);
  return Tensor(n);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return from_buf(std::move(shape), DBuf(data.begin(), data.end()),
                  requires_grad);
}

Tensor Tensor::from_buf(Shape shape, DBuf data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::scalar(double v) { return from_buf({1}, DBuf{v}); }

std::int64_t Tensor::rows() const {
  return rank() == 1 ? 1 : node_->shape[0];
}

std::int64_t Tensor::cols() const {
  return rank() == 1 ? node_->shape[0] : node_->shape[1];
}

DBuf& Tensor::mutable_values() {
  if (node_->backward) {
    throw ContractError("mutable access to a non-leaf tensor");
  }
  return node_->value;
}

void Tensor::zero_grad() { node_->grad.clear(); }

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on non-scalar tensor of shape " +
                        shape_str(node_->shape));
  }
  return node_->value[0];
}

double Tensor::at(std::int64_t r, std::int64_t c) const {
  return node_->value[r * cols() + c];
}

// ---- Tape ------------------------------------------------------------------

Tape::Tape() : prev_(g_tape) { g_tape = this; }

Tape::~Tape() {
  // Release newest-first so no destructor recurses through a long parent
  // chain (graphs here can be tens of thousands of nodes deep in time).
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    (*it)->parents.clear();
    (*it)->backward = nullptr;
  }
  nodes_.clear();
  g_tape = prev_;
}

Tape* Tape::current() { return g_tape; }

void Tape::record(const NodePtr& n) {
  n->tape_id = static_cast<std::int64_t>(nodes_.size());
  nodes_.push_back(n);
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  const NodePtr& root = loss.node();
  if (root->tape_id < 0) {
    throw ContractError("loss is not connected to the recorded graph");
  }
  root->grad_buf()[0] = 1.0;
  for (std::int64_t i = root->tape_id; i >= 0; --i) {
    TensorNode& n = *nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n);
  }
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss, ParameterStore& params) {
  if (g_tape == nullptr) {
    throw ContractError("backward called with no active tape");
  }
  params.zero_grads();
  g_tape->backward(loss);
}

// ---- Ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
  DBuf out(m * n);
  {
    ConstMatMap am(a.values().data(), m, k);
    ConstMatMap bm(b.values().data(), k, n);
    MatMap cm(out.data(), m, n);
    cm.noalias() = am * bm;
  }
  return make_op("matmul", {m, n}, std::move(out), {a, b},
                 [a, b, m, k, n](TensorNode& self) {
                   ConstMatMap g(self.grad.data(), m, n);
                   if (a.node()->requires_grad) {
                     ConstMatMap bm(b.values().data(), k, n);
                     MatMap da(a.node()->grad_buf().data(), m, k);
                     da.noalias() += g * bm.transpose();
                   }
                   if (b.node()->requires_grad) {
                     ConstMatMap am(a.values().data(), m, k);
                     MatMap db(b.node()->grad_buf().data(), k, n);
                     db.noalias() += am.transpose() * g;
                   }
                 });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.rows()) {
    throw ShapeError("linear shape mismatch: " + shape_str(x.shape()) + " x " +
                     shape_str(w.shape()));
  }
  const std::int64_t m = x.rows(), k = x.cols(), n = w.cols();
  if (b.defined() && b.numel() != n) {
    throw ShapeError("linear bias length " + std::to_string(b.numel()) +
                     " != " + std::to_string(n));
  }
  DBuf out(m * n);
  {
    ConstMatMap xm(x.values().data(), m, k);
    ConstMatMap wm(w.values().data(), k, n);
    MatMap om(out.data(), m, n);
    om.noalias() = xm * wm;
    if (b.defined()) {
      Eigen::Map<const Eigen::RowVectorXd> bv(b.values().data(), n);
      om.rowwise() += bv;
    }
  }
  return make_op("linear", {m, n}, std::move(out), {x, w, b},
                 [x, w, b, m, k, n](TensorNode& self) {
                   ConstMatMap g(self.grad.data(), m, n);
                   if (x.node()->requires_grad) {
                     ConstMatMap wm(w.values().data(), k, n);
                     MatMap dx(x.node()->grad_buf().data(), m, k);
                     dx.noalias() += g * wm.transpose();
                   }
                   if (w.node()->requires_grad) {
                     ConstMatMap xm(x.values().data(), m, k);
                     MatMap dw(w.node()->grad_buf().data(), k, n);
                     dw.noalias() += xm.transpose() * g;
                   }
                   if (b.defined() && b.node()->requires_grad) {
                     Eigen::Map<Eigen::RowVectorXd> db(
                         b.node()->grad_buf().data(), n);
                     db += g.colwise().sum();
                   }
                 });
}

namespace {

enum class Ew { kAdd, kSub, kMul };

Tensor elementwise2(const char* name, Ew kind, const Tensor& a,
                    const Tensor& b) {
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!(a.shape() == b.shape() || a_scalar || b_scalar)) {
    throw ShapeError(std::string(name) + " broadcast unsupported: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const Tensor& big = a_scalar ? b : a;
  const std::int64_t n = big.numel();
  DBuf out(n);
  auto av = a.values(), bv = b.values();
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    out[i] = kind == Ew::kAdd ? x + y : kind == Ew::kSub ? x - y : x * y;
  }
  return make_op(
      name, big.shape(), std::move(out), {a, b},
      [kind, a, b, a_scalar, b_scalar, n](TensorNode& self) {
        auto& g = self.grad;
        if (a.node()->requires_grad) {
          auto& da = a.node()->grad_buf();
          for (std::int64_t i = 0; i < n; ++i) {
            const double piece =
                kind == Ew::kMul ? g[i] * b.values()[b_scalar ? 0 : i] : g[i];
            da[a_scalar ? 0 : i] += piece;
          }
        }
        if (b.node()->requires_grad) {
          auto& db = b.node()->grad_buf();
          for (std::int64_t i = 0; i < n; ++i) {
            double piece = g[i];
            if (kind == Ew::kMul) piece *= a.values()[a_scalar ? 0 : i];
            if (kind == Ew::kSub) piece = -piece;
            db[b_scalar ? 0 : i] += piece;
          }
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise2("add", Ew::kAdd, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise2("sub", Ew::kSub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise2("mul", Ew::kMul, a, b);
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2 || v.numel() != x.cols()) {
    throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " + " +
                     shape_str(v.shape()));
  }
  const std::int64_t m = x.rows(), n = x.cols();
  DBuf out(x.values().begin(), x.values().end());
  for (std::int64_t r = 0; r < m; ++r) {
    for (std::int64_t c = 0; c < n; ++c) out[r * n + c] += v.values()[c];
  }
  return make_op("add_rowvec", x.shape(), std::move(out), {x, v},
                 [x, v, m, n](TensorNode& self) {
                   if (x.node()->requires_grad) {
                     auto& dx = x.node()->grad_buf();
                     for (std::int64_t i = 0; i < m * n; ++i)
                       dx[i] += self.grad[i];
                   }
                   if (v.node()->requires_grad) {
                     auto& dv = v.node()->grad_buf();
                     for (std::int64_t r = 0; r < m; ++r)
                       for (std::int64_t c = 0; c < n; ++c)
                         dv[c] += self.grad[r * n + c];
                   }
                 });
}

Tensor add_const(const Tensor& x, double c) {
  DBuf out(x.values().begin(), x.values().end());
  for (auto& v : out) v += c;
  return make_op("add_const", x.shape(), std::move(out), {x},
                 [x](TensorNode& self) { accum(x.node(), self.grad); });
}

Tensor scale(const Tensor& x, double c) {
  DBuf out(x.values().begin(), x.values().end());
  for (auto& v : out) v *= c;
  return make_op("scale", x.shape(), std::move(out), {x},
                 [x, c](TensorNode& self) {
                   if (!x.node()->requires_grad) return;
                   auto& dx = x.node()->grad_buf();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     dx[i] += c * self.grad[i];
                 });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

namespace {

template <class Fwd, class Bwd>
Tensor unary(const char* name, const Tensor& x, Fwd f, Bwd dfdx_from_y) {
  DBuf out(x.numel());
  auto xv = x.values();
  for (std::int64_t i = 0; i < x.numel(); ++i) out[i] = f(xv[i]);
  return make_op(name, x.shape(), std::move(out), {x},
                 [x, dfdx_from_y](TensorNode& self) {
                   if (!x.node()->requires_grad) return;
                   auto& dx = x.node()->grad_buf();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     dx[i] += dfdx_from_y(self.value[i], x.values()[i]) *
                              self.grad[i];
                 });
}

}  // namespace

Tensor tanh_op(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double y, double) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double y, double) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double, double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp_op(const Tensor& x) {
  for (double v : x.values()) {
    if (v > 709.0) {
      throw NumericError("exp argument " + std::to_string(v) +
                         " overflows f64");
    }
  }
  return unary("exp", x, [](double v) { return std::exp(v); },
               [](double y, double) { return y; });
}

Tensor log_op(const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) {
      throw NumericError("log argument " + std::to_string(v) +
                         " outside domain (0, inf)");
    }
  }
  return unary("log", x, [](double v) { return std::log(v); },
               [](double, double v) { return 1.0 / v; });
}

Tensor softmax_vec(const Tensor& x) {
  if (x.rank() != 1) {
    throw ShapeError("softmax_vec expects rank-1, got " +
                     shape_str(x.shape()));
  }
  auto xv = x.values();
  const double mx = *std::max_element(xv.begin(), xv.end());
  DBuf out(x.numel());
  double z = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    out[i] = std::exp(xv[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return make_op("softmax", x.shape(), std::move(out), {x},
                 [x](TensorNode& self) {
                   if (!x.node()->requires_grad) return;
                   double dot = 0.0;
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     dot += self.grad[i] * self.value[i];
                   auto& dx = x.node()->grad_buf();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     dx[i] += self.value[i] * (self.grad[i] - dot);
                 });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  const std::int64_t n = parts[0].cols();
  std::int64_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw ShapeError("concat_rows column mismatch: " +
                       shape_str(p.shape()));
    }
    m += p.rows();
  }
  DBuf out;
  out.reserve(m * n);
  for (const auto& p : parts)
    out.insert(out.end(), p.values().begin(), p.values().end());
  std::vector<Tensor> held(parts.begin(), parts.end());
  auto node = std::make_shared<TensorNode>();
  node->shape = {m, n};
  node->value = std::move(out);
  check_finite("concat_rows", node->value);
  node->op = "concat_rows";
  bool needs = false;
  if (recording()) {
    for (const auto& p : held)
      if (p.node()->requires_grad) needs = true;
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : held) node->parents.push_back(p.node());
    node->backward = [held](TensorNode& self) {
      std::size_t off = 0;
      for (const auto& p : held) {
        const std::size_t len = p.values().size();
        if (p.node()->requires_grad) {
          auto& dp = p.node()->grad_buf();
          for (std::size_t i = 0; i < len; ++i) dp[i] += self.grad[off + i];
        }
        off += len;
      }
    };
    g_tape->record(node);
  }
  return Tensor(node);
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::int64_t m = parts[0].rows();
  std::int64_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw ShapeError("concat_cols row mismatch: " + shape_str(p.shape()));
    }
    n += p.cols();
  }
  DBuf out(m * n);
  std::int64_t c0 = 0;
  for (const auto& p : parts) {
    const std::int64_t pc = p.cols();
    for (std::int64_t r = 0; r < m; ++r)
      for (std::int64_t c = 0; c < pc; ++c)
        out[r * n + c0 + c] = p.values()[r * pc + c];
    c0 += pc;
  }
  std::vector<Tensor> held(parts.begin(), parts.end());
  auto node = std::make_shared<TensorNode>();
  node->shape = {m, n};
  node->value = std::move(out);
  check_finite("concat_cols", node->value);
  node->op = "concat_cols";
  bool needs = false;
  if (recording()) {
    for (const auto& p : held)
      if (p.node()->requires_grad) needs = true;
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : held) node->parents.push_back(p.node());
    node->backward = [held, m, n](TensorNode& self) {
      std::int64_t c0 = 0;
      for (const auto& p : held) {
        const std::int64_t pc = p.cols();
        if (p.node()->requires_grad) {
          auto& dp = p.node()->grad_buf();
          for (std::int64_t r = 0; r < m; ++r)
            for (std::int64_t c = 0; c < pc; ++c)
              dp[r * pc + c] += self.grad[r * n + c0 + c];
        }
        c0 += pc;
      }
    };
    g_tape->record(node);
  }
  return Tensor(node);
}

Tensor slice_rows(const Tensor& x, std::int64_t r0, std::int64_t n) {
  if (x.rank() != 2 || r0 < 0 || r0 + n > x.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(r0) + ", " +
                     std::to_string(r0 + n) + ") of " + shape_str(x.shape()));
  }
  const std::int64_t c = x.cols();
  DBuf out(x.values().begin() + r0 * c,
                          x.values().begin() + (r0 + n) * c);
  return make_op("slice_rows", {n, c}, std::move(out), {x},
                 [x, r0, c](TensorNode& self) {
                   if (!x.node()->requires_grad) return;
                   auto& dx = x.node()->grad_buf();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     dx[r0 * c + i] += self.grad[i];
                 });
}

Tensor slice_cols(const Tensor& x, std::int64_t c0, std::int64_t n) {
  if (x.rank() != 2 || c0 < 0 || c0 + n > x.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(c0) + ", " +
                     std::to_string(c0 + n) + ") of " + shape_str(x.shape()));
  }
  const std::int64_t m = x.rows(), xc = x.cols();
  DBuf out(m * n);
  for (std::int64_t r = 0; r < m; ++r)
    for (std::int64_t c = 0; c < n; ++c)
      out[r * n + c] = x.values()[r * xc + c0 + c];
  return make_op("slice_cols", {m, n}, std::move(out), {x},
                 [x, c0, m, n, xc](TensorNode& self) {
                   if (!x.node()->requires_grad) return;
                   auto& dx = x.node()->grad_buf();
                   for (std::int64_t r = 0; r < m; ++r)
                     for (std::int64_t c = 0; c < n; ++c)
                       dx[r * xc + c0 + c] += self.grad[r * n + c];
                 });
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> indices) {
  if (x.rank() != 2) {
    throw ShapeError("gather_rows expects rank-2, got " +
                     shape_str(x.shape()));
  }
  const std::int64_t m = x.rows(), c = x.cols();
  for (auto i : indices) {
    if (i < 0 || i >= m) {
      throw ContractError("gather_rows index " + std::to_string(i) +
                          " out of range [0, " + std::to_string(m) + ")");
    }
  }
  const std::int64_t k = static_cast<std::int64_t>(indices.size());
  DBuf out(k * c);
  for (std::int64_t r = 0; r < k; ++r)
    std::copy_n(x.values().data() + indices[r] * c, c, out.data() + r * c);
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  return make_op("gather_rows", {k, c}, std::move(out), {x},
                 [x, idx = std::move(idx), c](TensorNode& self) {
                   if (!x.node()->requires_grad) return;
                   auto& dx = x.node()->grad_buf();
                   for (std::size_t r = 0; r < idx.size(); ++r)
                     for (std::int64_t j = 0; j < c; ++j)
                       dx[idx[r] * c + j] += self.grad[r * c + j];
                 });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " +
                     shape_str(shape));
  }
  DBuf out(x.values().begin(), x.values().end());
  return make_op("reshape", std::move(shape), std::move(out), {x},
                 [x](TensorNode& self) { accum(x.node(), self.grad); });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_op("sum", {1}, {s}, {x}, [x](TensorNode& self) {
    if (!x.node()->requires_grad) return;
    auto& dx = x.node()->grad_buf();
    const double g = self.grad[0];
    for (auto& v : dx) v += g;
  });
}

Tensor masked_sse(const Tensor& pred, const Tensor& target,
                  const Tensor& mask) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("masked_sse pred " + shape_str(pred.shape()) +
                     " vs target " + shape_str(target.shape()));
  }
  const std::int64_t m = pred.rows(), n = pred.cols();
  if (mask.numel() != m) {
    throw ShapeError("masked_sse mask length " + std::to_string(mask.numel()) +
                     " != rows " + std::to_string(m));
  }
  double s = 0.0;
  for (std::int64_t r = 0; r < m; ++r) {
    if (mask.values()[r] == 0.0) continue;
    const double w = mask.values()[r];
    for (std::int64_t c = 0; c < n; ++c) {
      const double d = pred.values()[r * n + c] - target.values()[r * n + c];
      s += w * d * d;
    }
  }
  return make_op("masked_sse", {1}, {s}, {pred, target, mask},
                 [pred, target, mask, m, n](TensorNode& self) {
                   if (!pred.node()->requires_grad) return;
                   const double g = self.grad[0];
                   auto& dp = pred.node()->grad_buf();
                   for (std::int64_t r = 0; r < m; ++r) {
                     const double w = mask.values()[r];
                     if (w == 0.0) continue;
                     for (std::int64_t c = 0; c < n; ++c) {
                       const std::int64_t i = r * n + c;
                       dp[i] += 2.0 * w * g *
                                (pred.values()[i] - target.values()[i]);
                     }
                   }
                 });
}

Tensor bce_logits_sum(const Tensor& logits, const Tensor& targets,
                      const Tensor& mask) {
  const std::int64_t m = logits.numel();
  if (targets.numel() != m || mask.numel() != m) {
    throw ShapeError("bce_logits_sum length mismatch");
  }
  double s = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    if (mask.values()[i] == 0.0) continue;
    const double x = logits.values()[i];
    const double t = targets.values()[i];
    s += mask.values()[i] *
         (std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x))));
  }
  return make_op("bce_logits", {1}, {s}, {logits, targets, mask},
                 [logits, targets, mask, m](TensorNode& self) {
                   if (!logits.node()->requires_grad) return;
                   const double g = self.grad[0];
                   auto& dl = logits.node()->grad_buf();
                   for (std::int64_t i = 0; i < m; ++i) {
                     const double w = mask.values()[i];
                     if (w == 0.0) continue;
                     const double x = logits.values()[i];
                     const double sig = 1.0 / (1.0 + std::exp(-x));
                     dl[i] += w * g * (sig - targets.values()[i]);
                   }
                 });
}

namespace {

// Tap-major im2col for 'same' 1-D convolution: row t holds
// [x[t-k/2], ..., x[t+k/2]] flattened, zeros outside the signal.
DBuf im2col_1d(std::span<const double> x, std::int64_t t_len,
                              std::int64_t c_in, std::int64_t k) {
  const std::int64_t half = k / 2;
  DBuf cols(t_len * k * c_in, 0.0);
  for (std::int64_t t = 0; t < t_len; ++t) {
    for (std::int64_t tap = 0; tap < k; ++tap) {
      const std::int64_t src = t + tap - half;
      if (src < 0 || src >= t_len) continue;
      std::copy_n(x.data() + src * c_in, c_in,
                  cols.data() + (t * k + tap) * c_in);
    }
  }
  return cols;
}

}  // namespace

Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& b,
                   std::int64_t k) {
  if (x.rank() != 2 || w.rank() != 2 || w.rows() != k * x.cols()) {
    throw ShapeError("conv1d_same: x " + shape_str(x.shape()) + ", w " +
                     shape_str(w.shape()) + ", k " + std::to_string(k));
  }
  const std::int64_t t_len = x.rows(), c_in = x.cols(), c_out = w.cols();
  auto cols = im2col_1d(x.values(), t_len, c_in, k);
  DBuf out(t_len * c_out);
  {
    ConstMatMap cm(cols.data(), t_len, k * c_in);
    ConstMatMap wm(w.values().data(), k * c_in, c_out);
    MatMap om(out.data(), t_len, c_out);
    om.noalias() = cm * wm;
    if (b.defined()) {
      Eigen::Map<const Eigen::RowVectorXd> bv(b.values().data(), c_out);
      om.rowwise() += bv;
    }
  }
  return make_op(
      "conv1d", {t_len, c_out}, std::move(out), {x, w, b},
      [x, w, b, cols = std::move(cols), t_len, c_in, c_out,
       k](TensorNode& self) {
        ConstMatMap g(self.grad.data(), t_len, c_out);
        if (w.node()->requires_grad) {
          ConstMatMap cm(cols.data(), t_len, k * c_in);
          MatMap dw(w.node()->grad_buf().data(), k * c_in, c_out);
          dw.noalias() += cm.transpose() * g;
        }
        if (b.defined() && b.node()->requires_grad) {
          Eigen::Map<Eigen::RowVectorXd> db(b.node()->grad_buf().data(),
                                            c_out);
          db += g.colwise().sum();
        }
        if (x.node()->requires_grad) {
          // d cols = g * w^T, then col2im accumulates overlaps.
          DBuf dcols(t_len * k * c_in);
          {
            ConstMatMap wm(w.values().data(), k * c_in, c_out);
            MatMap dc(dcols.data(), t_len, k * c_in);
            dc.noalias() = g * wm.transpose();
          }
          auto& dx = x.node()->grad_buf();
          const std::int64_t half = k / 2;
          for (std::int64_t t = 0; t < t_len; ++t) {
            for (std::int64_t tap = 0; tap < k; ++tap) {
              const std::int64_t src = t + tap - half;
              if (src < 0 || src >= t_len) continue;
              const double* dsrc = dcols.data() + (t * k + tap) * c_in;
              double* ddst = dx.data() + src * c_in;
              for (std::int64_t c = 0; c < c_in; ++c) ddst[c] += dsrc[c];
            }
          }
        }
      });
}

Tensor conv2d_3x3_s2(const Tensor& x, std::int64_t h, std::int64_t w_dim,
                     const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || x.rows() != h * w_dim) {
    throw ShapeError("conv2d: x " + shape_str(x.shape()) + " vs h*w " +
                     std::to_string(h * w_dim));
  }
  const std::int64_t c_in = x.cols();
  if (w.rows() != 9 * c_in) {
    throw ShapeError("conv2d: weight " + shape_str(w.shape()) +
                     " vs 9*c_in " + std::to_string(9 * c_in));
  }
  const std::int64_t c_out = w.cols();
  const std::int64_t ho = (h + 1) / 2, wo = (w_dim + 1) / 2;
  // im2col over strided output positions; taps ordered (dy, dx) row-major.
  DBuf cols(ho * wo * 9 * c_in, 0.0);
  for (std::int64_t oy = 0; oy < ho; ++oy) {
    for (std::int64_t ox = 0; ox < wo; ++ox) {
      double* row = cols.data() + (oy * wo + ox) * 9 * c_in;
      for (std::int64_t dy = 0; dy < 3; ++dy) {
        for (std::int64_t dx = 0; dx < 3; ++dx) {
          const std::int64_t sy = oy * 2 + dy - 1;
          const std::int64_t sx = ox * 2 + dx - 1;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w_dim) continue;
          std::copy_n(x.values().data() + (sy * w_dim + sx) * c_in, c_in,
                      row + (dy * 3 + dx) * c_in);
        }
      }
    }
  }
  DBuf out(ho * wo * c_out);
  {
    ConstMatMap cm(cols.data(), ho * wo, 9 * c_in);
    ConstMatMap wm(w.values().data(), 9 * c_in, c_out);
    MatMap om(out.data(), ho * wo, c_out);
    om.noalias() = cm * wm;
    if (b.defined()) {
      Eigen::Map<const Eigen::RowVectorXd> bv(b.values().data(), c_out);
      om.rowwise() += bv;
    }
  }
  return make_op(
      "conv2d", {ho * wo, c_out}, std::move(out), {x, w, b},
      [x, w, b, cols = std::move(cols), h, w_dim, c_in, c_out, ho,
       wo](TensorNode& self) {
        ConstMatMap g(self.grad.data(), ho * wo, c_out);
        if (w.node()->requires_grad) {
          ConstMatMap cm(cols.data(), ho * wo, 9 * c_in);
          MatMap dw(w.node()->grad_buf().data(), 9 * c_in, c_out);
          dw.noalias() += cm.transpose() * g;
        }
        if (b.defined() && b.node()->requires_grad) {
          Eigen::Map<Eigen::RowVectorXd> db(b.node()->grad_buf().data(),
                                            c_out);
          db += g.colwise().sum();
        }
        if (x.node()->requires_grad) {
          DBuf dcols(ho * wo * 9 * c_in);
          {
            ConstMatMap wm(w.values().data(), 9 * c_in, c_out);
            MatMap dc(dcols.data(), ho * wo, 9 * c_in);
            dc.noalias() = g * wm.transpose();
          }
          auto& dx = x.node()->grad_buf();
          for (std::int64_t oy = 0; oy < ho; ++oy) {
            for (std::int64_t ox = 0; ox < wo; ++ox) {
              const double* row = dcols.data() + (oy * wo + ox) * 9 * c_in;
              for (std::int64_t dy = 0; dy < 3; ++dy) {
                for (std::int64_t dx2 = 0; dx2 < 3; ++dx2) {
                  const std::int64_t sy = oy * 2 + dy - 1;
                  const std::int64_t sx = ox * 2 + dx2 - 1;
                  if (sy < 0 || sy >= h || sx < 0 || sx >= w_dim) continue;
                  const double* src = row + (dy * 3 + dx2) * c_in;
                  double* dst = dx.data() + (sy * w_dim + sx) * c_in;
                  for (std::int64_t c = 0; c < c_in; ++c) dst[c] += src[c];
                }
              }
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ContractError("dropout probability must be < 1");
  const double keep = 1.0 - p;
  DBuf mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : 1.0 / keep;
  return mul(x, Tensor::from_buf(x.shape(), std::move(mask)));
}

}  // namespace vstyle
