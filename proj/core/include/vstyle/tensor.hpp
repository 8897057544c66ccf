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

#ifndef VSTYLE_TENSOR_HPP_
#define VSTYLE_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vstyle/error.hpp"

namespace vstyle {

class Rng;

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

template <class T, std::size_t Alignment>
class AlignedAllocator {
 public:
  using value_type = T;
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Alignment>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(
        ::operator new(n * sizeof(T), std::align_val_t(Alignment)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(Alignment));
  }
  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Alignment>;
  };
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) {
    return true;
  }
};

// 64-byte aligned value storage. Eigen's packed kernels peel loops to the
// alignment boundary of whatever pointer they get; pinning the alignment
// pins the summation order, which keeps runs bit-reproducible.
using DBuf = std::vector<double, AlignedAllocator<double, 64>>;

// One value in the recorded computation graph. Dense row-major f64 storage;
// `grad` stays empty until the backward sweep first touches the node.
struct TensorNode {
  Shape shape;
  DBuf value;
  DBuf grad;
  std::vector<NodePtr> parents;
  std::function<void(TensorNode&)> backward;
  const char* op = "leaf";
  bool requires_grad = false;
  std::int64_t tape_id = -1;  // index on the recording tape; -1 for leaves

  std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
  // Gradient buffer, allocated and zeroed on first use.
  DBuf& grad_buf();
};

// Lightweight handle to a graph node. Copying a Tensor copies the handle,
// not the data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor from_buf(Shape shape, DBuf data, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(node_->shape.size()); }
  std::int64_t numel() const { return node_->numel(); }
  // Rank-2 accessors; rank-1 tensors read as a single row.
  std::int64_t rows() const;
  std::int64_t cols() const;

  std::span<const double> values() const { return node_->value; }
  // Mutable access is reserved for leaves (parameters, buffers); mutating an
  // op result would desynchronize the recorded graph.
  DBuf& mutable_values();
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();
  bool requires_grad() const { return node_->requires_grad; }

  double item() const;                     // scalar tensors only
  double at(std::int64_t i) const { return node_->value[i]; }
  double at(std::int64_t r, std::int64_t c) const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Records every op result in creation order, which is by construction a
// topological order of the DAG. The newest Tape on the current thread is the
// recording target; tapes nest (grad checks open their own).
//
// backward() runs the reverse sweep exactly once per node: seed d loss/d loss
// = 1, then walk the tape from the loss node down to index 0, calling each
// node's pull-back to accumulate into its parents' grads. Leaves (parameters,
// constants) live off-tape and only ever receive accumulations.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(const NodePtr& n);
  void backward(const Tensor& loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<NodePtr> nodes_;
  Tape* prev_;
};

// While alive, ops produce plain values: no parents, no tape records, no
// backward closures. Used for inference and for finite-difference probes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();

 private:
  bool prev_;
};

bool grad_enabled();

// ---- Operations -----------------------------------------------------------
// Every op validates shapes, checks its numeric domain, and registers the
// matching pull-back when recording is active. Non-finite outputs throw
// NumericError naming the op.

Tensor matmul(const Tensor& a, const Tensor& b);
// x(m,k) * W(k,n) + row-broadcast b(n). Pass undefined b for no bias.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Elementwise; equal shapes, or one side a scalar tensor.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// x(m,n) + v broadcast over rows (v has n entries).
Tensor add_rowvec(const Tensor& x, const Tensor& v);

Tensor add_const(const Tensor& x, double c);
Tensor scale(const Tensor& x, double c);
Tensor neg(const Tensor& x);

Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);

// Softmax over a rank-1 tensor (numerically stabilized).
Tensor softmax_vec(const Tensor& x);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::int64_t r0, std::int64_t n);
Tensor slice_cols(const Tensor& x, std::int64_t c0, std::int64_t n);
// out[i, :] = x[indices[i], :]; backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> indices);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum_all(const Tensor& x);

// sum_i mask_i * sum_j (pred_ij - target_ij)^2; mask has one entry per row.
Tensor masked_sse(const Tensor& pred, const Tensor& target, const Tensor& mask);
// sum_i mask_i * BCE(logit_i, target_i), the numerically stable form.
Tensor bce_logits_sum(const Tensor& logits, const Tensor& targets,
                      const Tensor& mask);

// 'same' 1-D convolution over rows of x(T, c_in); w is (k*c_in, c_out) with
// tap-major layout, b is (c_out) or undefined.
Tensor conv1d_same(const Tensor& x, const Tensor& w, const Tensor& b,
                   std::int64_t k);
// 3x3 / stride-2 / pad-1 2-D convolution. x is (h*w, c_in) row-major over
// spatial positions; returns (ceil(h/2)*ceil(w/2), c_out).
Tensor conv2d_3x3_s2(const Tensor& x, std::int64_t h, std::int64_t w_dim,
                     const Tensor& w, const Tensor& b);

// Inverted dropout (scales by 1/keep at train time); identity when not
// training or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

class ParameterStore;

// Reverse-mode sweep for a scalar loss: zeroes parameter grads, then runs the
// current tape once so every reachable parameter's grad holds dLoss/dparam.
void backward(const Tensor& loss, ParameterStore& params);

}  // namespace vstyle

#endif  // VSTYLE_TENSOR_HPP_
