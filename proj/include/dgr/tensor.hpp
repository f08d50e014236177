// Copyright 2026 The DGR Lab Authors. All Rights Reserved.
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

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgr {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Raised when operand shapes violate an op's contract. The message names
/// the op and the offending dimension.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Index numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

template <typename Scalar>
struct Node {
  Shape shape;
  Buffer<Scalar> value;
  Buffer<Scalar> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }

  Buffer<Scalar>& grad_buffer() {
    if (grad.size() != value.size()) grad = Buffer<Scalar>::Zero(value.size());
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor participating in a reverse-mode graph.
///
/// A Tensor is a cheap handle; copies share the underlying node. Values are
/// immutable once an op has consumed them, except through mutable_data() on
/// leaves (parameters), which the optimizer owns.
template <typename Scalar>
class Tensor {
 public:
  using Node = detail::Node<Scalar>;
  using scalar_type = Scalar;

  Tensor() = default;
  Tensor(Shape shape, Buffer<Scalar> data, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  Index dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  Index size() const { return node_->value.size(); }

  const Buffer<Scalar>& data() const { return node_->value; }
  Buffer<Scalar>& mutable_data() { return node_->value; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  /// Gradient buffer; all zeros when nothing has been accumulated yet.
  Buffer<Scalar> grad() const;
  Buffer<Scalar>& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  /// Same values, no history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  /// Accumulates d(this)/d(leaf) into every leaf that requires grad.
  /// Requires a single-element tensor. Intermediate gradients are reset on
  /// each call; leaf gradients accumulate until zero_grad().
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  const char* op() const { return node_->op; }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape(), data().template cast<Other>());
  }

 private:
  std::shared_ptr<Node> node_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// Builds the output of a differentiable op. `backward` receives the output
/// node (its grad is populated) and pushes contributions into
/// `out.parents[i]` for parents that require grad. Recording is skipped when
/// no input requires grad or grad mode is off.
template <typename Scalar>
Tensor<Scalar> make_result(const char* op, Shape shape, Buffer<Scalar> value,
                           std::vector<Tensor<Scalar>> inputs,
                           std::function<void(detail::Node<Scalar>&)> backward);

/// Writes shape line then one value per line with 9 significant digits.
template <typename Scalar>
void dump_tensor(const Tensor<Scalar>& t, const std::string& path);

}  // namespace dgr
