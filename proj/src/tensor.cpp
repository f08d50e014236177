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

#include "dgr/tensor.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace dgr {

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Buffer<Scalar> data, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " holds " +
                     std::to_string(numel(shape)) + " elements but data has " +
                     std::to_string(data.size()));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::zeros(Shape shape, bool requires_grad) {
  const Index n = numel(shape);
  return Tensor(std::move(shape), Buffer<Scalar>::Zero(n), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::full(Shape shape, Scalar value, bool requires_grad) {
  const Index n = numel(shape);
  return Tensor(std::move(shape), Buffer<Scalar>::Constant(n, value), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::scalar(Scalar value, bool requires_grad) {
  return full(Shape{1}, value, requires_grad);
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (size() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

template <typename Scalar>
void Tensor<Scalar>::set_requires_grad(bool on) {
  if (!node_->is_leaf()) throw std::logic_error("set_requires_grad: only leaves can be toggled");
  node_->requires_grad = on;
}

template <typename Scalar>
Buffer<Scalar> Tensor<Scalar>::grad() const {
  if (has_grad()) return node_->grad;
  return Buffer<Scalar>::Zero(size());
}

template <typename Scalar>
void Tensor<Scalar>::zero_grad() {
  node_->grad.resize(0);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::detach() const {
  return Tensor(shape(), data(), false);
}

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  if (size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; the order is a function of the graph alone.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.resize(0);
  }
  node_->grad_buffer()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf() || n->grad.size() != n->value.size()) continue;
    n->backward(*n);
  }
}

template <typename Scalar>
Tensor<Scalar> make_result(const char* op, Shape shape, Buffer<Scalar> value,
                           std::vector<Tensor<Scalar>> inputs,
                           std::function<void(detail::Node<Scalar>&)> backward) {
  Tensor<Scalar> out(std::move(shape), std::move(value), false);
  auto& node = *out.node();
  node.op = op;
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || (in.defined() && in.requires_grad());
  if (!any) return out;
  node.requires_grad = true;
  node.parents.reserve(inputs.size());
  for (auto& in : inputs) node.parents.push_back(in.defined() ? in.node() : nullptr);
  // Undefined optional inputs are dropped so parent indices stay positional.
  for (auto& p : node.parents) {
    if (!p) p = std::make_shared<detail::Node<Scalar>>();
  }
  node.backward = std::move(backward);
  return out;
}

template <typename Scalar>
void dump_tensor(const Tensor<Scalar>& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_tensor: cannot open " + path);
  for (std::size_t i = 0; i < t.shape().size(); ++i) out << (i ? " " : "") << t.shape()[i];
  out << '\n';
  char buf[64];
  for (Index i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g\n", static_cast<double>(t.data()[i]));
    out << buf;
  }
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(const char*, Shape, Buffer<float>, std::vector<Tensor<float>>,
                                   std::function<void(detail::Node<float>&)>);
template Tensor<double> make_result(const char*, Shape, Buffer<double>, std::vector<Tensor<double>>,
                                    std::function<void(detail::Node<double>&)>);
template void dump_tensor(const Tensor<float>&, const std::string&);
template void dump_tensor(const Tensor<double>&, const std::string&);

}  // namespace dgr
