#pragma once

#include <cstddef>
#include <memory>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "mmenc/tensor.hpp"

namespace mmenc {

template <typename Scalar>
class Graph;

// Handle to a node recorded on a Graph. Cheap to copy; valid while the graph lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<Scalar>* graph() const { return graph_; }
  std::size_t id() const { return id_; }

  const Tensor<Scalar>& value() const { return graph_->value(*this); }
  const Matrix<Scalar>& mat() const { return graph_->value(*this).matrix(); }
  const Shape& shape() const { return graph_->value(*this).shape(); }
  const Matrix<Scalar>& grad() const { return graph_->grad(*this); }

 private:
  Graph<Scalar>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// list is already topologically sorted; backward() walks it once in reverse.
// A graph supports a single backward pass and is then spent.
template <typename Scalar>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Matrix<Scalar>& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Scalar> constant(Tensor<Scalar> value) { return push(std::move(value), false, {}, nullptr); }

  // Leaf whose gradient is kept on the node and read back with grad().
  Var<Scalar> variable(Tensor<Scalar> value) { return push(std::move(value), true, {}, nullptr); }

  // Leaf bound to external parameter storage. After backward() the node's
  // gradient is added into `grad_sink` (which must outlive backward()).
  Var<Scalar> parameter(const Matrix<Scalar>& value, Matrix<Scalar>* grad_sink) {
    return parameter(value, grad_sink, Shape{value.rows(), value.cols()});
  }

  Var<Scalar> parameter(const Matrix<Scalar>& value, Matrix<Scalar>* grad_sink, Shape shape) {
    if (grad_sink != nullptr && (grad_sink->rows() != value.rows() || grad_sink->cols() != value.cols())) {
      throw ShapeError("gradient sink does not match parameter storage");
    }
    auto var = push(Tensor<Scalar>(std::move(shape), value), true, {}, nullptr);
    nodes_.back()->sink = grad_sink;
    return var;
  }

  // Records an operation result. `backward` receives d(loss)/d(result) and
  // must route contributions to the inputs through accumulate().
  Var<Scalar> record(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> inputs, BackwardFn backward) {
    return record(std::move(value), std::vector<Var<Scalar>>(inputs), std::move(backward));
  }

  Var<Scalar> record(Tensor<Scalar> value, const std::vector<Var<Scalar>>& inputs, BackwardFn backward) {
    bool needs_grad = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (in.graph() != this) throw UsageError("operation mixes variables from different graphs");
      if (in.id() >= nodes_.size()) throw UsageError("input node not yet recorded");
      needs_grad = needs_grad || nodes_[in.id()]->requires_grad;
      ids.push_back(in.id());
    }
    return push(std::move(value), needs_grad, std::move(ids), needs_grad ? std::move(backward) : nullptr);
  }

  bool requires_grad(const Var<Scalar>& v) const { return node(v).requires_grad; }

  template <typename Derived>
  void accumulate(const Var<Scalar>& v, const Eigen::MatrixBase<Derived>& contribution) {
    auto& n = *nodes_[v.id()];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = contribution;
      n.has_grad = true;
    } else {
      n.grad += contribution;
    }
  }

  const Tensor<Scalar>& value(const Var<Scalar>& v) const { return node(v).value; }

  // Gradient of the last backward() loss with respect to v; zeros when v was not reached.
  const Matrix<Scalar>& grad(const Var<Scalar>& v) const {
    auto& n = const_cast<Node&>(node(v));
    if (!n.has_grad) {
      n.grad = Matrix<Scalar>::Zero(n.value.matrix().rows(), n.value.matrix().cols());
      n.has_grad = true;
    }
    return n.grad;
  }

  void backward(const Var<Scalar>& loss) {
    if (loss.graph() != this) throw UsageError("loss belongs to a different graph");
    if (spent_) throw UsageError("backward() already ran on this graph");
    const auto& root = node(loss);
    if (root.value.size() != 1) {
      throw UsageError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
    }
    spent_ = true;
    if (!root.requires_grad) return;
    accumulate(loss, Matrix<Scalar>::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& n = *nodes_[i];
      if (!n.requires_grad || !n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad);
    }
    for (auto& p : nodes_) {
      auto& n = *p;
      if (n.sink != nullptr && n.has_grad) *n.sink += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool spent() const { return spent_; }

  // Input ids of a node, in the order they were passed to record().
  const std::vector<std::size_t>& inputs_of(const Var<Scalar>& v) const { return node(v).inputs; }

 private:
  struct Node {
    Tensor<Scalar> value;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Matrix<Scalar>* sink = nullptr;
    Matrix<Scalar> grad;
    bool has_grad = false;
  };

  const Node& node(const Var<Scalar>& v) const {
    if (v.graph() != this || v.id() >= nodes_.size()) throw UsageError("variable is not part of this graph");
    return *nodes_[v.id()];
  }

  Var<Scalar> push(Tensor<Scalar> value, bool requires_grad, std::vector<std::size_t> inputs, BackwardFn backward) {
    if (spent_) throw UsageError("cannot record on a graph after backward()");
    nodes_.push_back(std::make_unique<Node>(
        Node{std::move(value), requires_grad, std::move(inputs), std::move(backward), nullptr, {}, false}));
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  std::vector<std::unique_ptr<Node>> nodes_;  // boxed: references to recorded values stay valid while recording
  bool spent_ = false;
};

}  // namespace mmenc
