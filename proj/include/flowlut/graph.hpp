#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "flowlut/tensor.hpp"

namespace flowlut {

/// Handle to a node of a Graph.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

/// Append-only reverse-mode tape. Nodes are appended in evaluation order, so
/// every input of node i has an index below i and a single reverse sweep is a
/// valid topological traversal.
///
/// Leaves bind to caller-owned tensors (parameters, inputs); after
/// backward() their gradient buffers hold the accumulated partials. The
/// caller zeroes those buffers between steps. A Graph is single-threaded.
class Graph {
 public:
  /// `input_grads[i]` is null when input i does not need a gradient;
  /// otherwise it points at that input's accumulator (same shape as its
  /// value). Implementations must add, not assign.
  using BackwardFn = std::function<void(const Tensor& grad_out,
                                        std::span<Tensor* const> input_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Trainable leaf; `t` must outlive the graph.
  Var leaf(Tensor& t);
  /// Non-differentiable value, copied into the graph.
  Var constant(Tensor t);
  /// Non-differentiable value referenced in place; `t` must outlive the graph.
  Var constant_ref(const Tensor& t);

  Var record(std::string op, Tensor value, std::vector<Var> inputs,
             BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  const std::string& op(Var v) const { return node(v).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every leaf. Throws
  /// UsageError unless `loss` holds exactly one element.
  void backward(Var loss);

 private:
  struct Node {
    std::string op;
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    Tensor grad;
    const Tensor& value() const { return borrowed ? *borrowed : owned; }
  };

  const Node& node(Var v) const;

  // deque keeps node addresses stable; backward closures may hold pointers
  // to earlier node values.
  std::deque<Node> nodes_;
};

}  // namespace flowlut
