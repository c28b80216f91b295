#include "flowlut/graph.hpp"

#include <algorithm>

#include "flowlut/branch_probe.hpp"
#include "flowlut/errors.hpp"

namespace flowlut {

Var Graph::leaf(Tensor& t) {
  Node n;
  n.op = "leaf";
  n.borrowed = &t;
  n.param = &t;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::constant(Tensor t) {
  Node n;
  n.op = "constant";
  n.owned = std::move(t);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::constant_ref(const Tensor& t) {
  Node n;
  n.op = "constant";
  n.borrowed = &t;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::record(std::string op, Tensor value, std::vector<Var> inputs,
                  BackwardFn backward) {
  Node n;
  n.op = std::move(op);
  n.owned = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    const Node& src = node(in);
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || src.requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) {
    throw UsageError("graph variable handle out of range");
  }
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value(); }

void Graph::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value().numel() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " +
                     shape_str(root.value().shape()));
  }
  if (!root.requires_grad) return;

  nodes_[loss.id].grad = Tensor(root.value().shape(), 1.0f);

  std::vector<Tensor*> input_grads;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;

    if (n.backward) {
      input_grads.assign(n.inputs.size(), nullptr);
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Node& in = nodes_[n.inputs[k]];
        if (!in.requires_grad) continue;
        if (in.grad.empty()) in.grad = Tensor(in.value().shape());
        input_grads[k] = &in.grad;
      }
      n.backward(n.grad, input_grads);
    }
    if (n.param) {
      auto dst = n.param->grad();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    // Interior gradients are no longer needed once propagated.
    if (!n.param) n.grad = Tensor();
  }
}

}  // namespace flowlut

// ----------------------------------------------------------- branch probe

namespace flowlut {
namespace {
thread_local BranchProbe* t_probe = nullptr;
}

BranchProbe* active_branch_probe() { return t_probe; }

ScopedBranchProbe::ScopedBranchProbe(BranchProbe& p) : prev_(t_probe) { t_probe = &p; }
ScopedBranchProbe::~ScopedBranchProbe() { t_probe = prev_; }

}  // namespace flowlut
