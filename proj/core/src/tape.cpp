#include "metanas/tape.hpp"

#include <utility>

#include "metanas/errors.hpp"

namespace metanas {

const Tensor& Var::value() const { return tape->value_of(*this); }
bool Var::requires_grad() const { return tape->requires_grad_of(*this); }

void Tape::check_var(const Var& v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw Error("tape: var does not belong to this tape (graph consumed or mixed tapes)");
  }
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.name = "leaf";
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = false;
  n.name = "constant";
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(const char* name, Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  check_finite(name, value);
  Node n;
  n.value = std::move(value);
  n.name = name;
  n.parents.reserve(parents.size());
  for (const Var& p : parents) {
    check_var(p);
    n.parents.push_back(p.id);
    n.requires_grad = n.requires_grad || nodes_[static_cast<size_t>(p.id)].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value_of(const Var& v) const {
  check_var(v);
  return nodes_[static_cast<size_t>(v.id)].value;
}

bool Tape::requires_grad_of(const Var& v) const {
  check_var(v);
  return nodes_[static_cast<size_t>(v.id)].requires_grad;
}

std::vector<Var> Tape::gradients(const Var& loss, const std::vector<Var>& wrt) {
  check_var(loss);
  const Tensor& lv = nodes_[static_cast<size_t>(loss.id)].value;
  if (lv.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape));
  }

  // Restrict the sweep to ancestors of the loss that can reach a
  // grad-requiring leaf; each node is visited exactly once.
  const int top = loss.id;
  std::vector<char> needed(static_cast<size_t>(top) + 1, 0);
  needed[static_cast<size_t>(top)] = 1;
  std::vector<Var> grad(static_cast<size_t>(top) + 1);
  grad[static_cast<size_t>(top)] = constant(Tensor::full(lv.shape, 1.0));

  std::vector<Var> parent_grads;
  for (int id = top; id >= 0; --id) {
    Node& node = nodes_[static_cast<size_t>(id)];
    if (!needed[static_cast<size_t>(id)] || !node.requires_grad) continue;
    const Var g = grad[static_cast<size_t>(id)];
    if (!g.defined() || !node.backward) continue;

    parent_grads.assign(node.parents.size(), Var{});
    node.backward(g, parent_grads);
    for (size_t i = 0; i < node.parents.size(); ++i) {
      const int pid = node.parents[i];
      if (!parent_grads[i].defined()) continue;
      if (!nodes_[static_cast<size_t>(pid)].requires_grad) continue;
      needed[static_cast<size_t>(pid)] = 1;
      Var& slot = grad[static_cast<size_t>(pid)];
      slot = slot.defined() ? add(slot, parent_grads[i]) : parent_grads[i];
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    check_var(w);
    out.push_back(w.id <= top ? grad[static_cast<size_t>(w.id)] : Var{});
  }
  return out;
}

std::vector<Tensor> Tape::gradient_values(const Var& loss, const std::vector<Var>& wrt) {
  std::vector<Var> gs = gradients(loss, wrt);
  std::vector<Tensor> out;
  out.reserve(gs.size());
  for (size_t i = 0; i < gs.size(); ++i) {
    out.push_back(gs[i].defined() ? gs[i].value() : Tensor::zeros(wrt[i].value().shape));
  }
  return out;
}

}  // namespace metanas
