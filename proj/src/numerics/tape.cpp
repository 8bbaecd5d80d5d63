#include "ridgelab/numerics/tape.hpp"

#include <string>

#include "ridgelab/errors.hpp"

namespace ridgelab::ad {

const Matrix& Var::value() const {
  RIDGELAB_REQUIRE(tape_ != nullptr, "Var: unbound handle");
  return tape_->value(*this);
}

Matrix Var::grad() const {
  RIDGELAB_REQUIRE(tape_ != nullptr, "Var: unbound handle");
  return tape_->grad(*this);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(const Var& v) const {
  RIDGELAB_REQUIRE(v.tape() == this, "Var belongs to a different tape");
  RIDGELAB_REQUIRE(v.id() < nodes_.size(), "Var id out of range");
  return nodes_[v.id()];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = recording_;
  return push(std::move(n));
}

Var Tape::constant_ref(const Matrix& value) {
  Node n;
  n.external = &value;
  return push(std::move(n));
}

Var Tape::parameter_ref(const Matrix& value) {
  Node n;
  n.external = &value;
  n.requires_grad = recording_;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  if (recording_) {
    for (const Var& in : inputs) {
      if (node(in).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return push(std::move(n));
}

const Matrix& Tape::value(const Var& v) const { return node(v).value(); }

Matrix Tape::grad(const Var& v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value().rows(), n.value().cols());
}

bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

void Tape::accumulate(const Var& target, const Matrix& delta) {
  RIDGELAB_REQUIRE(target.tape() == this && target.id() < nodes_.size(), "accumulate: foreign Var");
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  require_same_shape(n.value(), delta, "accumulate");
  if (n.has_grad) {
    n.grad += delta;
  } else {
    n.grad = delta;
    n.has_grad = true;
  }
}

void Tape::accumulate(const Var& target, Matrix&& delta) {
  RIDGELAB_REQUIRE(target.tape() == this && target.id() < nodes_.size(), "accumulate: foreign Var");
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  require_same_shape(n.value(), delta, "accumulate");
  if (n.has_grad) {
    n.grad += delta;
  } else {
    n.grad = std::move(delta);
    n.has_grad = true;
  }
}

void Tape::backward(Var loss) {
  RIDGELAB_REQUIRE(recording_, "backward on a non-recording tape");
  const Node& root = node(loss);
  RIDGELAB_REQUIRE(root.value().rows() == 1 && root.value().cols() == 1,
                   "backward: loss must be 1x1");
  if (!root.requires_grad) return;
  accumulate(loss, Matrix::Ones(1, 1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

}  // namespace ridgelab::ad
