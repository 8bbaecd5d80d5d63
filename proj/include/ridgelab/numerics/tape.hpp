#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>

#include "ridgelab/numerics/matrix.hpp"

namespace ridgelab::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Accumulated gradient after Tape::backward; a zero matrix if none reached this node.
  Matrix grad() const;
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape over coarse matrix primitives. Nodes are appended in
// evaluation order, so creation order is a topological order and backward
// walks it once in reverse. One tape belongs to one computation.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  // A non-recording tape stores values only (inference).
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Matrix value);
  // Non-owning leaves; `value` must outlive the tape.
  Var constant_ref(const Matrix& value);
  Var parameter_ref(const Matrix& value);

  // Appends an interior node. `fn` receives the node's gradient and must
  // route it to `inputs` through accumulate().
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates to every node.
  void backward(Var loss);

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(const Var& v) const;
  Matrix grad(const Var& v) const;
  bool requires_grad(const Var& v) const;
  void accumulate(const Var& target, const Matrix& delta);
  void accumulate(const Var& target, Matrix&& delta);

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;

    const Matrix& value() const { return external ? *external : owned; }
  };

  Var push(Node node);
  const Node& node(const Var& v) const;

  bool recording_;
  std::deque<Node> nodes_;  // deque keeps references stable while appending
};

}  // namespace ridgelab::ad
