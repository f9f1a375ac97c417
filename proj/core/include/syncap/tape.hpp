#pragma once

#include <deque>
#include <functional>

#include "syncap/params.hpp"
#include "syncap/tensor.hpp"

namespace syncap::num {

template <class T>
class Tape;

/// Handle to a node on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const { return tape->value(id); }
  int rows() const { return value().rows; }
  int cols() const { return value().cols; }
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode gradient tape. Nodes live in a deque, so references to
/// values stay valid while the tape grows. With recording off no backward
/// closures are kept, which is what decoding uses.
template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Leaf without gradient.
  Var<T> constant(Tensor<T> v);
  /// Leaf that borrows `v`; the caller keeps it alive while the tape is used.
  Var<T> borrow(const Tensor<T>& v);
  /// Leaf whose gradient is kept on the tape (read it with grad()).
  Var<T> variable(Tensor<T> v);
  /// Borrowed parameter leaf; backward() accumulates into p.grad.
  Var<T> param(Param<T>& p);

  /// Appends an op result. It needs a gradient iff one of `inputs` does.
  Var<T> push(Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward bw);
  Var<T> push(Tensor<T> value, bool needs_grad, Backward bw);

  const Tensor<T>& value(int id) const;
  /// Gradient buffer, zero-allocated on first access.
  Tensor<T>& grad(int id);
  /// Transpose of a node's value, computed once and kept with the node.
  const Tensor<T>& transposed(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs; }
  bool needs_grad(Var<T> v) const { return needs_grad(v.id); }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and runs every closure in
  /// reverse order, then flushes parameter gradients.
  void backward(Var<T> root);
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* ext = nullptr;
    Tensor<T> grad;
    Tensor<T> transposed;
    Tensor<T>* sink = nullptr;
    bool needs = false;
    Backward bw;
  };
  Var<T> append(Node n);

  std::deque<Node> nodes_;
  bool record_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace syncap::num
