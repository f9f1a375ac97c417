#include "syncap/tape.hpp"

namespace syncap::num {

template <class T>
Var<T> Tape<T>::append(Node n) {
  nodes_.push_back(std::move(n));
  return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var<T> Tape<T>::constant(Tensor<T> v) {
  Node n;
  n.own = std::move(v);
  return append(std::move(n));
}

template <class T>
Var<T> Tape<T>::borrow(const Tensor<T>& v) {
  Node n;
  n.ext = &v;
  return append(std::move(n));
}

template <class T>
Var<T> Tape<T>::variable(Tensor<T> v) {
  Node n;
  n.own = std::move(v);
  n.needs = record_;
  return append(std::move(n));
}

template <class T>
Var<T> Tape<T>::param(Param<T>& p) {
  Node n;
  n.ext = &p.value;
  if (record_) {
    n.needs = true;
    n.sink = &p.grad;
  }
  return append(std::move(n));
}

template <class T>
Var<T> Tape<T>::push(Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward bw) {
  bool needs = false;
  if (record_)
    for (const auto& v : inputs) needs = needs || needs_grad(v.id);
  return push(std::move(value), needs, std::move(bw));
}

template <class T>
Var<T> Tape<T>::push(Tensor<T> value, bool needs_grad, Backward bw) {
  Node n;
  n.own = std::move(value);
  n.needs = record_ && needs_grad;
  if (n.needs) n.bw = std::move(bw);
  return append(std::move(n));
}

template <class T>
const Tensor<T>& Tape<T>::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext ? *n.ext : n.own;
}

template <class T>
Tensor<T>& Tape<T>::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) {
    const auto& v = value(id);
    n.grad = Tensor<T>(v.rows, v.cols);
  }
  return n.grad;
}

template <class T>
const Tensor<T>& Tape<T>::transposed(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const auto& v = value(id);
  if (n.transposed.empty() && !v.empty()) {
    n.transposed = Tensor<T>(v.cols, v.rows);
    kernels::transpose(v.rows, v.cols, v.data.data(), n.transposed.data.data());
  }
  return n.transposed;
}

template <class T>
void Tape<T>::backward(Var<T> root) {
  if (root.tape != this) throw ShapeError("backward: variable from another tape");
  const auto& rv = value(root.id);
  if (rv.rows != 1 || rv.cols != 1) throw ShapeError("backward: root must be a scalar");
  if (!needs_grad(root.id)) return;
  grad(root.id).data[0] = T(1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs || n.grad.empty()) continue;
    if (n.bw) n.bw(*this, i);
  }
  for (auto& n : nodes_) {
    if (!n.sink || n.grad.empty()) continue;
    auto& s = n.sink->data;
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += n.grad.data[k];
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace syncap::num
