#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "syncap/tensor.hpp"

namespace syncap::num {

enum class Init { zero, one, embedding, fan_in };

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;  // first moment
  Tensor<T> v;  // second moment
};

/// Named parameters in insertion order. Addresses are stable.
template <class T>
class ParamStore {
 public:
  /// embedding: U(-0.1, 0.1); fan_in: U(+-1/sqrt(fan)) with fan = rows unless
  /// given; zero and one: constant fills.
  Param<T>& add(const std::string& name, int rows, int cols, Init init, std::mt19937_64& rng,
                int fan = -1);
  Param<T>& get(const std::string& name);
  const Param<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();
  std::size_t element_count() const;
  std::size_t size() const { return params_.size(); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Copies values (not moments) from a store with the same layout.
  template <class U>
  void assign_values(const ParamStore<U>& other) {
    if (other.size() != size()) throw ShapeError("parameter stores differ in layout");
    auto it = other.begin();
    for (auto& p : params_) {
      if (p.name != it->name || !p.value.same_shape(it->value.template cast<T>()))
        throw ShapeError("parameter stores differ at " + p.name);
      p.value = it->value.template cast<T>();
      ++it;
    }
  }

 private:
  std::deque<Param<T>> params_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace syncap::num
