#include "syncap/params.hpp"

#include <cmath>

namespace syncap::num {

template <class T>
Param<T>& ParamStore<T>::add(const std::string& name, int rows, int cols, Init init,
                             std::mt19937_64& rng, int fan) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  Param<T> p;
  p.name = name;
  p.value = Tensor<T>(rows, cols);
  double bound = 0.0;
  if (init == Init::embedding) bound = 0.1;
  if (init == Init::fan_in) bound = 1.0 / std::sqrt(static_cast<double>(fan > 0 ? fan : rows));
  if (init == Init::one) p.value.fill(T(1));
  if (bound > 0) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& x : p.value.data) x = static_cast<T>(u(rng));
  }
  p.grad = Tensor<T>(rows, cols);
  p.m = Tensor<T>(rows, cols);
  p.v = Tensor<T>(rows, cols);
  params_.push_back(std::move(p));
  return params_.back();
}

template <class T>
Param<T>& ParamStore<T>::get(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw IndexError("no parameter named " + name);
}

template <class T>
const Param<T>& ParamStore<T>::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw IndexError("no parameter named " + name);
}

template <class T>
bool ParamStore<T>::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

template <class T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T(0));
}

template <class T>
std::size_t ParamStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace syncap::num
