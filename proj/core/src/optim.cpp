#include "syncap/optim.hpp"

#include <cmath>

namespace syncap::num {

template <class T>
double Adam<T>::step(ParamStore<T>& store, double lr) {
  if (lr < 0) lr = cfg_.lr;
  double sq = 0.0;
  for (const auto& p : store)
    for (T g : p.grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw TrainingError("non-finite gradient norm");
  const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (auto& p : store) {
    auto& w = p.value.data;
    auto& m = p.m.data;
    auto& v = p.v.data;
    const auto& g = p.grad.data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]) * clip;
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      w[i] -= static_cast<T>(lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps));
    }
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;

double warmup_inverse_sqrt(double base_lr, long step, long warmup) {
  if (warmup <= 0) return base_lr;
  const double s = static_cast<double>(std::max(step, 1L));
  const double w = static_cast<double>(warmup);
  return s <= w ? base_lr * s / w : base_lr * std::sqrt(w / s);
}

}  // namespace syncap::num
