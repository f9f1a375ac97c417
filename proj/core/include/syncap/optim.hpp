#pragma once

#include "syncap/params.hpp"

namespace syncap::num {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global L2 norm; <= 0 disables clipping
};

/// Adam with bias correction and global-norm gradient clipping.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// One update with learning rate `lr` (the configured one when negative).
  /// Returns the gradient norm before clipping. Throws TrainingError on a
  /// non-finite gradient, leaving parameters untouched.
  double step(ParamStore<T>& store, double lr = -1.0);

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

/// Linear warm-up over `warmup` steps, then decay with 1/sqrt(step).
double warmup_inverse_sqrt(double base_lr, long step, long warmup);

}  // namespace syncap::num
