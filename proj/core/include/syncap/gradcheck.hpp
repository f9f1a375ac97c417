#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "syncap/params.hpp"

namespace syncap::num {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Elements compared per parameter block; 0 checks all of them.
  int max_elements_per_block = 0;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Raise the floor to the smallest gradient a central difference can
  /// resolve to `tolerance`: about 4 ulp(|loss|) / (step * tolerance).
  bool resolution_floor = true;
  std::uint64_t seed = 0;
};

struct BlockReport {
  std::string name;
  double max_rel_error = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  std::vector<BlockReport> blocks;
  double max_rel_error = 0.0;
  double floor = 0.0;  // denominator floor actually used
  bool passed = false;
};

/// `loss(true)` must evaluate the loss and accumulate analytic gradients into
/// `params`; `loss(false)` only evaluates. Gradients are zeroed first.
/// Central differences are taken in place and every perturbed value restored.
GradCheckReport finite_diff_check(const std::function<double(bool with_grad)>& loss,
                                  ParamStore<double>& params,
                                  const GradCheckOptions& options = {});

}  // namespace syncap::num
