#include "syncap/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace syncap::num {

GradCheckReport finite_diff_check(const std::function<double(bool)>& loss,
                                  ParamStore<double>& params, const GradCheckOptions& options) {
  params.zero_grad();
  const double base = loss(true);
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  report.floor = options.floor;
  if (options.resolution_floor) {
    const double ulp = std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(base));
    report.floor = std::max(report.floor, 4.0 * ulp / (options.step * options.tolerance));
  }
  report.passed = true;
  for (auto& p : params) {
    BlockReport block{p.name, 0.0, 0};
    std::vector<std::size_t> idx(p.value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_elements_per_block > 0 &&
        idx.size() > static_cast<std::size_t>(options.max_elements_per_block)) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(options.max_elements_per_block));
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      double& w = p.value.data[i];
      const double saved = w;
      w = saved + options.step;
      const double up = loss(false);
      w = saved - options.step;
      const double down = loss(false);
      w = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p.grad.data[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), report.floor});
      const double err = std::abs(analytic - numeric) / denom;
      block.max_rel_error = std::max(block.max_rel_error, std::isfinite(err) ? err : INFINITY);
      ++block.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
    if (!(block.max_rel_error < options.tolerance)) report.passed = false;
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace syncap::num
