#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vtp/tensor.hpp"

namespace vtp {

/// Central finite differences of a deterministic scalar function against the
/// analytic gradients already stored on `params`. Returns the maximum
/// relative error, with denominator max(|analytic|, |numeric|, 1e-12).
inline double finite_diff_check(const std::function<double()>& f,
                                std::vector<Tensor> params,
                                double eps = 1e-5) {
  double max_rel = 0.0;
  for (auto& p : params) {
    auto& val = p.values();
    auto& g = p.grad();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double saved = val[i];
      val[i] = saved + eps;
      const double f_plus = f();
      val[i] = saved - eps;
      const double f_minus = f();
      val[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double denom =
          std::max({std::abs(g[i]), std::abs(numeric), 1e-12});
      max_rel = std::max(max_rel, std::abs(g[i] - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace vtp
