#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "splatsdf/core/types.hpp"

namespace splatsdf::ad {

// Central-difference gradient check. `f` evaluates the scalar at a parameter
// vector; `analytic` is the gradient under test. Returns
//   max_i |analytic_i - central_i| / max(1, |central_i|).
inline double finite_diff_check(const std::function<double(const VecX<double>&)>& f,
                                VecX<double> params, const VecX<double>& analytic,
                                double eps = 1e-5) {
  if (analytic.size() != params.size())
    throw std::invalid_argument("finite_diff_check: gradient size mismatch");
  double worst = 0.0;
  for (Index i = 0; i < params.size(); ++i) {
    const double x0 = params[i];
    params[i] = x0 + eps;
    const double fp = f(params);
    params[i] = x0 - eps;
    const double fm = f(params);
    params[i] = x0;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_check: non-finite value at probe point");
    const double central = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic[i] - central) / std::max(1.0, std::abs(central));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace splatsdf::ad
