#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "qpace/tensor.hpp"

namespace qpace {

/// Central-difference gradient estimate of a scalar function, one coordinate
/// at a time: (f(x + h*e_i) - f(x - h*e_i)) / (2h).
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: h must be > 0");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    probe[i] = xi + h;
    const double fp = f(probe);
    probe[i] = xi - h;
    const double fm = f(probe);
    probe[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw ContractError("finite_diff_grad: non-finite function value at coordinate " +
                          std::to_string(i));
    }
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

/// Pass/fail comparison used by gradient checks: coordinates agree when the
/// absolute gap is under `abs_floor` or the relative error is under `rel_tol`.
struct GradCompare {
  double max_rel = 0.0;
  double max_abs = 0.0;
  std::size_t worst_index = 0;
  bool ok = true;
};

inline GradCompare compare_gradients(const Tensor& analytic, const Tensor& numeric,
                                     double rel_tol = 1e-4, double abs_floor = 1e-7) {
  require_same_shape(analytic, numeric, "compare_gradients");
  GradCompare r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double abs_err = std::fabs(a - n);
    const double denom = std::max(std::fabs(a), std::fabs(n));
    const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
    if (abs_err > r.max_abs) r.max_abs = abs_err;
    if (abs_err >= abs_floor && rel_err > r.max_rel) {
      r.max_rel = rel_err;
      r.worst_index = i;
    }
    if (abs_err >= abs_floor && rel_err >= rel_tol) r.ok = false;
  }
  return r;
}

}  // namespace qpace
