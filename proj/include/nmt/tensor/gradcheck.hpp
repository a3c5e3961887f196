#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "nmt/tensor/tensor.hpp"

namespace nmt::tensor {

// Central-difference check of reverse-mode gradients. `f` evaluates the
// scalar objective from the current contents of `x` (which it reads through
// the shared handle) and must be deterministic. Runs one recorded pass to
// get the analytic gradient, then perturbs every coordinate of `x` by ±h
// with no tape active. Returns the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8).
inline double finite_diff_check(const std::function<Tensor()>& f, Tensor x,
                                double h = 1e-5) {
  x.set_requires_grad(true);
  x.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    Recording rec(tape);
    Tensor loss = f();
    tape.backward(loss);
    analytic = x.grad();
  }
  x.zero_grad();

  double max_rel = 0.0;
  auto& vals = x.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double orig = vals[i];
    vals[i] = orig + h;
    const double fp = f().item();
    vals[i] = orig - h;
    const double fm = f().item();
    vals[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
  }
  return max_rel;
}

}  // namespace nmt::tensor
