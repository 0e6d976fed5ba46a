#ifndef PCRISK_ML_OPTIMIZE_HPP
#define PCRISK_ML_OPTIMIZE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pcrisk/error.hpp"

namespace pcrisk::ml {

/// Loss at `params`; fills `grad` (same size) when non-null.
using Objective = std::function<double(const std::vector<double>& params, std::vector<double>* grad)>;

struct DescentOptions {
  std::size_t max_iter = 1000;
  double tol = 1e-6;
};

struct DescentResult {
  std::vector<double> params;
  std::vector<double> losses;  // one entry per accepted step, starting with the initial loss
  std::size_t iterations = 0;
  bool converged = false;
};

/// Full-batch gradient descent with Armijo backtracking. Accepted steps never
/// raise the loss. Stops on a small gradient, a small relative loss change, or
/// max_iter; a non-finite loss throws NonConvergenceError.
inline DescentResult gradient_descent(const Objective& f, std::vector<double> params,
                                      const DescentOptions& opt) {
  DescentResult r;
  std::vector<double> grad(params.size()), trial(params.size()), trial_grad(params.size());
  double loss = f(params, &grad);
  if (!std::isfinite(loss)) throw NonConvergenceError("initial loss is not finite", loss);
  r.losses.push_back(loss);
  double step = 1.0;
  for (; r.iterations < opt.max_iter; ++r.iterations) {
    double g2 = 0, gmax = 0;
    for (double g : grad) {
      g2 += g * g;
      gmax = std::max(gmax, std::abs(g));
    }
    if (gmax < opt.tol) {
      r.converged = true;
      break;
    }
    step = std::min(step * 2, 1e3);
    double next = 0;
    bool accepted = false;
    while (step > 1e-20) {
      for (std::size_t i = 0; i < params.size(); ++i) trial[i] = params[i] - step * grad[i];
      next = f(trial, &trial_grad);
      if (std::isfinite(next) && next <= loss - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step /= 2;
    }
    if (!accepted) {
      r.converged = true;  // no descent direction left at machine precision
      break;
    }
    params.swap(trial);
    grad.swap(trial_grad);
    const double change = loss - next;
    loss = next;
    r.losses.push_back(loss);
    if (change <= opt.tol * std::max(1.0, std::abs(loss))) {
      ++r.iterations;
      r.converged = true;
      break;
    }
  }
  if (!std::isfinite(loss)) throw NonConvergenceError("loss diverged", r.losses.back());
  r.params = std::move(params);
  return r;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1 / (1 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace pcrisk::ml

#endif  // PCRISK_ML_OPTIMIZE_HPP
