#pragma once

// Quasi-Newton maximization with finite-difference gradients and a hard evaluation budget.

#include <functional>

#include "mrss/lgss.hpp"

namespace mrss {

struct OptimOptions {
  int max_evals = 200;
  int max_iter = 100;
  double fd_step = 1e-5;     // relative finite-difference step
  bool central = false;      // central instead of forward differences
  bool diagonal_start = true;  // start from second-difference curvatures (2n evaluations)
  double curvature_step = 1e-3;
  double f_noise_rel = 1e-13;  // evaluation noise of f, relative to 1 + |f| ...
  double f_noise_abs = 0.0;    // ... plus an absolute part
  double grad_tol = 1e-6;    // on the sup-norm of the gradient, relative to 1 + |f|
  double f_tol = 1e-10;      // relative change of f between iterations
};

struct OptimResult {
  Vector x;
  double f = 0.0;
  double f0 = 0.0;          // objective at the start point
  int evals = 0;
  int iterations = 0;
  Matrix inv_hessian;       // final inverse-Hessian approximation (of -f)
};

// Maximizes f from x0. Evaluations that throw or return non-finite values count as -infinity
// except at x0. The returned point is the best evaluated one, so f >= f0 always holds.
// `inv_hessian0` may carry an approximation from a previous call; empty means a diagonal start
// (or identity when diagonal_start is off).
OptimResult maximize_bfgs(const std::function<double(const Vector&)>& f, const Vector& x0,
                          const OptimOptions& opts = {}, const Matrix& inv_hessian0 = {});

}  // namespace mrss
