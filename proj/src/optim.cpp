#include "mrss/optim.hpp"

#include <cmath>
#include <limits>

#include "mrss/error.hpp"

namespace mrss {

namespace {

constexpr double kMaxStep = 2.0;  // sup-norm cap of a trial step in coordinate units
constexpr double kArmijo = 1e-4;

class Counted {
 public:
  Counted(const std::function<double(const Vector&)>& f, int budget) : f_(f), budget_(budget) {}

  bool exhausted() const { return evals_ >= budget_; }
  int evals() const { return evals_; }

  // -infinity on failure.
  double operator()(const Vector& x) {
    ++evals_;
    try {
      const double v = f_(x);
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

 private:
  const std::function<double(const Vector&)>& f_;
  int budget_;
  int evals_ = 0;
};

}  // namespace

OptimResult maximize_bfgs(const std::function<double(const Vector&)>& f, const Vector& x0,
                          const OptimOptions& opts, const Matrix& inv_hessian0) {
  const int n = static_cast<int>(x0.size());
  OptimResult res;
  res.x = x0;
  res.f0 = f(x0);
  res.f = res.f0;
  res.evals = 1;
  res.inv_hessian = inv_hessian0.rows() == n ? inv_hessian0 : Matrix::Identity(n, n);
  if (!std::isfinite(res.f0))
    throw Error(ErrorCode::Validation, "objective is not finite at the starting point");
  if (n == 0) return res;

  Counted eval(f, opts.max_evals - 1);
  Matrix& H = res.inv_hessian;
  bool fresh_hessian = inv_hessian0.rows() != n;
  Vector fd_cap = Vector::Constant(n, std::numeric_limits<double>::infinity());
  if (fresh_hessian && opts.diagonal_start && opts.max_evals - 1 >= 3 * n + 1) {
    // diagonal of the inverse Hessian from second differences; the curvature also bounds the
    // difference step so that truncation error stays near the noise level of f
    const double noise = opts.f_noise_rel * (1.0 + std::abs(res.f0)) + opts.f_noise_abs;
    for (int i = 0; i < n; ++i) {
      const double h = opts.curvature_step * std::max(1.0, std::abs(x0(i)));
      Vector up = x0, down = x0;
      up(i) += h;
      down(i) -= h;
      const double d2 = (eval(up) - 2.0 * res.f0 + eval(down)) / (h * h);
      const bool ok = std::isfinite(d2) && d2 < 0.0;
      H(i, i) = ok ? std::min(1.0 / -d2, 1e4) : 1.0;
      if (ok) fd_cap(i) = 2.0 * std::sqrt(noise / -d2);
    }
    fresh_hessian = false;
  }
  Vector x = x0;
  double fx = res.f0;
  Vector grad(n), grad_prev, s_prev;

  for (int it = 0; it < opts.max_iter; ++it) {
    const int per_grad = opts.central ? 2 * n : n;
    if (eval.evals() + per_grad + 1 > opts.max_evals - 1) break;
    for (int i = 0; i < n; ++i) {
      const double scale = std::max(1.0, std::abs(x(i)));
      const double h = std::max(std::min(opts.fd_step * scale, fd_cap(i)), 1e-10 * scale);
      Vector xh = x;
      xh(i) += h;
      double fh = eval(xh);
      if (opts.central && std::isfinite(fh)) {
        xh(i) = x(i) - h;
        const double fl = eval(xh);
        grad(i) = std::isfinite(fl) ? (fh - fl) / (2.0 * h) : (fh - fx) / h;
      } else if (std::isfinite(fh)) {
        grad(i) = (fh - fx) / h;
      } else {
        xh(i) = x(i) - h;
        fh = eval(xh);
        grad(i) = std::isfinite(fh) ? (fx - fh) / h : 0.0;
      }
    }
    if (grad_prev.size() == n) {
      const Vector y = grad_prev - grad;  // gradient change of -f
      const double sy = s_prev.dot(y);
      if (sy > 1e-12 * s_prev.norm() * y.norm()) {
        if (fresh_hessian) {
          H = Matrix::Identity(n, n) * (sy / y.squaredNorm());
          fresh_hessian = false;
        }
        const double rho = 1.0 / sy;
        const Matrix I = Matrix::Identity(n, n);
        H = (I - rho * s_prev * y.transpose()) * H * (I - rho * y * s_prev.transpose()) +
            rho * s_prev * s_prev.transpose();
      }
    }
    if (grad.cwiseAbs().maxCoeff() <= opts.grad_tol * (1.0 + std::abs(fx))) break;

    Vector d = H * grad;
    if (!(d.dot(grad) > 0.0)) {
      H = Matrix::Identity(n, n);
      fresh_hessian = true;
      d = grad;
    }
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > kMaxStep) d *= kMaxStep / dmax;
    const double slope = d.dot(grad);

    double step = 1.0;
    bool accepted = false;
    double f_new = fx;
    while (!eval.exhausted()) {
      const Vector trial = x + step * d;
      f_new = eval(trial);
      if (f_new >= fx + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.3;
      if (step * dmax < 1e-12) break;
    }
    res.iterations = it + 1;
    if (!accepted) break;
    s_prev = step * d;
    grad_prev = grad;
    const double change = f_new - fx;
    x += s_prev;
    fx = f_new;
    if (fx > res.f) {
      res.f = fx;
      res.x = x;
    }
    if (change <= opts.f_tol * (1.0 + std::abs(fx))) break;
  }
  res.evals = 1 + eval.evals();
  return res;
}

}  // namespace mrss
