#include <algorithm>
#include <cmath>

#include "mrss/kernels.hpp"

namespace mrss::kernels::scalar {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void accumulate_log_ratio(const LogRatioTerm& term, const double* theta, std::size_t n,
                          double* logw) {
  const double half_inv_var = 0.5 / term.var;
  const double gauss_const = 0.5 * (kLog2Pi + std::log(term.var));
  if (term.family == Family::Poisson) {
    const double c0 = gauss_const - std::lgamma(term.z + 1.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double th = theta[j];
      const double r = term.pseudo - th;
      logw[j] += term.z * th - std::exp(th) + c0 + r * r * half_inv_var;
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double th = theta[j];
      const double r = term.pseudo - th;
      const double softplus = std::max(th, 0.0) + std::log1p(std::exp(-std::abs(th)));
      logw[j] += term.z * th - softplus + gauss_const + r * r * half_inv_var;
    }
  }
}

ExpSum exp_sum(const double* x, std::size_t n) {
  ExpSum out;
  if (n == 0) return out;
  out.max = *std::max_element(x, x + n);
  for (std::size_t j = 0; j < n; ++j) {
    const double e = std::exp(x[j] - out.max);
    out.sum += e;
    out.sum_sq += e * e;
  }
  return out;
}

}  // namespace mrss::kernels::scalar
