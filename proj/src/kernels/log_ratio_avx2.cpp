#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "mrss/kernels.hpp"

namespace mrss::kernels::avx2 {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

inline __m256d exp_pd(__m256d x) {
  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
  const __m256d n =
      _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(0.693145751953125), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

  // Taylor polynomial of exp on |r| <= ln2/2, degree 13.
  static constexpr double kCoef[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,      1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(kCoef[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kCoef[i]));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i bits = _mm256_cvtepi32_epi64(ni);
  bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

// log1p(y) for y in [0, 1] via 2 atanh(y / (2 + y)).
inline __m256d log1p_unit_pd(__m256d y) {
  const __m256d s = _mm256_div_pd(y, _mm256_add_pd(y, _mm256_set1_pd(2.0)));
  const __m256d s2 = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(1.0 / 35.0);
  for (int k = 16; k >= 0; --k) p = _mm256_fmadd_pd(p, s2, _mm256_set1_pd(1.0 / (2 * k + 1)));
  return _mm256_mul_pd(_mm256_add_pd(s, s), p);
}

inline __m256d abs_pd(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

inline double hsum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

inline double hmax(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
}

}  // namespace

void accumulate_log_ratio(const LogRatioTerm& term, const double* theta, std::size_t n,
                          double* logw) {
  const double gauss_const = 0.5 * (kLog2Pi + std::log(term.var));
  const __m256d vz = _mm256_set1_pd(term.z);
  const __m256d vpseudo = _mm256_set1_pd(term.pseudo);
  const __m256d vhalf_inv = _mm256_set1_pd(0.5 / term.var);
  const std::size_t n4 = n - n % 4;
  if (term.family == Family::Poisson) {
    const __m256d c0 = _mm256_set1_pd(gauss_const - std::lgamma(term.z + 1.0));
    for (std::size_t j = 0; j < n4; j += 4) {
      const __m256d th = _mm256_loadu_pd(theta + j);
      const __m256d r = _mm256_sub_pd(vpseudo, th);
      __m256d acc = _mm256_fmadd_pd(vz, th, _mm256_sub_pd(c0, exp_pd(th)));
      acc = _mm256_fmadd_pd(_mm256_mul_pd(r, r), vhalf_inv, acc);
      _mm256_storeu_pd(logw + j, _mm256_add_pd(_mm256_loadu_pd(logw + j), acc));
    }
  } else {
    const __m256d c0 = _mm256_set1_pd(gauss_const);
    const __m256d zero = _mm256_setzero_pd();
    for (std::size_t j = 0; j < n4; j += 4) {
      const __m256d th = _mm256_loadu_pd(theta + j);
      const __m256d r = _mm256_sub_pd(vpseudo, th);
      const __m256d e = exp_pd(_mm256_sub_pd(zero, abs_pd(th)));
      const __m256d softplus = _mm256_add_pd(_mm256_max_pd(th, zero), log1p_unit_pd(e));
      __m256d acc = _mm256_fmadd_pd(vz, th, _mm256_sub_pd(c0, softplus));
      acc = _mm256_fmadd_pd(_mm256_mul_pd(r, r), vhalf_inv, acc);
      _mm256_storeu_pd(logw + j, _mm256_add_pd(_mm256_loadu_pd(logw + j), acc));
    }
  }
  if (n4 < n) scalar::accumulate_log_ratio(term, theta + n4, n - n4, logw + n4);
}

ExpSum exp_sum(const double* x, std::size_t n) {
  ExpSum out;
  if (n == 0) return out;
  const std::size_t n4 = n - n % 4;
  double mx = -INFINITY;
  if (n4 > 0) {
    __m256d vmax = _mm256_loadu_pd(x);
    for (std::size_t j = 4; j < n4; j += 4) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(x + j));
    mx = hmax(vmax);
  }
  for (std::size_t j = n4; j < n; ++j) mx = std::max(mx, x[j]);
  out.max = mx;
  const __m256d vm = _mm256_set1_pd(mx);
  __m256d s = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  for (std::size_t j = 0; j < n4; j += 4) {
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + j), vm));
    s = _mm256_add_pd(s, e);
    s2 = _mm256_fmadd_pd(e, e, s2);
  }
  out.sum = hsum(s);
  out.sum_sq = hsum(s2);
  for (std::size_t j = n4; j < n; ++j) {
    const double e = std::exp(x[j] - mx);
    out.sum += e;
    out.sum_sq += e * e;
  }
  return out;
}

}  // namespace mrss::kernels::avx2
