#pragma once

// Inner loops of the importance-sampling likelihood, evaluated across draws.
// A portable scalar reference and an AVX2/FMA variant; the variant is chosen at runtime
// (CPU support, overridable with MRSS_SIMD=scalar).

#include <cstddef>

#include "mrss/expfam.hpp"

namespace mrss::kernels {

enum class Isa { Scalar, Avx2 };

struct LogRatioTerm {
  Family family;      // Bernoulli or Poisson
  double z;           // observation
  double pseudo;      // pseudo-observation of the linearized model
  double var;         // pseudo-variance
};

// max and sum of exp(x - max) over n values.
struct ExpSum {
  double max = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;  // sum of exp(2 (x - max))
};

// logw[j] += log p(z | theta[j]) - log N(pseudo; theta[j], var)
using LogRatioFn = void (*)(const LogRatioTerm&, const double* theta, std::size_t n, double* logw);
using ExpSumFn = ExpSum (*)(const double* x, std::size_t n);

namespace scalar {
void accumulate_log_ratio(const LogRatioTerm& term, const double* theta, std::size_t n,
                          double* logw);
ExpSum exp_sum(const double* x, std::size_t n);
}  // namespace scalar

namespace avx2 {
void accumulate_log_ratio(const LogRatioTerm& term, const double* theta, std::size_t n,
                          double* logw);
ExpSum exp_sum(const double* x, std::size_t n);
}  // namespace avx2

bool avx2_available();
Isa active_isa();
const char* isa_name(Isa isa);
// Forces a variant; returns false (and changes nothing) if the CPU lacks it.
bool set_isa(Isa isa);

void accumulate_log_ratio(const LogRatioTerm& term, const double* theta, std::size_t n,
                          double* logw);
ExpSum exp_sum(const double* x, std::size_t n);

}  // namespace mrss::kernels
