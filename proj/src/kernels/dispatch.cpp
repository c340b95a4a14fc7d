#include <atomic>
#include <cstdlib>
#include <cstring>

#include "mrss/kernels.hpp"

namespace mrss::kernels {

namespace {

Isa detect() {
  const char* env = std::getenv("MRSS_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::Scalar;
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

void accumulate_log_ratio(const LogRatioTerm& term, const double* theta, std::size_t n,
                          double* logw) {
  if (active_isa() == Isa::Avx2)
    avx2::accumulate_log_ratio(term, theta, n, logw);
  else
    scalar::accumulate_log_ratio(term, theta, n, logw);
}

ExpSum exp_sum(const double* x, std::size_t n) {
  return active_isa() == Isa::Avx2 ? avx2::exp_sum(x, n) : scalar::exp_sum(x, n);
}

}  // namespace mrss::kernels
