#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mrss/kernels.hpp"

using namespace mrss;
using namespace mrss::kernels;

namespace {

bool close(double a, double b, double rel = 1e-13) {
  return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_CASE("AVX2 log-ratio kernel matches the scalar reference") {
  if (!avx2_available()) {
    MESSAGE("AVX2 not available; skipping");
    return;
  }
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> wide(-40.0, 40.0);
  std::uniform_real_distribution<double> var(0.01, 50.0);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 64u, 1001u}) {
    for (Family f : {Family::Bernoulli, Family::Poisson}) {
      for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> theta(n);
        for (auto& x : theta) x = (rep % 2) ? wide(rng) : 0.1 * wide(rng);
        const double z = f == Family::Bernoulli ? rep % 2 : std::floor(var(rng));
        const LogRatioTerm term{f, z, 0.2 * wide(rng), var(rng)};
        std::vector<double> a(n, 0.5), b(n, 0.5);
        scalar::accumulate_log_ratio(term, theta.data(), n, a.data());
        avx2::accumulate_log_ratio(term, theta.data(), n, b.data());
        for (std::size_t j = 0; j < n; ++j) CHECK(close(a[j], b[j]));
      }
    }
  }
}

TEST_CASE("AVX2 exp-sum kernel matches the scalar reference") {
  if (!avx2_available()) return;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-800.0, 50.0);
  for (std::size_t n : {1u, 2u, 4u, 7u, 33u, 1000u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    const ExpSum a = scalar::exp_sum(x.data(), n);
    const ExpSum b = avx2::exp_sum(x.data(), n);
    CHECK(a.max == b.max);
    CHECK(close(a.sum, b.sum, 1e-12));
    CHECK(close(a.sum_sq, b.sum_sq, 1e-12));
  }
}

TEST_CASE("dispatch honours the requested variant") {
  const Isa before = active_isa();
  CHECK(set_isa(Isa::Scalar));
  CHECK(active_isa() == Isa::Scalar);
  CHECK(set_isa(Isa::Avx2) == avx2_available());
  set_isa(before);
  CHECK(std::string(isa_name(Isa::Scalar)) == "scalar");
}

TEST_CASE("scalar reference against the closed-form terms") {
  const double theta[] = {-2.0, 0.0, 1.5};
  double out[3] = {0.0, 0.0, 0.0};
  const LogRatioTerm pois{Family::Poisson, 2.0, 0.3, 0.8};
  scalar::accumulate_log_ratio(pois, theta, 3, out);
  for (int j = 0; j < 3; ++j) {
    const double lp = 2.0 * theta[j] - std::exp(theta[j]) - std::log(2.0);
    const double lg = -0.5 * std::log(2 * M_PI * 0.8) - 0.5 * (0.3 - theta[j]) * (0.3 - theta[j]) / 0.8;
    CHECK(out[j] == doctest::Approx(lp - lg).epsilon(1e-14));
  }
}
