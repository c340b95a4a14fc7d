#include "mrss/expfam.hpp"

#include <algorithm>
#include <cmath>

#include "mrss/error.hpp"

namespace mrss {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

ChannelFamily ChannelFamily::gaussian(double variance) {
  if (!(variance > 0.0)) throw Error(ErrorCode::Validation, "Gaussian variance must be positive");
  return {Family::Gaussian, variance};
}

Family parse_family(std::string_view name) {
  if (name == "gaussian" || name == "normal") return Family::Gaussian;
  if (name == "bernoulli" || name == "binomial" || name == "binary") return Family::Bernoulli;
  if (name == "poisson" || name == "count") return Family::Poisson;
  throw Error(ErrorCode::Validation, "unknown family '" + std::string(name) + "'");
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Bernoulli: return "bernoulli";
    case Family::Poisson: return "poisson";
  }
  return "?";
}

double expit(double x) {
  x = std::clamp(x, -kBernoulliClamp, kBernoulliClamp);
  return 1.0 / (1.0 + std::exp(-x));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void check_support(const ChannelFamily& family, double z) {
  switch (family.kind) {
    case Family::Gaussian:
      if (!std::isfinite(z)) throw Error(ErrorCode::UnsupportedValue, "non-finite Gaussian value");
      return;
    case Family::Bernoulli:
      if (z != 0.0 && z != 1.0)
        throw Error(ErrorCode::UnsupportedValue, "Bernoulli value must be 0 or 1");
      return;
    case Family::Poisson:
      if (!(z >= 0.0) || z != std::floor(z) || !std::isfinite(z))
        throw Error(ErrorCode::UnsupportedValue, "Poisson value must be a non-negative integer");
      return;
  }
}

double log_density(const ChannelFamily& family, double z, double theta) {
  check_support(family, z);
  switch (family.kind) {
    case Family::Gaussian: {
      const double r = z - theta;
      return -0.5 * (kLog2Pi + std::log(family.variance)) - 0.5 * r * r / family.variance;
    }
    case Family::Bernoulli:
      return z * theta - softplus(theta);
    case Family::Poisson:
      return z * theta - std::exp(theta) - std::lgamma(z + 1.0);
  }
  return 0.0;
}

SignalDerivs d1_d2(const ChannelFamily& family, double z, double theta) {
  check_support(family, z);
  switch (family.kind) {
    case Family::Gaussian:
      return {(z - theta) / family.variance, -1.0 / family.variance};
    case Family::Bernoulli: {
      const double mu = expit(theta);
      return {z - mu, -mu * (1.0 - mu)};
    }
    case Family::Poisson: {
      const double mu = std::exp(theta);
      return {z - mu, -mu};
    }
  }
  return {0.0, 0.0};
}

double response_mean(Family family, double theta) {
  switch (family) {
    case Family::Gaussian: return theta;
    case Family::Bernoulli: return expit(theta);
    case Family::Poisson: return std::exp(theta);
  }
  return theta;
}

double response_variance(const ChannelFamily& family, double theta) {
  switch (family.kind) {
    case Family::Gaussian: return family.variance;
    case Family::Bernoulli: {
      const double mu = expit(theta);
      return mu * (1.0 - mu);
    }
    case Family::Poisson: return std::exp(theta);
  }
  return 0.0;
}

double link_transform(Family family, double z) {
  switch (family) {
    case Family::Gaussian: return z;
    case Family::Bernoulli: return logit((z + 0.5) / 2.0);
    case Family::Poisson: return std::log(z + 0.5);
  }
  return z;
}

double link_transform_variance(Family family, double z) {
  switch (family) {
    case Family::Gaussian: return 1.0;
    case Family::Bernoulli: {
      const double q = (z + 0.5) / 2.0;
      return 1.0 / (q * (1.0 - q));
    }
    case Family::Poisson: return 1.0 / (z + 0.5);
  }
  return 1.0;
}

}  // namespace mrss
