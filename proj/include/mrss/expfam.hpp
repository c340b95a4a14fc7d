#pragma once

// Exponential-family observation laws p(z | theta) on the natural-parameter (signal) scale.
// Links: identity (Gaussian), logit (Bernoulli), log (Poisson).

#include <string>
#include <string_view>

namespace mrss {

enum class Family { Gaussian, Bernoulli, Poisson };

struct ChannelFamily {
  Family kind = Family::Gaussian;
  double variance = 1.0;  // Gaussian only

  static ChannelFamily gaussian(double variance);
  static ChannelFamily bernoulli() { return {Family::Bernoulli, 1.0}; }
  static ChannelFamily poisson() { return {Family::Poisson, 1.0}; }
};

Family parse_family(std::string_view name);
std::string_view family_name(Family f);

// Throws UnsupportedValue if z is outside the support of the family.
void check_support(const ChannelFamily& family, double z);

double log_density(const ChannelFamily& family, double z, double theta);

struct SignalDerivs {
  double d1;
  double d2;
};

// First and second derivatives of log p(z | theta) with respect to theta.
SignalDerivs d1_d2(const ChannelFamily& family, double z, double theta);

// Mean and variance of z under the inverse link at theta.
double response_mean(Family family, double theta);
double response_variance(const ChannelFamily& family, double theta);

// Channelwise moment-matching transform onto the signal scale, used as a starting point.
double link_transform(Family family, double z);
// Rough variance of link_transform(z) around the true signal.
double link_transform_variance(Family family, double z);

double expit(double x);
double logit(double p);
// log(1 + exp(x)) without overflow.
double softplus(double x);

inline constexpr double kBernoulliClamp = 35.0;

}  // namespace mrss
