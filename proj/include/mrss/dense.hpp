#pragma once

// Stacked ("matrix form") representation of a Gaussian state-space model. All of
// alpha_1..alpha_{m+1} and z_1..z_m are treated as one joint Gaussian vector. Cost is
// cubic in m*p, so this is meant for small instances and as a cross-check of the
// recursive filter and smoother.

#include "mrss/lgss.hpp"

namespace mrss {

struct StackedMoments {
  Vector state_mean;   // E(alpha*), (m+1) w
  Matrix state_cov;    // Var(alpha*)
  Matrix loading;      // Z* with a zero block column for alpha_{m+1}, (m p) x ((m+1) w)
  Vector obs_mean;     // mu* = Z* a* + d*
  Matrix obs_cov;      // Omega* = Z* V* Z*' + H*
  Matrix noise_cov;    // H*
  Vector offset;       // d*
};

StackedMoments stacked_moments(const GaussianSsm& model);

// log p(z_(m)) from the stacked Gaussian; missing entries are marginalized out.
double dense_joint_loglik(const GaussianSsm& model, const Panel& z);

struct DensePosterior {
  std::vector<Vector> mean;  // E(alpha_t | z), t = 1..m
  std::vector<Matrix> cov;   // Var(alpha_t | z)
  Matrix joint_cov;          // Var(alpha_1..alpha_m | z)

  Vector mean_stacked() const {
    Vector out(joint_cov.rows());
    Eigen::Index pos = 0;
    for (const auto& m : mean) {
      out.segment(pos, m.size()) = m;
      pos += m.size();
    }
    return out;
  }
};

// Block Gaussian conditioning of alpha_1..alpha_m on the observed entries of z.
DensePosterior dense_state_posterior(const GaussianSsm& model, const Panel& z);

}  // namespace mrss
