#pragma once

// Posterior-mode (Laplace) approximation of a state-space model with exponential-family
// observations by an approximating linear Gaussian model that shares the conditional mode
// of the signal theta_t = Z_t alpha_t + d_t.

#include <vector>

#include "mrss/expfam.hpp"
#include "mrss/lgss.hpp"

namespace mrss {

// State equation and loadings come from `base`; base.obs_cov is used only on Gaussian
// channels (it must not couple Gaussian with non-Gaussian channels).
struct NonGaussianSsm {
  GaussianSsm base;
  std::vector<ChannelFamily> families;

  bool all_gaussian() const;
  void validate(const Panel& z) const;
};

struct LinearizedModel {
  GaussianSsm model;                // base with offsets/loadings and pseudo_H as obs_cov
  Panel pseudo_z;                   // theta_dagger (z itself on Gaussian channels)
  std::vector<Vector> pseudo_var;   // diagonal of A (H diagonal on Gaussian channels)
  std::vector<Vector> theta_hat;    // linearization point / converged signal
};

struct ModeOptions {
  double tol = 1e-8;
  int max_iter = 50;
  int max_halvings = 5;
  double diverged_tol = 1e-4;
};

struct ModeResult {
  LinearizedModel lin;
  FilterOutput filt;
  SmootherOutput smooth;
  int iterations = 0;
  double last_step = 0.0;
  std::vector<double> step_history;  // sup-norm signal change per iteration
};

// Linearize at a given signal: theta_dagger = theta + A d1, A = -1/d2 on non-Gaussian channels.
LinearizedModel linearize(const NonGaussianSsm& spec, const Panel& z,
                          const std::vector<Vector>& theta);

// Starting signal: transformed data smoothed once with a Gaussian model.
std::vector<Vector> initial_signal(const NonGaussianSsm& spec, const Panel& z);

ModeResult find_mode(const NonGaussianSsm& spec, const Panel& z, const ModeOptions& opts = {});

// Same iteration from a supplied starting signal.
ModeResult find_mode_from(const NonGaussianSsm& spec, const Panel& z,
                          std::vector<Vector> theta0, const ModeOptions& opts = {});

// log p(z | theta(alpha)) + log p(alpha) up to a constant, the objective the mode maximizes.
// Degenerate state covariances contribute only on their range.
double log_joint_objective(const NonGaussianSsm& spec, const Panel& z,
                           const std::vector<Vector>& alpha);

// Observation log-density of the observed entries at signal theta.
double log_obs_density(const NonGaussianSsm& spec, const Panel& z,
                       const std::vector<Vector>& theta);

}  // namespace mrss
