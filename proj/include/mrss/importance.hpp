#pragma once

// Importance-sampling likelihood of a non-Gaussian state-space model around its
// mode-matched linear Gaussian approximation:
//   log L = log g(z) + log mean_j w_j,  w_j = p(z | theta_j) / g(z | theta_j),
// with theta_j drawn from the approximating posterior by the mean-correction simulation smoother.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mrss/lgss.hpp"
#include "mrss/mode.hpp"

namespace mrss {

struct ISOptions {
  int n_samples = 1000;         // total draws (antithetic pairs count twice)
  bool antithetic = true;
  double min_ess_fraction = 0.01;
};

struct ISEstimate {
  double log_g = 0.0;
  double log_wbar = 0.0;
  int n_samples = 0;
  double ess = 0.0;
  std::uint64_t seed = 0;

  double loglik() const { return log_g + log_wbar; }
};

// Standard normal inputs of the simulation smoother for n_sims unconditional paths, stored as
// consecutive column-major blocks: initial state (w x n_sims), then per t the observation
// noise (p x n_sims) and the state noise (w x n_sims).
struct StandardNormals {
  int n_sims = 0;
  int m = 0;
  int p = 0;
  int w = 0;
  std::vector<double> data;

  using Block = Eigen::Map<const Matrix>;
  Block initial() const { return Block(data.data(), w, n_sims); }
  Block obs_noise(int t) const { return Block(data.data() + offset(t), p, n_sims); }
  Block state_noise(int t) const {
    return Block(data.data() + offset(t) + static_cast<std::size_t>(p) * n_sims, w, n_sims);
  }

 private:
  std::size_t offset(int t) const {
    return static_cast<std::size_t>(n_sims) * (w + static_cast<std::size_t>(t) * (p + w));
  }
};

StandardNormals draw_normals(std::uint64_t seed, int n_sims, int m, int p, int w);

// Deterministic per-subject stream seed.
std::uint64_t subject_seed(std::uint64_t seed, std::string_view subject_id);

// Deviations alpha_draw - alpha_hat for every path: result[t] is w x n_sims.
std::vector<Matrix> simulation_deviations(const GaussianSsm& model, const FilterOutput& filt,
                                          const StandardNormals& normals);

// One exact draw from the Gaussian posterior of the states given pseudo_z.
std::vector<Vector> simulation_smoother(const LinearizedModel& lin, std::mt19937_64& rng);

// Uses the filter/smoother stored in `mode` (the linearized model at convergence).
ISEstimate is_loglik(const NonGaussianSsm& spec, const Panel& z, const ModeResult& mode,
                     const StandardNormals& normals, const ISOptions& opts = {});

ISEstimate is_loglik(const NonGaussianSsm& spec, const Panel& z, const ModeResult& mode,
                     std::uint64_t seed, const ISOptions& opts = {});

// Number of unconditional paths needed for opts.n_samples draws.
int n_paths(const ISOptions& opts);

struct SubjectModel {
  std::string id;
  NonGaussianSsm model;
  Panel z;
};

// Sum of per-subject IS log-likelihoods with streams seeded from (seed, subject id).
// Subjects are evaluated on up to `threads` workers; the sum is compensated.
double pooled_is_loglik(const std::vector<SubjectModel>& subjects, std::uint64_t seed,
                        const ISOptions& opts = {}, const ModeOptions& mode_opts = {},
                        int threads = 1);

// Neumaier-compensated sum.
double compensated_sum(const std::vector<double>& values);

}  // namespace mrss
