#pragma once

// Pooled log-likelihood of a set of subjects under a model specification: importance-sampling
// estimate with per-subject common random numbers, and the exact Gaussian version.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mrss/importance.hpp"
#include "mrss/model.hpp"
#include "mrss/params.hpp"

namespace mrss {

struct LikelihoodOptions {
  ISOptions is;
  ModeOptions mode;
  std::uint64_t seed = 1;
  int threads = 1;
  bool warm_start = true;  // start each mode search from the subject's previous mode
};

struct PooledValue {
  double loglik = 0.0;
  double mc_se = 0.0;  // delta-method Monte Carlo standard error from the per-subject ESS
  double min_ess = 0.0;
};

class PooledLikelihood {
 public:
  PooledLikelihood(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                   LikelihoodOptions opts);
  ~PooledLikelihood();
  PooledLikelihood(const PooledLikelihood&) = delete;
  PooledLikelihood& operator=(const PooledLikelihood&) = delete;

  // Importance-sampling estimate with the cached draws at opts.is.n_samples.
  double operator()(const ParameterSet& psi) { return evaluate(psi).loglik; }
  PooledValue evaluate(const ParameterSet& psi);
  // Same seeds, fresh draws at a different sample size (not cached).
  PooledValue evaluate_at(const ParameterSet& psi, int n_samples);

  int n_evaluations() const { return n_evaluations_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const MrssSpec& spec() const { return spec_; }

 private:
  struct SubjectState;
  PooledValue run(const ParameterSet& psi, int n_samples, bool cached);

  MrssSpec spec_;
  std::vector<SubjectData> subjects_;
  LikelihoodOptions opts_;
  std::vector<std::unique_ptr<SubjectState>> state_;
  std::vector<std::string> warnings_;
  bool warnings_collected_ = false;
  int n_evaluations_ = 0;
};

// Exact pooled Gaussian log-likelihood (every channel must be Gaussian in `spec`). Includes the
// q/2 log(kappa) term of the diffuse start per subject.
double gaussian_pooled_loglik(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                              const ParameterSet& psi, int threads = 1);

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first Error (by index) is rethrown
// with the subject id prefixed.
void parallel_for_subjects(const std::vector<SubjectData>& subjects, int threads,
                           const std::function<void(std::size_t)>& fn);

}  // namespace mrss
