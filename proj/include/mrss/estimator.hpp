#pragma once

// Maximum-likelihood fitting by cyclic block coordinate ascent, the Gaussian starting point,
// AIC and likelihood-ratio tests.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrss/likelihood.hpp"
#include "mrss/optim.hpp"
#include "mrss/params.hpp"

namespace mrss {

struct InitConfig {
  int max_iter = 1000;   // 0 returns the heuristic seed
  int max_evals = 10000;
  int threads = 1;
};

// All channels treated as Gaussian on the link scale (binary z -> logit((z + 1/2) / 2), counts
// z -> log(z + 1/2)); the exact pooled Gaussian likelihood is maximized jointly over every
// block from heuristic_seed. Variances of non-Gaussian channels are reset to 1.
// Throws InitFailed when the optimizer cannot improve on the seed.
ParameterSet gaussian_init(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                           const InitConfig& config = {});

struct FitConfig {
  int rounds = 3;             // inner rounds of {lambda-beta, T, c, T} per outer iteration
  int max_outer = 100;
  double tol_rel = 1e-4;      // outer stop: change of the traced loglik <= tol_rel * |loglik|
  double tol_abs = 0.0;       // used instead of tol_rel when > 0
  int n_samples = 200;        // importance samples while optimizing
  int n_check = 1000;         // importance samples for the per-outer re-evaluation
  int n_final = 10000;        // importance samples for the reported loglik and AIC
  bool antithetic = true;
  std::uint64_t seed = 1;
  int threads = 1;
  int block_evals = 200;      // evaluation budget of one block maximization
  double block_f_tol = 1e-7;  // relative improvement that ends a block maximization
  bool extrapolate = true;    // line search along each outer iteration's total step
  InitConfig init;
  ModeOptions mode;
  std::optional<ParameterSet> start;  // skips gaussian_init
};

struct BlockStep {
  int outer = 0;
  Block block = Block::LambdaBeta;
  double before = 0.0;  // common-random-number objective at the block's start
  double after = 0.0;
  int evals = 0;
};

// Joint move psi <- psi + scale * (psi - psi_previous_outer) in block coordinates; scale 0 means
// no doubling from 1 up to 64 improved the objective.
struct ExtrapolationStep {
  int outer = 0;
  double scale = 0.0;
  double before = 0.0;
  double after = 0.0;
  int evals = 0;
};

struct FitResult {
  ParameterSet psi_hat;
  ParameterSet init;
  std::vector<double> loglik_trace;  // n_check-sample loglik at the start and after each outer iteration
  double loglik = 0.0;               // n_final-sample loglik at psi_hat
  double mc_se = 0.0;                // of loglik
  bool converged = false;
  int n_outer = 0;
  int n_params = 0;
  double aic = 0.0;
  std::uint64_t seed = 0;
  int n_final = 0;
  ParameterMask mask;
  std::vector<BlockStep> blocks;
  std::vector<ExtrapolationStep> extrapolations;
  std::vector<std::string> warnings;
};

// Non-convergence is reported through FitResult::converged; the caller decides.
FitResult cbcd_fit(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                   const FitConfig& config = {});

double aic(double loglik, int n_params);
double aic(const FitResult& fit);

struct LrtResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

// Throws NotNested when the nested fit's free parameters are not a subset of the full fit's.
LrtResult lrt(const FitResult& full, const FitResult& nested);
LrtResult lrt(double loglik_full, double loglik_nested, int df);

}  // namespace mrss
