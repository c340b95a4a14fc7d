#pragma once

// Synthetic three-channel benchmark: generator with ground truth, VAR(1) baselines and
// prediction-error metrics on the natural-parameter scale.

#include <cstdint>
#include <string>
#include <vector>

#include "mrss/estimator.hpp"
#include "mrss/model.hpp"
#include "mrss/params.hpp"

namespace mrss::sim {

struct SimConfig {
  int N = 40;
  int T_len = 30;
  double p_treat = 0.3;
  std::uint64_t seed = 1;
  double split = 5.0 / 6.0;
  bool x1_sd_convention = false;  // X1 ~ N(-5, 2): 2 is the variance unless set
  double count_offset = 0.5;      // log(Y2 + offset) in the VAR transform

  void validate() const;  // Validation naming the offending field
  int train_length() const;
};

struct SubjectTruth {
  std::vector<Vector> alpha;  // per time, 2 states
  std::vector<Vector> mu;     // per time, 3 natural parameters
  std::vector<double> a;
};

struct SimDataset {
  std::vector<SubjectData> subjects;
  std::vector<SubjectTruth> truth;
};

// True generator values.
inline constexpr double kTrueBeta1 = 1.0;
inline constexpr double kTrueBeta2 = 2.0;
inline constexpr double kTrueTrend = 0.03;
inline constexpr double kInitialState = 10.0;

SimDataset generate_dataset(const SimConfig& cfg);

// Layout with n_b treatment and n_v health states for channels Y1 (Bernoulli), Y2 (Poisson),
// Y3 (Gaussian), covariates X1, X2, t and treatment stream "a". The first treatment state loads
// on Y3 with fixed -1 and the first health state with fixed 1; further states are anchored on Y2.
MrssSpec simulation_spec(int n_b = 1, int n_v = 1);

// Generating parameters expressed in simulation_spec(1, 1).
ParameterSet true_parameters(const MrssSpec& spec);

// Candidate state dimensions for the AIC sweep (every layout with fewer states than channels).
std::vector<std::pair<int, int>> candidate_dimensions();

struct VarFit {
  Matrix A;        // p x (p + 1): lagged response coefficients, then the treatment coefficient
  Vector C;        // intercepts
  Matrix sigma_u;  // residual covariance
  bool rank_deficient = false;
};

// Y-tilde for the VAR baselines: (Y1, log(Y2 + offset), Y3), one row per time.
Matrix var_transform(const SubjectData& subj, double count_offset);

// Least squares of y_t on (1, y_{t-1}, a_t) for t = 1..rows-1. A singular design throws
// RankDeficient, or with min_norm takes the minimum-norm solution.
VarFit fit_var(const Matrix& y, const std::vector<double>& a, bool min_norm = false);
// Elementwise mean of coefficients over subjects.
VarFit pool_var(const std::vector<VarFit>& fits);
// One-step prediction of y_t from y_{t-1} and a_t.
Vector var_predict(const VarFit& fit, const Vector& y_prev, double a_t);

struct ClampCount {
  int clamped = 0;
};
// Natural-parameter version of a VAR prediction: logit(Y1) with clamping, log-scale Y2, Y3.
Vector var_to_natural(const Vector& pred, ClampCount& clamps);

struct PredictionErrors {
  Vector in_sample;   // per channel
  Vector out_sample;
};

// predictions[i] holds the prediction for time index i (i = 0 unused); in-sample averages
// i = 1..train-1, out-of-sample i = train..end.
PredictionErrors prediction_errors(const std::vector<Vector>& truth,
                                   const std::vector<Vector>& predictions, int train);

// Mean squared Pearson residual per channel over the given points.
Vector pearson_residual_mse(const std::vector<Vector>& z, const std::vector<Vector>& mean,
                            const std::vector<Vector>& variance);

struct ReplicationOptions {
  FitConfig fit;  // the importance-sampling seed is taken from the dataset seed
  std::vector<std::pair<int, int>> dims = {{1, 1}};  // state dimensions fitted on the full series
  bool prediction = true;  // fit on the training prefix and compare one-step predictions with VAR
};

struct CandidateFit {
  int n_b = 0;
  int n_v = 0;
  FitResult fit;
  double seconds = 0.0;  // wall time of the fit
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  std::vector<CandidateFit> candidates;
  FitResult prefix_fit;
  double prefix_seconds = 0.0;
  // Natural-parameter errors averaged over subjects.
  PredictionErrors mrss, individual_var, pooled_var;
  int var_rank_deficient = 0;  // subjects whose VAR used the minimum-norm solution
  int var_clamped = 0;         // clamped VAR probabilities
};

// One replication of the benchmark: generate, fit every candidate layout, and (optionally) the
// prefix fit with the VAR baselines and prediction errors.
ReplicationResult run_replication(const SimConfig& cfg, const ReplicationOptions& opts);

}  // namespace mrss::sim
