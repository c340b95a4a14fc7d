#pragma once

// Time-varying linear Gaussian state-space models:
//
//   z_t     = Z_t alpha_t + d_t + eps_t,     eps_t ~ N(0, H_t)
//   alpha_{t+1} = T_t alpha_t + c_t + eta_t, eta_t ~ N(0, Q_t)
//   alpha_1 ~ N(a1, P1 + kappa * P1_diffuse)
//
// Missing observations are NaN entries of the panel (or flagged in `missing`);
// they are removed row-wise from Z_t, d_t and H_t at that time point.

#include <Eigen/Dense>
#include <vector>

namespace mrss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Panel = std::vector<Vector>;

struct Transition {
  Matrix T;
  Vector c;
  Matrix Q;
};

inline constexpr double kDefaultKappa = 1e7;

struct GaussianSsm {
  std::vector<Matrix> loading;          // Z_t, p x w
  std::vector<Vector> offset;           // d_t, p
  std::vector<Matrix> obs_cov;          // H_t, p x p
  std::vector<std::vector<char>> missing;  // optional structural mask, empty = none
  std::vector<Transition> transition;   // step t -> t+1, size m
  Vector a1;
  Matrix P1;
  Matrix P1_diffuse;                    // P_inf; empty or zero = no diffuse elements
  double kappa = kDefaultKappa;

  int n_time() const { return static_cast<int>(loading.size()); }
  int n_obs() const { return loading.empty() ? 0 : static_cast<int>(loading.front().rows()); }
  int n_state() const { return static_cast<int>(a1.size()); }

  // Rank of the diffuse block P_inf.
  int diffuse_rank() const;
  // P1 + kappa * P_inf.
  Matrix initial_cov() const;

  bool is_missing(int t, int k, const Panel& z) const;
  // Observed channel indices at time t.
  std::vector<int> observed(int t, const Panel& z) const;

  // Throws DimensionMismatch / Validation on inconsistent shapes or non-PSD covariances.
  void validate() const;

  static GaussianSsm time_invariant(int m, const Matrix& Z, const Vector& d, const Matrix& H,
                                    const Matrix& T, const Vector& c, const Matrix& Q,
                                    const Vector& a1, const Matrix& P1);
};

struct FilterOutput {
  std::vector<std::vector<int>> obs_index;  // observed channels per t
  std::vector<Vector> v;                    // innovations (observed rows only)
  std::vector<Matrix> F;                    // innovation covariance
  std::vector<Matrix> F_inv;
  std::vector<Matrix> K;                    // T_t P_t Z_t' F_t^{-1}, w x p_t
  std::vector<Matrix> gain;                 // P_t Z_t' F_t^{-1}
  std::vector<Vector> a;                    // predicted mean, size m + 1
  std::vector<Matrix> P;                    // predicted covariance, size m + 1
  std::vector<Vector> a_filt;
  std::vector<Matrix> P_filt;
  double loglik = 0.0;
};

struct SmootherOutput {
  std::vector<Vector> alpha_hat;
  std::vector<Matrix> V;
  std::vector<Vector> r;  // r[t] holds r_{t}, t = 0..m, r[m] = 0
  std::vector<Matrix> N;
};

FilterOutput kalman_filter(const GaussianSsm& model, const Panel& z);

// Log-likelihood only; avoids storing the per-time output.
double kalman_loglik(const GaussianSsm& model, const Panel& z);

SmootherOutput kalman_smoother(const GaussianSsm& model, const FilterOutput& filt);

// Big-kappa diffuse log-likelihood: log L(kappa) + q/2 log(kappa), q = rank(P_inf).
double diffuse_loglik(const GaussianSsm& model, const Panel& z, double kappa);

Transition gap_transition(const Matrix& T, const Vector& c, const Matrix& Q, int tau);

// Smoothed signal Z_t alpha_hat_t + d_t for every channel (including missing ones).
std::vector<Vector> smoothed_signal(const GaussianSsm& model, const SmootherOutput& smooth);

// Lower-triangular-like square root S with S S' = A for a symmetric PSD matrix.
Matrix psd_sqrt(const Matrix& A);

}  // namespace mrss
