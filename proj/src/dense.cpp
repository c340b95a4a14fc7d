#include "mrss/dense.hpp"

#include <cmath>

#include "mrss/error.hpp"

namespace mrss {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::vector<int> stacked_observed(const GaussianSsm& model, const Panel& z) {
  std::vector<int> idx;
  const int p = model.n_obs();
  for (int t = 0; t < model.n_time(); ++t)
    for (int k : model.observed(t, z)) idx.push_back(t * p + k);
  return idx;
}

}  // namespace

StackedMoments stacked_moments(const GaussianSsm& model) {
  const int m = model.n_time();
  const int p = model.n_obs();
  const int w = model.n_state();
  const int nb = m + 1;

  // T*: block (i, j) = T_{i-1} ... T_j for i > j, identity on the diagonal.
  Matrix Tstar = Matrix::Zero(nb * w, nb * w);
  for (int j = 0; j < nb; ++j) {
    Matrix prod = Matrix::Identity(w, w);
    Tstar.block(j * w, j * w, w, w) = prod;
    for (int i = j + 1; i < nb; ++i) {
      prod = (model.transition[i - 1].T * prod).eval();
      Tstar.block(i * w, j * w, w, w) = prod;
    }
  }

  Vector a1star = Vector::Zero(nb * w);
  Vector cstar = Vector::Zero(nb * w);
  Matrix init_plus_noise = Matrix::Zero(nb * w, nb * w);  // P1* + R* Q* R*'
  a1star.head(w) = model.a1;
  init_plus_noise.topLeftCorner(w, w) = model.initial_cov();
  for (int i = 1; i < nb; ++i) {
    cstar.segment(i * w, w) = model.transition[i - 1].c;
    init_plus_noise.block(i * w, i * w, w, w) = model.transition[i - 1].Q;
  }

  StackedMoments out;
  out.state_mean = Tstar * (a1star + cstar);
  out.state_cov = Tstar * init_plus_noise * Tstar.transpose();
  out.state_cov = 0.5 * (out.state_cov + out.state_cov.transpose()).eval();

  out.loading = Matrix::Zero(m * p, nb * w);
  out.offset = Vector::Zero(m * p);
  out.noise_cov = Matrix::Zero(m * p, m * p);
  for (int t = 0; t < m; ++t) {
    out.loading.block(t * p, t * w, p, w) = model.loading[t];
    out.offset.segment(t * p, p) = model.offset[t];
    out.noise_cov.block(t * p, t * p, p, p) = model.obs_cov[t];
  }
  out.obs_mean = out.loading * out.state_mean + out.offset;
  out.obs_cov = out.loading * out.state_cov * out.loading.transpose() + out.noise_cov;
  out.obs_cov = 0.5 * (out.obs_cov + out.obs_cov.transpose()).eval();
  return out;
}

double dense_joint_loglik(const GaussianSsm& model, const Panel& z) {
  const StackedMoments mom = stacked_moments(model);
  const auto idx = stacked_observed(model, z);
  const int n = static_cast<int>(idx.size());
  if (n == 0) return 0.0;
  const int p = model.n_obs();
  Vector resid(n);
  Matrix omega(n, n);
  for (int i = 0; i < n; ++i) {
    resid(i) = z[idx[i] / p](idx[i] % p) - mom.obs_mean(idx[i]);
    for (int j = 0; j < n; ++j) omega(i, j) = mom.obs_cov(idx[i], idx[j]);
  }
  Eigen::LDLT<Matrix> ldlt(omega);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-13 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
    throw Error(ErrorCode::SingularJointCovariance, "joint observation covariance is singular");
  }
  const double log_det = ldlt.vectorD().array().log().sum();
  return -0.5 * (n * kLog2Pi + log_det + resid.dot(ldlt.solve(resid)));
}

DensePosterior dense_state_posterior(const GaussianSsm& model, const Panel& z) {
  const StackedMoments mom = stacked_moments(model);
  const auto idx = stacked_observed(model, z);
  const int m = model.n_time();
  const int p = model.n_obs();
  const int w = model.n_state();
  const int n = static_cast<int>(idx.size());

  Matrix cross(m * w, n);  // Cov(alpha_{1..m}, z_obs) = V* Z*'
  const Matrix VZ = mom.state_cov.topRows(m * w) * mom.loading.transpose();
  Vector resid(n);
  Matrix omega(n, n);
  for (int i = 0; i < n; ++i) {
    cross.col(i) = VZ.col(idx[i]);
    resid(i) = z[idx[i] / p](idx[i] % p) - mom.obs_mean(idx[i]);
    for (int j = 0; j < n; ++j) omega(i, j) = mom.obs_cov(idx[i], idx[j]);
  }
  Vector mean = mom.state_mean.head(m * w);
  Matrix cov = mom.state_cov.topLeftCorner(m * w, m * w);
  if (n > 0) {
    Eigen::LDLT<Matrix> ldlt(omega);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorCode::SingularJointCovariance, "joint observation covariance is singular");
    }
    mean += cross * ldlt.solve(resid);
    cov -= cross * ldlt.solve(cross.transpose());
  }
  DensePosterior out;
  out.joint_cov = 0.5 * (cov + cov.transpose());
  out.mean.resize(m);
  out.cov.resize(m);
  for (int t = 0; t < m; ++t) {
    out.mean[t] = mean.segment(t * w, w);
    out.cov[t] = out.joint_cov.block(t * w, t * w, w, w);
  }
  return out;
}

}  // namespace mrss
