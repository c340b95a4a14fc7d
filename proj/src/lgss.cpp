#include "mrss/lgss.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mrss/error.hpp"

namespace mrss {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
constexpr double kPivotTol = 1e-12;

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

void check_psd(const Matrix& A, const char* name) {
  require(A.rows() == A.cols(), ErrorCode::DimensionMismatch, std::string(name) + " is not square");
  if (A.size() == 0) return;
  require((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + A.cwiseAbs().maxCoeff()),
          ErrorCode::Validation, std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  const double spectral = es.eigenvalues().cwiseAbs().maxCoeff();
  require(es.eigenvalues().minCoeff() >= -1e-10 * spectral, ErrorCode::Validation,
          std::string(name) + " is not positive semi-definite");
}

void symmetrize(Matrix& A) { A = 0.5 * (A + A.transpose()).eval(); }

// Innovation covariance factorization with the pivot check.
struct Innovation {
  Matrix F_inv;
  double log_det = 0.0;
};

Innovation factor_innovation(const Matrix& F, int t) {
  Eigen::LLT<Matrix> llt(F);
  const double scale = std::max(1.0, F.diagonal().cwiseAbs().maxCoeff());
  bool ok = llt.info() == Eigen::Success;
  Innovation out;
  if (ok) {
    const Matrix L = llt.matrixL();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      const double pivot = L(i, i) * L(i, i);
      if (!(pivot > kPivotTol * scale)) ok = false;
      out.log_det += std::log(pivot);
    }
  }
  if (!ok) {
    throw Error(ErrorCode::NonPsdInnovation,
                "innovation covariance F is not positive definite at t=" + std::to_string(t + 1));
  }
  out.F_inv = llt.solve(Matrix::Identity(F.rows(), F.cols()));
  symmetrize(out.F_inv);
  return out;
}

Matrix select_rows(const Matrix& A, const std::vector<int>& idx) {
  Matrix out(idx.size(), A.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = A.row(idx[i]);
  return out;
}

Vector select(const Vector& a, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = a(idx[i]);
  return out;
}

Matrix select_block(const Matrix& A, const std::vector<int>& idx) {
  Matrix out(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = A(idx[i], idx[j]);
  return out;
}

void check_panel(const GaussianSsm& model, const Panel& z) {
  require(static_cast<int>(z.size()) == model.n_time(), ErrorCode::DimensionMismatch,
          "panel has " + std::to_string(z.size()) + " time points, model has " +
              std::to_string(model.n_time()));
  for (const auto& zt : z) {
    require(zt.size() == model.n_obs(), ErrorCode::DimensionMismatch,
            "observation vector has wrong length");
  }
}

}  // namespace

int GaussianSsm::diffuse_rank() const {
  if (P1_diffuse.size() == 0) return 0;
  Eigen::FullPivLU<Matrix> lu(P1_diffuse);
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.rank());
}

Matrix GaussianSsm::initial_cov() const {
  if (P1_diffuse.size() == 0) return P1;
  return P1 + kappa * P1_diffuse;
}

bool GaussianSsm::is_missing(int t, int k, const Panel& z) const {
  if (!missing.empty() && missing[t][k]) return true;
  return std::isnan(z[t](k));
}

std::vector<int> GaussianSsm::observed(int t, const Panel& z) const {
  std::vector<int> idx;
  idx.reserve(n_obs());
  for (int k = 0; k < n_obs(); ++k)
    if (!is_missing(t, k, z)) idx.push_back(k);
  return idx;
}

void GaussianSsm::validate() const {
  const int m = n_time();
  const int p = n_obs();
  const int w = n_state();
  require(static_cast<int>(offset.size()) == m && static_cast<int>(obs_cov.size()) == m &&
              static_cast<int>(transition.size()) == m,
          ErrorCode::DimensionMismatch, "per-time arrays have inconsistent lengths");
  require(missing.empty() || static_cast<int>(missing.size()) == m, ErrorCode::DimensionMismatch,
          "missing mask length");
  require(P1.rows() == w && P1.cols() == w, ErrorCode::DimensionMismatch, "P1 shape");
  check_psd(P1, "P1");
  if (P1_diffuse.size() != 0) {
    require(P1_diffuse.rows() == w && P1_diffuse.cols() == w, ErrorCode::DimensionMismatch,
            "P_inf shape");
    check_psd(P1_diffuse, "P_inf");
  }
  for (int t = 0; t < m; ++t) {
    require(loading[t].rows() == p && loading[t].cols() == w, ErrorCode::DimensionMismatch,
            "loading shape at t=" + std::to_string(t + 1));
    require(offset[t].size() == p, ErrorCode::DimensionMismatch, "offset length");
    require(obs_cov[t].rows() == p && obs_cov[t].cols() == p, ErrorCode::DimensionMismatch,
            "H shape");
    check_psd(obs_cov[t], "H");
    const auto& tr = transition[t];
    require(tr.T.rows() == w && tr.T.cols() == w && tr.c.size() == w && tr.Q.rows() == w &&
                tr.Q.cols() == w,
            ErrorCode::DimensionMismatch, "transition shape");
    check_psd(tr.Q, "Q");
    if (!missing.empty())
      require(static_cast<int>(missing[t].size()) == p, ErrorCode::DimensionMismatch,
              "missing mask width");
  }
}

GaussianSsm GaussianSsm::time_invariant(int m, const Matrix& Z, const Vector& d, const Matrix& H,
                                        const Matrix& T, const Vector& c, const Matrix& Q,
                                        const Vector& a1, const Matrix& P1) {
  GaussianSsm model;
  model.loading.assign(m, Z);
  model.offset.assign(m, d);
  model.obs_cov.assign(m, H);
  model.transition.assign(m, Transition{T, c, Q});
  model.a1 = a1;
  model.P1 = P1;
  return model;
}

namespace {

// Measurement update at one time point. While the predicted covariance dominates the
// observation noise (the diffuse start), the information form keeps P_filt and F^{-1} accurate.
struct Update {
  Vector v;
  Matrix F;
  Matrix F_inv;
  Matrix gain;  // P Z' F^{-1}
  Vector a_filt;
  Matrix P_filt;
  double loglik = 0.0;
};

constexpr double kInformationSwitch = 1e3;

bool information_update(const Matrix& Zt, const Matrix& Ht, const Vector& a, const Matrix& P,
                        Update& u) {
  Eigen::LLT<Matrix> h_llt(Ht);
  Eigen::LLT<Matrix> p_llt(P);
  if (h_llt.info() != Eigen::Success || p_llt.info() != Eigen::Success) return false;
  const Matrix Lh = h_llt.matrixL();
  const Matrix Lp = p_llt.matrixL();
  const double h_scale = Ht.diagonal().maxCoeff();
  const double p_scale = P.diagonal().maxCoeff();
  double log_det_h = 0.0, log_det_p = 0.0;
  for (Eigen::Index i = 0; i < Lh.rows(); ++i) {
    if (!(Lh(i, i) * Lh(i, i) > kPivotTol * h_scale)) return false;
    log_det_h += 2.0 * std::log(Lh(i, i));
  }
  for (Eigen::Index i = 0; i < Lp.rows(); ++i) {
    if (!(Lp(i, i) * Lp(i, i) > kPivotTol * p_scale)) return false;
    log_det_p += 2.0 * std::log(Lp(i, i));
  }
  const Matrix H_inv = h_llt.solve(Matrix::Identity(Ht.rows(), Ht.cols()));
  const Matrix P_inv = p_llt.solve(Matrix::Identity(P.rows(), P.cols()));
  const Matrix ZtHinv = Zt.transpose() * H_inv;
  Matrix info = P_inv + ZtHinv * Zt;
  symmetrize(info);
  Eigen::LLT<Matrix> i_llt(info);
  if (i_llt.info() != Eigen::Success) return false;
  const Matrix Li = i_llt.matrixL();
  double log_det_i = 0.0;
  for (Eigen::Index i = 0; i < Li.rows(); ++i) log_det_i += 2.0 * std::log(Li(i, i));
  u.P_filt = i_llt.solve(Matrix::Identity(P.rows(), P.cols()));
  symmetrize(u.P_filt);
  u.gain = u.P_filt * ZtHinv;
  u.F_inv = H_inv - ZtHinv.transpose() * u.gain;
  symmetrize(u.F_inv);
  u.a_filt = a + u.gain * u.v;
  const double log_det_f = log_det_h + log_det_p + log_det_i;
  u.loglik = -0.5 * (static_cast<double>(Zt.rows()) * kLog2Pi + log_det_f + u.v.dot(u.F_inv * u.v));
  return true;
}

Update measurement_update(const GaussianSsm& model, const Panel& z, int t,
                          const std::vector<int>& idx, const Vector& a, const Matrix& P) {
  Update u;
  const Matrix Zt = select_rows(model.loading[t], idx);
  const Matrix Ht = select_block(model.obs_cov[t], idx);
  u.v = select(z[t], idx) - Zt * a - select(model.offset[t], idx);
  const Matrix PZt = P * Zt.transpose();
  u.F = Zt * PZt + Ht;
  symmetrize(u.F);
  const double signal = (Zt * PZt).diagonal().maxCoeff();
  if (signal > kInformationSwitch * std::max(Ht.diagonal().maxCoeff(), 1e-300) &&
      information_update(Zt, Ht, a, P, u))
    return u;
  Innovation inn = factor_innovation(u.F, t);
  u.gain = PZt * inn.F_inv;
  u.a_filt = a + u.gain * u.v;
  u.P_filt = P - u.gain * PZt.transpose();
  symmetrize(u.P_filt);
  u.loglik = -0.5 * (static_cast<double>(idx.size()) * kLog2Pi + inn.log_det +
                     u.v.dot(inn.F_inv * u.v));
  u.F_inv = std::move(inn.F_inv);
  return u;
}

}  // namespace

FilterOutput kalman_filter(const GaussianSsm& model, const Panel& z) {
  check_panel(model, z);
  const int m = model.n_time();
  const int w = model.n_state();
  FilterOutput out;
  out.obs_index.resize(m);
  out.v.resize(m);
  out.F.resize(m);
  out.F_inv.resize(m);
  out.K.resize(m);
  out.gain.resize(m);
  out.a.resize(m + 1);
  out.P.resize(m + 1);
  out.a_filt.resize(m);
  out.P_filt.resize(m);

  Vector a = model.a1;
  Matrix P = model.initial_cov();
  for (int t = 0; t < m; ++t) {
    out.a[t] = a;
    out.P[t] = P;
    const auto idx = model.observed(t, z);
    out.obs_index[t] = idx;
    const auto& tr = model.transition[t];
    if (idx.empty()) {
      out.v[t].resize(0);
      out.F[t].resize(0, 0);
      out.F_inv[t].resize(0, 0);
      out.K[t].resize(w, 0);
      out.gain[t].resize(w, 0);
      out.a_filt[t] = a;
      out.P_filt[t] = P;
    } else {
      Update u = measurement_update(model, z, t, idx, a, P);
      out.loglik += u.loglik;
      out.K[t] = tr.T * u.gain;
      out.gain[t] = std::move(u.gain);
      out.v[t] = std::move(u.v);
      out.F[t] = std::move(u.F);
      out.F_inv[t] = std::move(u.F_inv);
      out.a_filt[t] = std::move(u.a_filt);
      out.P_filt[t] = std::move(u.P_filt);
    }
    a = tr.T * out.a_filt[t] + tr.c;
    P = tr.T * out.P_filt[t] * tr.T.transpose() + tr.Q;
    symmetrize(P);
  }
  out.a[m] = a;
  out.P[m] = P;
  return out;
}

double kalman_loglik(const GaussianSsm& model, const Panel& z) {
  check_panel(model, z);
  const int m = model.n_time();
  Vector a = model.a1;
  Matrix P = model.initial_cov();
  double loglik = 0.0;
  for (int t = 0; t < m; ++t) {
    const auto idx = model.observed(t, z);
    const auto& tr = model.transition[t];
    if (!idx.empty()) {
      Update u = measurement_update(model, z, t, idx, a, P);
      loglik += u.loglik;
      a = std::move(u.a_filt);
      P = std::move(u.P_filt);
    }
    a = tr.T * a + tr.c;
    P = tr.T * P * tr.T.transpose() + tr.Q;
    symmetrize(P);
  }
  return loglik;
}

SmootherOutput kalman_smoother(const GaussianSsm& model, const FilterOutput& filt) {
  const int m = model.n_time();
  const int w = model.n_state();
  SmootherOutput out;
  out.alpha_hat.resize(m);
  out.V.resize(m);
  out.r.assign(m + 1, Vector::Zero(w));
  out.N.assign(m + 1, Matrix::Zero(w, w));
  // 0-based: r[t] is the accumulator used by alpha_hat[t] (r_{t-1} in 1-based notation);
  // the backward pass starts from r[m] = 0, N[m] = 0.
  for (int t = m - 1; t >= 0; --t) {
    const auto& tr = model.transition[t];
    const auto& idx = filt.obs_index[t];
    Vector r_prev;
    Matrix N_prev;
    if (idx.empty()) {
      r_prev = tr.T.transpose() * out.r[t + 1];
      N_prev = tr.T.transpose() * out.N[t + 1] * tr.T;
    } else {
      const Matrix Zt = select_rows(model.loading[t], idx);
      const Matrix L = tr.T - filt.K[t] * Zt;
      const Matrix ZtFinv = Zt.transpose() * filt.F_inv[t];
      r_prev = ZtFinv * filt.v[t] + L.transpose() * out.r[t + 1];
      N_prev = ZtFinv * Zt + L.transpose() * out.N[t + 1] * L;
    }
    symmetrize(N_prev);
    // Equivalent to a + P r_prev and P - P N_prev P, written with the filtered moments so the
    // diffuse-scale P never multiplies the backward accumulators.
    const Matrix PfT = filt.P_filt[t] * tr.T.transpose();
    out.alpha_hat[t] = filt.a_filt[t] + PfT * out.r[t + 1];
    out.V[t] = filt.P_filt[t] - PfT * out.N[t + 1] * PfT.transpose();
    symmetrize(out.V[t]);
    out.r[t] = std::move(r_prev);
    out.N[t] = std::move(N_prev);
  }
  return out;
}

double diffuse_loglik(const GaussianSsm& model, const Panel& z, double kappa) {
  GaussianSsm copy = model;
  copy.kappa = kappa;
  const int q = copy.diffuse_rank();
  return kalman_loglik(copy, z) + 0.5 * q * std::log(kappa);
}

Transition gap_transition(const Matrix& T, const Vector& c, const Matrix& Q, int tau) {
  if (tau < 0) throw Error(ErrorCode::Validation, "gap length must be non-negative");
  Transition out{T, c, Q};
  Matrix Tk = Matrix::Identity(T.rows(), T.cols());
  Vector c_sum = c;
  Matrix Q_sum = Q;
  for (int k = 1; k <= tau; ++k) {
    Tk = (Tk * T).eval();
    c_sum += Tk * c;
    Q_sum += Tk * Q * Tk.transpose();
  }
  out.T = Tk * T;
  out.c = c_sum;
  out.Q = 0.5 * (Q_sum + Q_sum.transpose());
  return out;
}

std::vector<Vector> smoothed_signal(const GaussianSsm& model, const SmootherOutput& smooth) {
  std::vector<Vector> out(model.n_time());
  for (int t = 0; t < model.n_time(); ++t)
    out[t] = model.loading[t] * smooth.alpha_hat[t] + model.offset[t];
  return out;
}

Matrix psd_sqrt(const Matrix& A) {
  if (A.size() == 0) return A;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() == Eigen::Success) {
    Matrix L = llt.matrixL();
    if ((L.diagonal().array() > 0).all() && std::isfinite(L.sum())) return L;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (A + A.transpose()));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

}  // namespace mrss
