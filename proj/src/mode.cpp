#include "mrss/mode.hpp"

#include <cmath>
#include <limits>

#include "mrss/error.hpp"

namespace mrss {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::vector<Vector> signal_of(const GaussianSsm& model, const std::vector<Vector>& alpha) {
  std::vector<Vector> theta(model.n_time());
  for (int t = 0; t < model.n_time(); ++t)
    theta[t] = model.loading[t] * alpha[t] + model.offset[t];
  return theta;
}

double sup_diff(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double out = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (a[t].size() > 0) out = std::max(out, (a[t] - b[t]).cwiseAbs().maxCoeff());
  return out;
}

// Whitening factor W with x' S^+ x = |W x|^2 on the range of S; also the log pseudo-determinant.
struct Whitener {
  Matrix W;
  double log_pdet = 0.0;
  int rank = 0;
};

Whitener make_whitener(const Matrix& S) {
  Whitener out;
  if (S.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  const double cutoff = 1e-12 * std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > cutoff) keep.push_back(static_cast<int>(i));
  out.rank = static_cast<int>(keep.size());
  out.W.resize(out.rank, S.rows());
  for (int r = 0; r < out.rank; ++r) {
    const double lambda = es.eigenvalues()(keep[r]);
    out.W.row(r) = es.eigenvectors().col(keep[r]).transpose() / std::sqrt(lambda);
    out.log_pdet += std::log(lambda);
  }
  return out;
}

struct StatePrior {
  Whitener initial;
  std::vector<Whitener> steps;  // step t -> t+1
};

StatePrior make_prior(const GaussianSsm& model) {
  StatePrior prior;
  prior.initial = make_whitener(model.initial_cov());
  prior.steps.reserve(model.n_time());
  for (int t = 0; t + 1 < model.n_time(); ++t)
    prior.steps.push_back(make_whitener(model.transition[t].Q));
  return prior;
}

double log_prior(const GaussianSsm& model, const StatePrior& prior,
                 const std::vector<Vector>& alpha) {
  double out = -0.5 * (prior.initial.W * (alpha[0] - model.a1)).squaredNorm();
  for (int t = 0; t + 1 < model.n_time(); ++t) {
    const auto& tr = model.transition[t];
    const Vector innov = alpha[t + 1] - tr.T * alpha[t] - tr.c;
    out -= 0.5 * (prior.steps[t].W * innov).squaredNorm();
  }
  return out;
}

}  // namespace

bool NonGaussianSsm::all_gaussian() const {
  for (const auto& f : families)
    if (f.kind != Family::Gaussian) return false;
  return true;
}

void NonGaussianSsm::validate(const Panel& z) const {
  base.validate();
  if (static_cast<int>(families.size()) != base.n_obs())
    throw Error(ErrorCode::DimensionMismatch, "one family per channel required");
  if (static_cast<int>(z.size()) != base.n_time())
    throw Error(ErrorCode::DimensionMismatch, "panel length does not match model");
  for (int t = 0; t < base.n_time(); ++t) {
    for (int k : base.observed(t, z)) check_support(families[k], z[t](k));
    for (int i = 0; i < base.n_obs(); ++i)
      for (int j = 0; j < base.n_obs(); ++j)
        if (i != j && families[i].kind == Family::Gaussian &&
            families[j].kind != Family::Gaussian && base.obs_cov[t](i, j) != 0.0)
          throw Error(ErrorCode::Validation,
                      "H couples a Gaussian channel with a non-Gaussian channel");
  }
}

double log_obs_density(const NonGaussianSsm& spec, const Panel& z,
                       const std::vector<Vector>& theta) {
  double out = 0.0;
  std::vector<int> gauss;
  for (int t = 0; t < spec.base.n_time(); ++t) {
    gauss.clear();
    for (int k : spec.base.observed(t, z)) {
      if (spec.families[k].kind == Family::Gaussian)
        gauss.push_back(k);
      else
        out += log_density(spec.families[k], z[t](k), theta[t](k));
    }
    if (gauss.empty()) continue;
    const int n = static_cast<int>(gauss.size());
    Matrix H(n, n);
    Vector r(n);
    for (int i = 0; i < n; ++i) {
      r(i) = z[t](gauss[i]) - theta[t](gauss[i]);
      for (int j = 0; j < n; ++j) H(i, j) = spec.base.obs_cov[t](gauss[i], gauss[j]);
    }
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::Validation, "Gaussian observation covariance is not positive definite");
    const Matrix L = llt.matrixL();
    out -= 0.5 * (n * kLog2Pi + 2.0 * L.diagonal().array().log().sum() + r.dot(llt.solve(r)));
  }
  return out;
}

double log_joint_objective(const NonGaussianSsm& spec, const Panel& z,
                           const std::vector<Vector>& alpha) {
  const StatePrior prior = make_prior(spec.base);
  return log_obs_density(spec, z, signal_of(spec.base, alpha)) +
         log_prior(spec.base, prior, alpha);
}

LinearizedModel linearize(const NonGaussianSsm& spec, const Panel& z,
                          const std::vector<Vector>& theta) {
  const int m = spec.base.n_time();
  const int p = spec.base.n_obs();
  LinearizedModel lin;
  lin.model = spec.base;
  lin.pseudo_z.resize(m);
  lin.pseudo_var.resize(m);
  lin.theta_hat = theta;
  for (int t = 0; t < m; ++t) {
    Vector& pz = lin.pseudo_z[t];
    Vector& pv = lin.pseudo_var[t];
    Matrix& H = lin.model.obs_cov[t];
    pz = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
    pv = H.diagonal();
    for (int k = 0; k < p; ++k) {
      if (spec.families[k].kind == Family::Gaussian) {
        if (!spec.base.is_missing(t, k, z)) pz(k) = z[t](k);
        continue;
      }
      H.row(k).setZero();
      H.col(k).setZero();
      double var = 1.0;
      if (!spec.base.is_missing(t, k, z)) {
        const SignalDerivs g = d1_d2(spec.families[k], z[t](k), theta[t](k));
        var = -1.0 / g.d2;
        pz(k) = theta[t](k) + var * g.d1;
      }
      H(k, k) = var;
      pv(k) = var;
    }
  }
  return lin;
}

namespace {

struct SmoothedStart {
  std::vector<Vector> theta;
  std::vector<Vector> alpha;
};

SmoothedStart initial_start(const NonGaussianSsm& spec, const Panel& z) {
  const int m = spec.base.n_time();
  const int p = spec.base.n_obs();
  GaussianSsm g = spec.base;
  Panel pz(m);
  for (int t = 0; t < m; ++t) {
    pz[t] = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < p; ++k) {
      const Family f = spec.families[k].kind;
      if (f == Family::Gaussian) {
        if (!spec.base.is_missing(t, k, z)) pz[t](k) = z[t](k);
        continue;
      }
      g.obs_cov[t].row(k).setZero();
      g.obs_cov[t].col(k).setZero();
      g.obs_cov[t](k, k) = 1.0;
      if (!spec.base.is_missing(t, k, z)) {
        pz[t](k) = link_transform(f, z[t](k));
        g.obs_cov[t](k, k) = link_transform_variance(f, z[t](k));
      }
    }
  }
  const FilterOutput filt = kalman_filter(g, pz);
  const SmootherOutput smooth = kalman_smoother(g, filt);
  return {signal_of(spec.base, smooth.alpha_hat), smooth.alpha_hat};
}

ModeResult iterate_mode(const NonGaussianSsm& spec, const Panel& z, std::vector<Vector> theta,
                        std::vector<Vector> alpha, const ModeOptions& opts) {
  const bool gaussian = spec.all_gaussian();
  const StatePrior prior = make_prior(spec.base);
  double f_prev = std::numeric_limits<double>::quiet_NaN();
  if (!alpha.empty() && !gaussian)
    f_prev = log_obs_density(spec, z, theta) + log_prior(spec.base, prior, alpha);

  ModeResult res;
  for (int it = 1; it <= opts.max_iter; ++it) {
    res.lin = linearize(spec, z, theta);
    res.filt = kalman_filter(res.lin.model, res.lin.pseudo_z);
    res.smooth = kalman_smoother(res.lin.model, res.filt);
    std::vector<Vector> alpha_new = res.smooth.alpha_hat;
    std::vector<Vector> theta_new = signal_of(spec.base, alpha_new);

    if (!gaussian && std::isfinite(f_prev)) {
      // Halve the step while the full update lowers the mode objective.
      double f_new = log_obs_density(spec, z, theta_new) + log_prior(spec.base, prior, alpha_new);
      const double slack = 1e-10 * (1.0 + std::abs(f_prev));
      double s = 1.0;
      for (int h = 0; h < opts.max_halvings && !(f_new >= f_prev - slack); ++h) {
        s *= 0.5;
        for (std::size_t t = 0; t < alpha_new.size(); ++t)
          alpha_new[t] = alpha[t] + s * (res.smooth.alpha_hat[t] - alpha[t]);
        theta_new = signal_of(spec.base, alpha_new);
        f_new = log_obs_density(spec, z, theta_new) + log_prior(spec.base, prior, alpha_new);
      }
      f_prev = f_new;
    } else if (!gaussian) {
      f_prev = log_obs_density(spec, z, theta_new) + log_prior(spec.base, prior, alpha_new);
    }

    res.last_step = sup_diff(theta_new, theta);
    res.step_history.push_back(res.last_step);
    res.iterations = it;
    theta = std::move(theta_new);
    alpha = std::move(alpha_new);
    res.lin.theta_hat = theta;
    if (gaussian || res.last_step < opts.tol) return res;
  }
  if (res.last_step > opts.diverged_tol) {
    throw Error(ErrorCode::ModeDiverged, "mode iteration did not converge after " +
                                             std::to_string(opts.max_iter) +
                                             " iterations (last step " +
                                             std::to_string(res.last_step) + ")");
  }
  return res;
}

}  // namespace

std::vector<Vector> initial_signal(const NonGaussianSsm& spec, const Panel& z) {
  return initial_start(spec, z).theta;
}

ModeResult find_mode(const NonGaussianSsm& spec, const Panel& z, const ModeOptions& opts) {
  SmoothedStart start = initial_start(spec, z);
  return iterate_mode(spec, z, std::move(start.theta), std::move(start.alpha), opts);
}

ModeResult find_mode_from(const NonGaussianSsm& spec, const Panel& z,
                          std::vector<Vector> theta0, const ModeOptions& opts) {
  return iterate_mode(spec, z, std::move(theta0), {}, opts);
}

}  // namespace mrss
