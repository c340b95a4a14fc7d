#pragma once

// Independent numerical oracles and random-instance generators for the tests.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mrss/lgss.hpp"

namespace oracle {

using mrss::Matrix;
using mrss::Vector;

// Gauss-Hermite rule for weight exp(-x^2) by Golub-Welsch.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Rule gauss_hermite(int n) {
  Matrix J = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(J);
  Rule r;
  for (int i = 0; i < n; ++i) {
    r.nodes.push_back(es.eigenvalues()(i));
    const double v0 = es.eigenvectors()(0, i);
    r.weights.push_back(std::sqrt(M_PI) * v0 * v0);
  }
  return r;
}

// log of E f(X), X ~ N(mu, sd^2), with f given on the log scale; n-node Gauss-Hermite.
inline double log_expect_normal(const std::function<double(double)>& log_f, double mu, double sd,
                                int n = 50) {
  const Rule r = gauss_hermite(n);
  std::vector<double> terms;
  double mx = -INFINITY;
  for (int i = 0; i < n; ++i) {
    const double x = mu + std::sqrt(2.0) * sd * r.nodes[i];
    terms.push_back(std::log(r.weights[i] / std::sqrt(M_PI)) + log_f(x));
    mx = std::max(mx, terms.back());
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-14) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Matrix random_spd(std::mt19937_64& rng, int n, double ridge = 0.3) {
  std::normal_distribution<double> nd;
  Matrix A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
  return A * A.transpose() / n + ridge * Matrix::Identity(n, n);
}

inline Matrix random_matrix(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix A(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) A(i, j) = nd(rng);
  return A;
}

inline Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale);
}

// Random time-varying model with stable diagonal-ish transition.
inline mrss::GaussianSsm random_model(std::mt19937_64& rng, int m, int p, int w) {
  std::uniform_real_distribution<double> unif(-0.9, 0.9);
  mrss::GaussianSsm model;
  for (int t = 0; t < m; ++t) {
    model.loading.push_back(random_matrix(rng, p, w));
    model.offset.push_back(random_vector(rng, p, 0.5));
    model.obs_cov.push_back(random_spd(rng, p));
    Matrix T = random_matrix(rng, w, w, 0.2);
    for (int i = 0; i < w; ++i) T(i, i) = unif(rng);
    model.transition.push_back({T, random_vector(rng, w, 0.5), random_spd(rng, w)});
  }
  model.a1 = random_vector(rng, w);
  model.P1 = random_spd(rng, w, 0.5);
  return model;
}

// Panel simulated from the model, with a fraction of entries set missing.
inline mrss::Panel random_panel(std::mt19937_64& rng, const mrss::GaussianSsm& model,
                                double missing_prob = 0.0) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u01;
  Vector alpha = model.a1 + mrss::psd_sqrt(model.P1) * random_vector(rng, model.n_state());
  mrss::Panel z;
  for (int t = 0; t < model.n_time(); ++t) {
    Vector eps = mrss::psd_sqrt(model.obs_cov[t]) * random_vector(rng, model.n_obs());
    Vector zt = model.loading[t] * alpha + model.offset[t] + eps;
    for (int k = 0; k < zt.size(); ++k)
      if (u01(rng) < missing_prob) zt(k) = NAN;
    z.push_back(zt);
    const auto& tr = model.transition[t];
    alpha = tr.T * alpha + tr.c + mrss::psd_sqrt(tr.Q) * random_vector(rng, model.n_state());
  }
  return z;
}

}  // namespace oracle

#include "mrss/dense.hpp"
#include "mrss/expfam.hpp"
#include "mrss/mode.hpp"

namespace oracle {

struct MixedInstance {
  mrss::NonGaussianSsm spec;
  mrss::Panel z;
};

// Gaussian, Bernoulli and Poisson channels driven by a w-dimensional state.
inline MixedInstance random_mixed(std::mt19937_64& rng, int m, int w = 2,
                                  double missing_prob = 0.1) {
  using mrss::ChannelFamily;
  std::uniform_real_distribution<double> u01;
  MixedInstance out;
  out.spec.families = {ChannelFamily::gaussian(0.5 + u01(rng)), ChannelFamily::bernoulli(),
                       ChannelFamily::poisson()};
  const int p = 3;
  mrss::GaussianSsm& g = out.spec.base;
  for (int t = 0; t < m; ++t) {
    g.loading.push_back(random_matrix(rng, p, w, 0.6));
    g.offset.push_back(random_vector(rng, p, 0.5));
    Matrix H = Matrix::Identity(p, p);
    H(0, 0) = out.spec.families[0].variance;
    g.obs_cov.push_back(H);
    Matrix T = Matrix::Zero(w, w);
    for (int i = 0; i < w; ++i) T(i, i) = -0.9 + 1.8 * u01(rng);
    g.transition.push_back({T, random_vector(rng, w, 0.3), random_spd(rng, w, 0.2) * 0.5});
  }
  g.a1 = random_vector(rng, w, 0.5);
  g.P1 = random_spd(rng, w, 0.5);

  Vector alpha = g.a1 + mrss::psd_sqrt(g.P1) * random_vector(rng, w);
  std::normal_distribution<double> nd;
  for (int t = 0; t < m; ++t) {
    const Vector theta = g.loading[t] * alpha + g.offset[t];
    Vector zt(p);
    zt(0) = theta(0) + std::sqrt(g.obs_cov[t](0, 0)) * nd(rng);
    zt(1) = u01(rng) < mrss::expit(theta(1)) ? 1.0 : 0.0;
    zt(2) = std::poisson_distribution<int>(std::exp(std::min(theta(2), 5.0)))(rng);
    for (int k = 0; k < p; ++k)
      if (u01(rng) < missing_prob) zt(k) = NAN;
    out.z.push_back(zt);
    const auto& tr = g.transition[t];
    alpha = tr.T * alpha + tr.c + mrss::psd_sqrt(tr.Q) * random_vector(rng, w);
  }
  return out;
}

// Gradient of log p(z | theta(alpha)) + log p(alpha) over the stacked states, from the dense
// prior moments.
inline Vector dense_state_gradient(const mrss::NonGaussianSsm& spec, const mrss::Panel& z,
                                   const std::vector<Vector>& alpha) {
  const auto& g = spec.base;
  const int m = g.n_time(), w = g.n_state();
  const mrss::StackedMoments mom = mrss::stacked_moments(g);
  const Matrix V = mom.state_cov.topLeftCorner(m * w, m * w);
  const Vector mu = mom.state_mean.head(m * w);
  Vector a(m * w);
  for (int t = 0; t < m; ++t) a.segment(t * w, w) = alpha[t];
  Vector grad = -V.ldlt().solve(a - mu);
  for (int t = 0; t < m; ++t) {
    const Vector theta = g.loading[t] * alpha[t] + g.offset[t];
    for (int k : g.observed(t, z)) {
      const double d1 = mrss::d1_d2(spec.families[k].kind == mrss::Family::Gaussian
                                        ? mrss::ChannelFamily::gaussian(g.obs_cov[t](k, k))
                                        : spec.families[k],
                                    z[t](k), theta(k))
                            .d1;
      grad.segment(t * w, w) += g.loading[t].row(k).transpose() * d1;
    }
  }
  return grad;
}

}  // namespace oracle
