#include "mrss/importance.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "mrss/error.hpp"
#include "mrss/kernels.hpp"

namespace mrss {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Matrix select_rows(const Matrix& A, const std::vector<int>& idx) {
  Matrix out(idx.size(), A.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = A.row(idx[i]);
  return out;
}

Matrix obs_noise_factor(const Matrix& H, const std::vector<int>& idx) {
  Matrix sub(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) sub(i, j) = H(idx[i], idx[j]);
  return psd_sqrt(sub);
}

}  // namespace

StandardNormals draw_normals(std::uint64_t seed, int n_sims, int m, int p, int w) {
  StandardNormals out;
  out.n_sims = n_sims;
  out.m = m;
  out.p = p;
  out.w = w;
  out.data.resize(static_cast<std::size_t>(n_sims) * (w + static_cast<std::size_t>(m) * (p + w)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (double& x : out.data) x = normal(rng);
  return out;
}

std::uint64_t subject_seed(std::uint64_t seed, std::string_view subject_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : subject_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

std::vector<Matrix> simulation_deviations(const GaussianSsm& model, const FilterOutput& filt,
                                          const StandardNormals& normals) {
  const int m = model.n_time();
  const int w = model.n_state();
  const int n = normals.n_sims;
  if (normals.m != m || normals.p != model.n_obs() || normals.w != w)
    throw Error(ErrorCode::DimensionMismatch, "normal draws do not match the model dimensions");

  // Forward: x_{t+1} = T x_t - K v_t + eta_t with v_t = Z x_t + eps_t.
  std::vector<Matrix> x(m), v(m);
  std::vector<Matrix> Z(m), L(m);
  Matrix xt = psd_sqrt(model.initial_cov()) * normals.initial();
  for (int t = 0; t < m; ++t) {
    const auto& idx = filt.obs_index[t];
    const auto& tr = model.transition[t];
    x[t] = xt;
    if (idx.empty()) {
      xt = tr.T * x[t];
    } else {
      Z[t] = select_rows(model.loading[t], idx);
      L[t] = tr.T - filt.K[t] * Z[t];
      const Matrix eps_all = normals.obs_noise(t);
      v[t] = Z[t] * x[t] + obs_noise_factor(model.obs_cov[t], idx) * select_rows(eps_all, idx);
      xt = tr.T * x[t] - filt.K[t] * v[t];
    }
    xt += psd_sqrt(tr.Q) * normals.state_noise(t);
  }

  // Backward: r_{t-1} = Z' F^{-1} v_t + L' r_t; deviation_t = x_t - P_t r_{t-1}, evaluated as
  // x_t - gain_t v_t - P_filt_t T' r_t.
  std::vector<Matrix> dev(m);
  Matrix r = Matrix::Zero(w, n);
  for (int t = m - 1; t >= 0; --t) {
    const Matrix& T = model.transition[t].T;
    dev[t] = x[t] - filt.P_filt[t] * (T.transpose() * r);
    if (filt.obs_index[t].empty()) {
      r = (T.transpose() * r).eval();
    } else {
      dev[t] -= filt.gain[t] * v[t];
      r = (Z[t].transpose() * (filt.F_inv[t] * v[t]) + L[t].transpose() * r).eval();
    }
  }
  return dev;
}

std::vector<Vector> simulation_smoother(const LinearizedModel& lin, std::mt19937_64& rng) {
  const FilterOutput filt = kalman_filter(lin.model, lin.pseudo_z);
  const SmootherOutput smooth = kalman_smoother(lin.model, filt);
  const StandardNormals normals =
      draw_normals(rng(), 1, lin.model.n_time(), lin.model.n_obs(), lin.model.n_state());
  const auto dev = simulation_deviations(lin.model, filt, normals);
  std::vector<Vector> out(dev.size());
  for (std::size_t t = 0; t < dev.size(); ++t) out[t] = smooth.alpha_hat[t] + dev[t].col(0);
  return out;
}

int n_paths(const ISOptions& opts) {
  if (opts.n_samples < 2) throw Error(ErrorCode::Validation, "at least 2 IS samples required");
  if (opts.antithetic && opts.n_samples % 2 != 0)
    throw Error(ErrorCode::Validation, "antithetic sampling needs an even sample count");
  return opts.antithetic ? opts.n_samples / 2 : opts.n_samples;
}

ISEstimate is_loglik(const NonGaussianSsm& spec, const Panel& z, const ModeResult& mode,
                     const StandardNormals& normals, const ISOptions& opts) {
  const GaussianSsm& g = mode.lin.model;
  const int m = g.n_time();
  const int N = opts.n_samples;
  const int paths = n_paths(opts);
  if (normals.n_sims != paths)
    throw Error(ErrorCode::DimensionMismatch, "normal draws do not match the sample count");

  ISEstimate est;
  est.n_samples = N;
  est.log_g = mode.filt.loglik + 0.5 * g.diffuse_rank() * std::log(g.kappa);
  est.ess = N;

  bool any_non_gaussian = false;
  for (int t = 0; t < m && !any_non_gaussian; ++t)
    for (int k : mode.filt.obs_index[t])
      if (spec.families[k].kind != Family::Gaussian) any_non_gaussian = true;
  if (!any_non_gaussian) return est;

  const auto dev = simulation_deviations(g, mode.filt, normals);
  std::vector<double> logw(N, 0.0);
  std::vector<double> theta(N);
  for (int t = 0; t < m; ++t) {
    const Vector mean = g.loading[t] * mode.smooth.alpha_hat[t] + g.offset[t];
    for (int k : mode.filt.obs_index[t]) {
      const Family f = spec.families[k].kind;
      if (f == Family::Gaussian) continue;
      const Vector delta = (g.loading[t].row(k) * dev[t]).transpose();
      for (int j = 0; j < paths; ++j) theta[j] = mean(k) + delta(j);
      if (opts.antithetic)
        for (int j = 0; j < paths; ++j) theta[paths + j] = mean(k) - delta(j);
      const kernels::LogRatioTerm term{f, z[t](k), mode.lin.pseudo_z[t](k),
                                       mode.lin.pseudo_var[t](k)};
      kernels::accumulate_log_ratio(term, theta.data(), theta.size(), logw.data());
    }
  }
  const kernels::ExpSum s = kernels::exp_sum(logw.data(), logw.size());
  est.log_wbar = s.max + std::log(s.sum / N);
  est.ess = s.sum * s.sum / s.sum_sq;
  if (!std::isfinite(est.log_wbar))
    throw Error(ErrorCode::DegenerateWeights, "non-finite importance weights");
  if (est.ess < opts.min_ess_fraction * N)
    throw Error(ErrorCode::DegenerateWeights,
                "effective sample size " + std::to_string(est.ess) + " of " + std::to_string(N));
  return est;
}

ISEstimate is_loglik(const NonGaussianSsm& spec, const Panel& z, const ModeResult& mode,
                     std::uint64_t seed, const ISOptions& opts) {
  const GaussianSsm& g = mode.lin.model;
  const StandardNormals normals = draw_normals(seed, n_paths(opts), g.n_time(), g.n_obs(),
                                               g.n_state());
  ISEstimate est = is_loglik(spec, z, mode, normals, opts);
  est.seed = seed;
  return est;
}

double compensated_sum(const std::vector<double>& values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : values) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double pooled_is_loglik(const std::vector<SubjectModel>& subjects, std::uint64_t seed,
                        const ISOptions& opts, const ModeOptions& mode_opts, int threads) {
  const std::size_t n = subjects.size();
  std::vector<double> values(n, 0.0);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const auto& s = subjects[i];
        const ModeResult mode = find_mode(s.model, s.z, mode_opts);
        values[i] = is_loglik(s.model, s.z, mode, subject_seed(seed, s.id), opts).loglik();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "subject " + subjects[i].id + ": " + e.detail());
    }
  }
  return compensated_sum(values);
}

}  // namespace mrss
