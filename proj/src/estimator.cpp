#include "mrss/estimator.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <cmath>
#include <map>

#include "mrss/error.hpp"
#include "mrss/expfam.hpp"

namespace mrss {

namespace {

constexpr Block kAllBlocks[] = {Block::LambdaBeta, Block::Transition, Block::Intercept,
                                Block::Variance};

std::vector<SubjectData> link_scale(const MrssSpec& spec, std::vector<SubjectData> subjects) {
  for (auto& s : subjects)
    for (auto& z : s.z)
      for (int k = 0; k < z.size(); ++k)
        if (!std::isnan(z(k))) z(k) = link_transform(spec.channels[k].family.kind, z(k));
  return subjects;
}

}  // namespace

ParameterSet gaussian_init(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                           const InitConfig& config) {
  spec.validate();
  for (const auto& s : subjects) s.validate(spec);
  if (config.max_iter <= 0 || config.max_evals <= 1) return heuristic_seed(spec, subjects);

  MrssSpec gspec = spec;
  for (auto& ch : gspec.channels) ch.family = ChannelFamily::gaussian(1.0);
  const std::vector<SubjectData> gsubjects = link_scale(spec, subjects);
  const ParameterSet seed = heuristic_seed(gspec, gsubjects);

  std::vector<int> offsets = {0};
  for (Block b : kAllBlocks) offsets.push_back(offsets.back() + block_size(gspec, b));
  Vector x0(offsets.back());
  for (int i = 0; i < 4; ++i)
    x0.segment(offsets[i], offsets[i + 1] - offsets[i]) = pack(gspec, seed, kAllBlocks[i]);

  auto unpack_all = [&](const Vector& x) {
    ParameterSet psi = seed;
    for (int i = 0; i < 4; ++i)
      unpack(gspec, kAllBlocks[i], x.segment(offsets[i], offsets[i + 1] - offsets[i]), psi);
    return psi;
  };
  auto f = [&](const Vector& x) {
    return gaussian_pooled_loglik(gspec, gsubjects, unpack_all(x), config.threads);
  };
  // forward differences to get close, central differences to finish
  OptimOptions opts;
  opts.max_evals = config.max_evals;
  opts.max_iter = config.max_iter;
  opts.grad_tol = 1e-9;
  opts.f_tol = 1e-12;
  const OptimResult coarse = maximize_bfgs(f, x0, opts);
  opts.max_evals = std::max(2, config.max_evals - coarse.evals);
  opts.max_iter = std::max(1, config.max_iter - coarse.iterations);
  opts.central = true;
  opts.f_tol = 1e-15;
  OptimResult r = maximize_bfgs(f, coarse.x, opts, coarse.inv_hessian);
  r.f0 = coarse.f0;
  if (!(r.f > r.f0))
    throw Error(ErrorCode::InitFailed, "Gaussian likelihood did not improve on the heuristic seed");

  ParameterSet psi = unpack_all(r.x);
  for (int k = 0; k < spec.n_channels(); ++k)
    if (spec.channels[k].family.kind != Family::Gaussian) psi.H_diag(k) = 1.0;
  canonicalize_signs(spec, psi);
  return psi;
}

FitResult cbcd_fit(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                   const FitConfig& config) {
  if (config.rounds < 0 || config.max_outer < 0 || config.n_samples < 2 || config.n_check < 2 ||
      config.n_final < 2 || config.block_evals < 1)
    throw Error(ErrorCode::Validation, "fit configuration out of range");
  FitResult res;
  InitConfig init = config.init;
  init.threads = config.threads;
  ParameterSet psi = config.start ? *config.start : gaussian_init(spec, subjects, init);
  psi.check_layout(spec);
  res.init = psi;

  LikelihoodOptions lo;
  lo.is.n_samples = config.n_samples;
  lo.is.antithetic = config.antithetic;
  lo.mode = config.mode;
  lo.seed = config.seed;
  lo.threads = config.threads;
  PooledLikelihood L(spec, subjects, lo);

  PooledValue checked;
  auto check_value = [&] {
    checked = L.evaluate_at(psi, config.n_check);
    res.loglik_trace.push_back(checked.loglik);
  };

  std::map<Block, Matrix> inv_hessian;
  auto maximize_block = [&](Block b, int outer) {
    if (block_size(spec, b) == 0) return;
    ParameterSet work = psi;
    auto f = [&](const Vector& u) {
      unpack(spec, b, u, work);
      return L(work);
    };
    OptimOptions opts;
    opts.max_evals = config.block_evals;
    opts.max_iter = config.block_evals;
    opts.f_tol = config.block_f_tol;
    opts.f_noise_abs = 1e-8;  // warm-started mode searches agree to about this level
    const OptimResult r = maximize_bfgs(f, pack(spec, psi, b), opts, inv_hessian[b]);
    inv_hessian[b] = r.inv_hessian;
    unpack(spec, b, r.x, psi);
    res.blocks.push_back({outer, b, r.f0, r.f, r.evals});
  };

  auto pack_all = [&](const ParameterSet& q) {
    std::vector<Vector> parts;
    for (Block b : kAllBlocks) parts.push_back(pack(spec, q, b));
    return parts;
  };
  auto extrapolate = [&](const std::vector<Vector>& from, int outer) {
    const std::vector<Vector> to = pack_all(psi);
    double best = L(psi), s_best = 0.0;
    const double f0 = best;
    int evals = 1;
    for (double s = 1.0; s <= 64.0; s *= 2.0) {
      ParameterSet trial = psi;
      for (int i = 0; i < 4; ++i) unpack(spec, kAllBlocks[i], to[i] + s * (to[i] - from[i]), trial);
      double v;
      ++evals;
      try {
        v = L(trial);
      } catch (const Error&) {
        break;
      }
      if (!(v > best)) break;
      best = v;
      s_best = s;
    }
    if (s_best > 0.0)
      for (int i = 0; i < 4; ++i) unpack(spec, kAllBlocks[i], to[i] + s_best * (to[i] - from[i]), psi);
    res.extrapolations.push_back({outer, s_best, f0, best, evals});
  };

  check_value();
  for (int outer = 1; outer <= config.max_outer; ++outer) {
    const std::vector<Vector> start = pack_all(psi);
    for (int round = 0; round < config.rounds; ++round) {
      maximize_block(Block::LambdaBeta, outer);
      maximize_block(Block::Transition, outer);
      maximize_block(Block::Intercept, outer);
      maximize_block(Block::Transition, outer);
    }
    maximize_block(Block::Variance, outer);
    maximize_block(Block::Transition, outer);
    if (config.extrapolate) extrapolate(start, outer);
    check_value();
    res.n_outer = outer;
    const double now = res.loglik_trace.back();
    const double change = now - res.loglik_trace[res.loglik_trace.size() - 2];
    const double tol = config.tol_abs > 0.0 ? config.tol_abs : config.tol_rel * std::abs(now);
    if (change <= tol) {
      res.converged = true;
      break;
    }
  }

  const PooledValue final_value =
      config.n_final == config.n_check ? checked : L.evaluate_at(psi, config.n_final);
  canonicalize_signs(spec, psi);
  res.psi_hat = psi;
  res.loglik = final_value.loglik;
  res.mc_se = final_value.mc_se;
  res.n_params = n_params(spec);
  res.aic = aic(res.loglik, res.n_params);
  res.seed = config.seed;
  res.n_final = config.n_final;
  res.mask = parameter_mask(spec);
  res.warnings = L.warnings();
  if (!res.converged)
    res.warnings.push_back("not converged after " + std::to_string(res.n_outer) +
                           " outer iterations");
  return res;
}

double aic(double loglik, int n_params) { return -2.0 * loglik + 2.0 * n_params; }

double aic(const FitResult& fit) { return aic(fit.loglik, fit.n_params); }

LrtResult lrt(double loglik_full, double loglik_nested, int df) {
  if (df <= 0) throw Error(ErrorCode::NotNested, "nested model must have fewer free parameters");
  LrtResult out;
  out.df = df;
  out.statistic = std::max(0.0, 2.0 * (loglik_full - loglik_nested));
  out.p_value = out.statistic == 0.0
                    ? 1.0
                    : boost::math::cdf(boost::math::complement(
                          boost::math::chi_squared(df), out.statistic));
  return out;
}

LrtResult lrt(const FitResult& full, const FitResult& nested) {
  if (!mask_contains(full.mask, nested.mask))
    throw Error(ErrorCode::NotNested, "free parameters of the nested fit are not free in the full fit");
  if (full.n_params == nested.n_params) return {0.0, 0, 1.0};
  return lrt(full.loglik, nested.loglik, full.n_params - nested.n_params);
}

}  // namespace mrss
