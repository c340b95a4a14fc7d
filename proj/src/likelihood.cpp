#include "mrss/likelihood.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "mrss/error.hpp"

namespace mrss {

struct PooledLikelihood::SubjectState {
  StandardNormals normals;
  std::vector<Vector> theta;
};

void parallel_for_subjects(const std::vector<SubjectData>& subjects, int threads,
                           const std::function<void(std::size_t)>& fn) {
  const std::size_t n = subjects.size();
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
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
}

PooledLikelihood::PooledLikelihood(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                                   LikelihoodOptions opts)
    : spec_(spec), subjects_(subjects), opts_(opts) {
  spec_.validate();
  for (const auto& s : subjects_) s.validate(spec_);
  n_paths(opts_.is);
  for (std::size_t i = 0; i < subjects_.size(); ++i) state_.push_back(std::make_unique<SubjectState>());
}

PooledLikelihood::~PooledLikelihood() = default;

PooledValue PooledLikelihood::evaluate(const ParameterSet& psi) {
  return run(psi, opts_.is.n_samples, true);
}

PooledValue PooledLikelihood::evaluate_at(const ParameterSet& psi, int n_samples) {
  return run(psi, n_samples, false);
}

PooledValue PooledLikelihood::run(const ParameterSet& psi, int n_samples, bool cached) {
  psi.check_layout(spec_);
  ++n_evaluations_;
  ISOptions is = opts_.is;
  is.n_samples = n_samples;
  const int paths = n_paths(is);
  const std::size_t n = subjects_.size();
  std::vector<double> values(n, 0.0), var(n, 0.0), ess(n, 0.0);
  std::vector<std::vector<std::string>> notes(n);

  parallel_for_subjects(subjects_, opts_.threads, [&](std::size_t i) {
    const SubjectData& subj = subjects_[i];
    SubjectState& st = *state_[i];
    const AssembledSubject a = assemble_ssm(spec_, subj, psi);
    notes[i] = a.warnings;
    ModeResult mode;
    bool done = false;
    if (opts_.warm_start && !st.theta.empty()) {
      try {
        mode = find_mode_from(a.model, a.z, st.theta, opts_.mode);
        done = true;
      } catch (const Error&) {
      }
    }
    if (!done) mode = find_mode(a.model, a.z, opts_.mode);
    if (opts_.warm_start) st.theta = mode.lin.theta_hat;

    const GaussianSsm& g = mode.lin.model;
    const std::uint64_t seed = subject_seed(opts_.seed, subj.id);
    ISEstimate est;
    if (cached) {
      if (st.normals.n_sims != paths)
        st.normals = draw_normals(seed, paths, g.n_time(), g.n_obs(), g.n_state());
      est = is_loglik(a.model, a.z, mode, st.normals, is);
    } else {
      est = is_loglik(a.model, a.z, mode, seed, is);
    }
    values[i] = est.loglik();
    ess[i] = est.ess;
    var[i] = std::max(0.0, 1.0 / est.ess - 1.0 / n_samples);
  });

  if (!warnings_collected_) {
    for (const auto& w : notes) warnings_.insert(warnings_.end(), w.begin(), w.end());
    warnings_collected_ = true;
  }
  PooledValue out;
  out.loglik = compensated_sum(values);
  out.mc_se = std::sqrt(compensated_sum(var));
  out.min_ess = n == 0 ? 0.0 : *std::min_element(ess.begin(), ess.end());
  return out;
}

double gaussian_pooled_loglik(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                              const ParameterSet& psi, int threads) {
  for (const auto& ch : spec.channels)
    if (ch.family.kind != Family::Gaussian)
      throw Error(ErrorCode::Validation, "exact Gaussian likelihood needs Gaussian channels only");
  std::vector<double> values(subjects.size(), 0.0);
  parallel_for_subjects(subjects, threads, [&](std::size_t i) {
    const AssembledSubject a = assemble_ssm(spec, subjects[i], psi);
    const GaussianSsm& g = a.model.base;
    values[i] = kalman_loglik(g, a.z) + 0.5 * g.diffuse_rank() * std::log(g.kappa);
  });
  return compensated_sum(values);
}

}  // namespace mrss
