// Acceptance checks. Each check prints one PASS/FAIL line and exits nonzero on failure.
//
//   acceptance <check> [--replications FILE] [--reps N]
//
// The simulation checks read per-replication results written by the "replications" step.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <thread>

#include "mrss/dense.hpp"
#include "mrss/importance.hpp"
#include "mrss/io.hpp"
#include "mrss/lgss.hpp"
#include "mrss/mode.hpp"
#include "mrss/simbench.hpp"
#include "oracles.hpp"

using namespace mrss;
using io::Json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, const char* fmt = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

// ---------------------------------------------------------------- exact checks

Outcome filter_vs_dense() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int count = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int p = 1 + static_cast<int>(rng() % 4);
    const int m = 1 + static_cast<int>(rng() % (100 / p));
    const int w = 1 + static_cast<int>(rng() % 3);
    const GaussianSsm model = oracle::random_model(rng, m, p, w);
    const Panel z = oracle::random_panel(rng, model, rep % 2 ? 0.2 : 0.0);
    worst = std::max(worst, std::abs(kalman_loglik(model, z) - dense_joint_loglik(model, z)));
    ++count;
  }
  const double secs = since(t0);
  return {count == 100 && worst <= 1e-8 && secs < 10.0,
          "100 instances with m*p <= 100, max |diff| " + num(worst) + " (tol 1e-8), " +
              num(secs, "%.2f") + " s (limit 10 s)"};
}

NonGaussianSsm scalar_model(ChannelFamily family, double mu, double var) {
  NonGaussianSsm spec;
  spec.base = GaussianSsm::time_invariant(1, Matrix::Ones(1, 1), Vector::Zero(1),
                                          Matrix::Ones(1, 1), Matrix::Ones(1, 1), Vector::Zero(1),
                                          Matrix::Ones(1, 1), Vector::Constant(1, mu),
                                          Matrix::Constant(1, 1, var));
  spec.families = {family};
  return spec;
}

Outcome mode_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double worst_grad = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto inst = oracle::random_mixed(rng, 3 + rep % 10);
    const ModeResult res = find_mode(inst.spec, inst.z);
    const Vector grad = oracle::dense_state_gradient(inst.spec, inst.z, res.smooth.alpha_hat);
    worst_grad = std::max(worst_grad, grad.cwiseAbs().maxCoeff());
  }
  double worst_root = 0.0;
  int scalar_cases = 0;
  const std::pair<double, double> priors[] = {{0.0, 1.0}, {1.5, 0.5}, {-2.0, 3.0}};
  for (const auto& [mu, var] : priors) {
    for (double z : {0.0, 1.0}) {
      const double root = oracle::bisect(
          [&](double x) { return z - expit(x) - (x - mu) / var; }, -60.0, 60.0);
      const ModeResult res =
          find_mode(scalar_model(ChannelFamily::bernoulli(), mu, var), {Vector::Constant(1, z)});
      worst_root = std::max(worst_root, std::abs(res.lin.theta_hat[0](0) - root));
      ++scalar_cases;
    }
    for (double z : {0.0, 1.0, 4.0, 12.0}) {
      const double root = oracle::bisect(
          [&](double x) { return z - std::exp(x) - (x - mu) / var; }, -60.0, 10.0);
      const ModeResult res =
          find_mode(scalar_model(ChannelFamily::poisson(), mu, var), {Vector::Constant(1, z)});
      worst_root = std::max(worst_root, std::abs(res.lin.theta_hat[0](0) - root));
      ++scalar_cases;
    }
  }
  const double secs = since(t0);
  return {worst_grad <= 1e-6 && worst_root <= 1e-8 && secs < 30.0,
          "50 mixed instances, max gradient sup-norm " + num(worst_grad) + " (tol 1e-6); " +
              std::to_string(scalar_cases) + " scalar roots, max |diff| " + num(worst_root) +
              " (tol 1e-8); " + num(secs, "%.2f") + " s (limit 30 s)"};
}

Outcome is_vs_quadrature() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(300 + seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int m = 1 + seed % 2;
    const int p = 1 + (seed / 2) % 2;
    NonGaussianSsm spec;
    Matrix Z(p, 1);
    Vector d(p);
    for (int k = 0; k < p; ++k) {
      Z(k, 0) = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.3 + 0.9 * u(rng));
      d(k) = -0.5 + u(rng);
      spec.families.push_back((seed + k) % 2 ? ChannelFamily::bernoulli() : ChannelFamily::poisson());
    }
    const double T = -0.9 + 1.8 * u(rng), c = -0.3 + 0.6 * u(rng), Q = 0.3 + 1.2 * u(rng);
    const double a1 = -0.5 + u(rng), P1 = 0.5 + u(rng);
    spec.base = GaussianSsm::time_invariant(m, Z, d, Matrix::Identity(p, p), Matrix::Constant(1, 1, T),
                                            Vector::Constant(1, c), Matrix::Constant(1, 1, Q),
                                            Vector::Constant(1, a1), Matrix::Constant(1, 1, P1));
    Panel z;
    double alpha = a1 + std::sqrt(P1) * std::normal_distribution<double>()(rng);
    for (int t = 0; t < m; ++t) {
      Vector zt(p);
      for (int k = 0; k < p; ++k) {
        const double theta = Z(k, 0) * alpha + d(k);
        zt(k) = spec.families[k].kind == Family::Bernoulli
                    ? (u(rng) < expit(theta) ? 1.0 : 0.0)
                    : std::poisson_distribution<int>(std::exp(theta))(rng);
      }
      z.push_back(zt);
      alpha = T * alpha + c + std::sqrt(Q) * std::normal_distribution<double>()(rng);
    }
    auto log_obs = [&](int t, double a) {
      double s = 0.0;
      for (int k = 0; k < p; ++k) s += log_density(spec.families[k], z[t](k), Z(k, 0) * a + d(k));
      return s;
    };
    const double truth = oracle::log_expect_normal(
        [&](double x1) {
          double v = log_obs(0, x1);
          if (m == 2)
            v += oracle::log_expect_normal([&](double x2) { return log_obs(1, x2); }, T * x1 + c,
                                           std::sqrt(Q), 60);
          return v;
        },
        a1, std::sqrt(P1), 60);
    ISOptions opts;
    opts.n_samples = 10000;
    const double est = is_loglik(spec, z, find_mode(spec, z), seed, opts).loglik();
    worst = std::max(worst, std::abs(est - truth));
  }
  const double secs = since(t0);
  return {worst <= 0.01 && secs < 60.0,
          "20 seeds, m <= 2, w = 1, max |IS - quadrature| " + num(worst) + " (tol 0.01), " +
              num(secs, "%.2f") + " s (limit 60 s)"};
}

Outcome gaussian_degeneracy() {
  std::mt19937_64 rng(404);
  int cases = 0, bad = 0;
  for (int rep = 0; rep < 20; ++rep) {
    NonGaussianSsm spec;
    const int p = 1 + rep % 4, w = 1 + rep % 3;
    spec.base = oracle::random_model(rng, 3 + rep % 9, p, w);
    for (auto& H : spec.base.obs_cov) H = Matrix(H.diagonal().asDiagonal());
    spec.families.assign(p, ChannelFamily::gaussian(1.0));
    const Panel z = oracle::random_panel(rng, spec.base, 0.15);
    const double exact = kalman_loglik(spec.base, z);
    const ModeResult mode = find_mode(spec, z);
    for (auto [n, anti] : {std::pair{2, true}, {3, false}, {100, true}, {1000, true}, {10000, true}}) {
      ISOptions opts;
      opts.n_samples = n;
      opts.antithetic = anti;
      const ISEstimate est = is_loglik(spec, z, mode, 7, opts);
      ++cases;
      if (!(est.log_wbar == 0.0 && est.loglik() == exact)) ++bad;
    }
  }
  return {bad == 0, std::to_string(cases) + " (model, N) cases, " + std::to_string(bad) +
                        " with log_wbar != 0 or loglik != Kalman loglik (bitwise)"};
}

Outcome missing_gap() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u01;
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int m = 5 + rep % 16, p = 1 + rep % 4, w = 1 + rep % 3;
    GaussianSsm full = oracle::random_model(rng, m, p, w);
    const Transition tr = full.transition[0];
    for (auto& t : full.transition) t = tr;
    Panel z = oracle::random_panel(rng, full, 0.1);
    std::vector<int> kept{0};
    for (int t = 1; t < m; ++t)
      if (u01(rng) < 0.6) kept.push_back(t);
    std::vector<char> keep(m, 0);
    for (int t : kept) keep[t] = 1;
    for (int t = 0; t < m; ++t)
      if (!keep[t]) z[t].setConstant(NAN);
    GaussianSsm gap = full;
    gap.loading.clear();
    gap.offset.clear();
    gap.obs_cov.clear();
    gap.transition.clear();
    Panel zg;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const int t = kept[i];
      gap.loading.push_back(full.loading[t]);
      gap.offset.push_back(full.offset[t]);
      gap.obs_cov.push_back(full.obs_cov[t]);
      const int tau = i + 1 < kept.size() ? kept[i + 1] - t - 1 : 0;
      gap.transition.push_back(gap_transition(tr.T, tr.c, tr.Q, tau));
      zg.push_back(z[t]);
    }
    worst = std::max(worst, std::abs(kalman_loglik(full, z) - kalman_loglik(gap, zg)));
  }
  return {worst <= 1e-10, "50 ragged panels, max |gap - full grid| " + num(worst) + " (tol 1e-10)"};
}

// ---------------------------------------------------------------- simulation study

constexpr int kReplications = 50;
constexpr int kMonotoneFits = 20;

Json candidate_json(const sim::CandidateFit& c) {
  int violations = 0;
  double worst = INFINITY;
  for (const auto& b : c.fit.blocks) {
    if (b.after < b.before) ++violations;
    worst = std::min(worst, b.after - b.before);
  }
  return {{"n_b", c.n_b},
          {"n_v", c.n_v},
          {"loglik", c.fit.loglik},
          {"aic", c.fit.aic},
          {"n_params", c.fit.n_params},
          {"converged", c.fit.converged},
          {"n_outer", c.fit.n_outer},
          {"seconds", c.seconds},
          {"beta_y3", {c.fit.psi_hat.beta(2, 0), c.fit.psi_hat.beta(2, 1)}},
          {"block_steps", c.fit.blocks.size()},
          {"block_violations", violations},
          {"min_block_gain", std::isfinite(worst) ? worst : 0.0}};
}

Json errors_json(const sim::PredictionErrors& e) {
  Json in = Json::array(), out = Json::array();
  for (int k = 0; k < e.in_sample.size(); ++k) {
    in.push_back(e.in_sample(k));
    out.push_back(e.out_sample(k));
  }
  return {{"in", in}, {"out", out}};
}

int run_replications(const std::string& path, int reps) {
  sim::ReplicationOptions opts;
  opts.dims = sim::candidate_dimensions();
  opts.prediction = true;
  opts.fit.threads = std::max(1u, std::thread::hardware_concurrency());
  Json doc = {{"replications", Json::array()}};
  const auto t0 = Clock::now();
  for (int rep = 1; rep <= reps; ++rep) {
    sim::SimConfig cfg;
    cfg.N = 40;
    cfg.T_len = 30;
    cfg.p_treat = 0.3;
    cfg.seed = static_cast<std::uint64_t>(rep);
    const auto r0 = Clock::now();
    const sim::ReplicationResult r = sim::run_replication(cfg, opts);
    Json rec = {{"seed", r.seed}, {"candidates", Json::array()}};
    for (const auto& c : r.candidates) rec["candidates"].push_back(candidate_json(c));
    rec["prefix_converged"] = r.prefix_fit.converged;
    rec["prefix_seconds"] = r.prefix_seconds;
    rec["mrss"] = errors_json(r.mrss);
    rec["individual_var"] = errors_json(r.individual_var);
    rec["pooled_var"] = errors_json(r.pooled_var);
    rec["var_rank_deficient"] = r.var_rank_deficient;
    rec["var_clamped"] = r.var_clamped;
    doc["replications"].push_back(rec);
    doc["seconds"] = since(t0);
    io::write_json(path, doc);
    std::printf("replication %d/%d (seed %d) %.0f s\n", rep, reps, rep, since(r0));
    std::fflush(stdout);
  }
  std::printf("%d replications written to %s in %.0f s\n", reps, path.c_str(), since(t0));
  return 0;
}

const Json* find_candidate(const Json& rep, int n_b, int n_v) {
  for (const auto& c : rep.at("candidates"))
    if (c.at("n_b") == n_b && c.at("n_v") == n_v) return &c;
  return nullptr;
}

struct Moments {
  double mean = 0.0, mse = 0.0, sd = 0.0;
  int n = 0;
};

// Moments of one Y3 coefficient estimate of a candidate over all replications.
Moments coefficient_moments(const Json& reps, int n_b, int n_v, int j, double truth) {
  std::vector<double> v;
  for (const auto& rep : reps)
    if (const Json* c = find_candidate(rep, n_b, n_v)) v.push_back(c->at("beta_y3")[j].get<double>());
  Moments m;
  m.n = static_cast<int>(v.size());
  if (m.n == 0) return m;
  for (double x : v) {
    m.mean += x;
    m.mse += (x - truth) * (x - truth);
  }
  m.mean /= m.n;
  m.mse /= m.n;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = m.n > 1 ? std::sqrt(ss / (m.n - 1)) : 0.0;
  return m;
}

Outcome coefficient_reproduction(const Json& reps) {
  const double paper[2] = {0.12e-2, 0.15e-2};
  const double truth[2] = {sim::kTrueBeta1, sim::kTrueBeta2};
  bool pass = static_cast<int>(reps.size()) >= kReplications;
  std::string detail = std::to_string(reps.size()) + " replications;";
  for (int j = 0; j < 2; ++j) {
    const Moments m = coefficient_moments(reps, 1, 1, j, truth[j]);
    const double ratio = m.mse / paper[j];
    const double z = m.sd > 0 ? std::abs(m.mean - truth[j]) / (m.sd / std::sqrt(m.n)) : 0.0;
    pass = pass && ratio >= 0.5 && ratio <= 2.0 && z <= 3.0;
    detail += " X" + std::to_string(j + 1) + ": MSE " + num(m.mse) + " vs " + num(paper[j]) +
              " (ratio " + num(ratio) + ", need [0.5, 2]), mean " + num(m.mean, "%.4f") + " (" +
              num(z, "%.2f") + " MC SE from " + num(truth[j], "%.0f") + ", need <= 3);";
  }
  double secs = 0.0;
  for (const auto& rep : reps)
    if (const Json* c = find_candidate(rep, 1, 1)) secs += c->at("seconds").get<double>();
  pass = pass && secs <= 7200.0;
  detail += " fits took " + num(secs, "%.0f") + " s (budget 7200 s)";
  return {pass, detail};
}

Outcome prediction_ordering(const Json& reps) {
  const char* names[] = {"Y1", "Y2", "Y3"};
  double mean[3][3] = {};
  const char* methods[] = {"mrss", "individual_var", "pooled_var"};
  for (const auto& rep : reps)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) mean[i][k] += rep.at(methods[i]).at("out")[k].get<double>();
  bool pass = static_cast<int>(reps.size()) >= kReplications;
  std::string detail = std::to_string(reps.size()) + " replications, out-of-sample MRSS / individual / pooled:";
  for (int k = 0; k < 3; ++k) {
    for (auto& m : mean) m[k] /= std::max<std::size_t>(1, reps.size());
    const bool ordered = mean[0][k] < mean[1][k] && mean[1][k] < mean[2][k];
    pass = pass && ordered;
    detail += std::string(" ") + names[k] + " " + num(mean[0][k]) + " / " + num(mean[1][k]) + " / " +
              num(mean[2][k]) + (ordered ? "" : " (order violated)") + ";";
  }
  return {pass, detail};
}

Outcome state_selection(const Json& reps) {
  int chosen = 0, total = 0;
  for (const auto& rep : reps) {
    const Json* best = nullptr;
    for (const auto& c : rep.at("candidates"))
      if (!best || c.at("aic").get<double>() < best->at("aic").get<double>()) best = &c;
    ++total;
    if (best && best->at("n_b") == 1 && best->at("n_v") == 1) ++chosen;
  }
  const double frac = total ? static_cast<double>(chosen) / total : 0.0;
  bool pass = total >= kReplications && frac >= 0.8;
  std::string detail = "AIC picks (1,1) in " + std::to_string(chosen) + "/" + std::to_string(total) +
                       " (need >= 80%);";
  const double truth[2] = {sim::kTrueBeta1, sim::kTrueBeta2};
  for (auto [nb, nv] : {std::pair{0, 1}, std::pair{1, 0}}) {
    for (int j = 0; j < 2; ++j) {
      const double base = coefficient_moments(reps, 1, 1, j, truth[j]).mse;
      const double miss = coefficient_moments(reps, nb, nv, j, truth[j]).mse;
      const double ratio = base > 0 ? miss / base : 0.0;
      pass = pass && ratio >= 10.0;
      detail += " (" + std::to_string(nb) + "," + std::to_string(nv) + ") Y3 X" +
                std::to_string(j + 1) + " MSE ratio " + num(ratio) + ";";
    }
  }
  detail += " need every ratio >= 10";
  return {pass, detail};
}

Outcome monotone_cbcd(const Json& reps) {
  int fits = 0, converged = 0, violations = 0, steps = 0;
  double worst = INFINITY;
  for (const auto& rep : reps) {
    if (fits == kMonotoneFits) break;
    const Json* c = find_candidate(rep, 1, 1);
    if (!c) continue;
    ++fits;
    if (c->at("converged").get<bool>()) ++converged;
    violations += c->at("block_violations").get<int>();
    steps += c->at("block_steps").get<int>();
    worst = std::min(worst, c->at("min_block_gain").get<double>());
  }
  const bool pass = fits == kMonotoneFits && violations == 0 && converged >= 0.95 * fits;
  return {pass, std::to_string(fits) + " fits, " + std::to_string(steps) + " block updates, " +
                    std::to_string(violations) + " decreases (smallest change " + num(worst) +
                    "); " + std::to_string(converged) + "/" + std::to_string(fits) +
                    " converged within 100 outer iterations (need >= 95%)"};
}

struct Check {
  int id;
  const char* name;
  const char* title;
  bool needs_replications;
  std::function<Outcome(const Json&)> run;
};

const std::vector<Check>& checks() {
  static const std::vector<Check> all = {
      {1, "filter_dense", "Kalman log-likelihood vs dense joint density", false,
       [](const Json&) { return filter_vs_dense(); }},
      {2, "mode", "mode gradient and scalar roots", false, [](const Json&) { return mode_correctness(); }},
      {3, "is_quadrature", "importance-sampling likelihood vs quadrature", false,
       [](const Json&) { return is_vs_quadrature(); }},
      {4, "gaussian_degeneracy", "all-Gaussian importance weights", false,
       [](const Json&) { return gaussian_degeneracy(); }},
      {5, "coefficients", "simulation coefficient MSE and bias", true, coefficient_reproduction},
      {6, "prediction", "prediction error ordering", true, prediction_ordering},
      {7, "selection", "AIC state-dimension selection", true, state_selection},
      {8, "missing_gap", "gap transitions vs missing rows", false, [](const Json&) { return missing_gap(); }},
      {9, "monotone_cbcd", "monotone block updates and convergence", true, monotone_cbcd},
  };
  return all;
}

int usage() {
  std::cerr << "usage: acceptance <check|all|replications> [--replications FILE] [--reps N]\nchecks:";
  for (const auto& c : checks()) std::cerr << " " << c.name;
  std::cerr << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage();
  const std::string what = argv[1];
  std::string path = "replications.json";
  int reps = kReplications;
  for (int i = 2; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--replications") == 0) path = argv[i + 1];
    else if (std::strcmp(argv[i], "--reps") == 0) reps = std::atoi(argv[i + 1]);
    else return usage();
  }
  try {
    if (what == "replications") return run_replications(path, reps);
    Json reps_doc = Json::array();
    bool loaded = false;
    int failures = 0, ran = 0;
    for (const auto& c : checks()) {
      if (what != "all" && what != c.name) continue;
      ++ran;
      if (c.needs_replications && !loaded) {
        if (what == "all") run_replications(path, reps);
        reps_doc = io::read_json(path).at("replications");
        loaded = true;
      }
      const Outcome o = c.run(reps_doc);
      std::printf("[%d] %s: %s: %s\n", c.id, c.title, o.pass ? "PASS" : "FAIL", o.detail.c_str());
      std::fflush(stdout);
      if (!o.pass) ++failures;
    }
    if (ran == 0) return usage();
    return failures == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 1;
  }
}
