#include <cmath>
#include <random>

#include "doctest.h"
#include "mrss/error.hpp"
#include "mrss/importance.hpp"
#include "mrss/model.hpp"
#include "mrss/params.hpp"
#include "mrss/simbench.hpp"
#include "oracles.hpp"

using namespace mrss;

namespace {

MrssSpec gaussian_spec() {
  std::vector<ChannelSpec> channels = {
      {"G1", Role::Measurement, ChannelFamily::gaussian(1.0), ""},
      {"G2", Role::Phenotype, ChannelFamily::gaussian(1.0), "trt"},
      {"G3", Role::Phenotype, ChannelFamily::gaussian(1.0), "trt"},
  };
  std::vector<StateSpec> states = {{"b", StateKind::Treatment}, {"v", StateKind::Health}};
  MrssSpec spec = MrssSpec::default_layout(channels, states, {{"trt", "a"}}, {"X"});
  spec.validate();
  return spec;
}

ParameterSet random_params(const MrssSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  ParameterSet psi;
  const int p = spec.n_channels(), w = spec.n_states();
  psi.lambda = Matrix::Zero(p, w);
  for (int k = 0; k < p; ++k)
    for (int s = 0; s < w; ++s) {
      const LoadingCell& cell = spec.loading[k][s];
      if (cell.kind == CellKind::Fixed) psi.lambda(k, s) = cell.value;
      if (cell.kind == CellKind::Free) psi.lambda(k, s) = 1.5 * u(rng);
    }
  psi.beta = oracle::random_matrix(rng, p, spec.n_covariates());
  for (int g = 0; g < spec.n_groups(); ++g) {
    Vector t(w);
    for (int s = 0; s < w; ++s) t(s) = u(rng);
    psi.T_diag.push_back(t);
  }
  psi.c = oracle::random_vector(rng, w);
  psi.Q = oracle::random_spd(rng, w);
  psi.H_diag.resize(p);
  for (int k = 0; k < p; ++k) psi.H_diag(k) = pos(rng);
  return psi;
}

SubjectData random_subject(const MrssSpec& spec, std::mt19937_64& rng, std::vector<int> times,
                           double missing = 0.1) {
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.5), miss(missing);
  SubjectData s;
  s.id = "r";
  s.group = spec.groups.front().name;
  s.times = std::move(times);
  const int m = s.n_time();
  s.x = oracle::random_matrix(rng, m, spec.n_covariates());
  for (int i = 0; i < m; ++i) {
    Vector z(spec.n_channels());
    for (int k = 0; k < z.size(); ++k) z(k) = miss(rng) ? NAN : nd(rng);
    s.z.push_back(z);
    for (const auto& name : spec.gate_streams()) s.streams[name].push_back(coin(rng) ? 1.0 : 0.0);
  }
  return s;
}

std::vector<int> grid(int m) {
  std::vector<int> t(m);
  for (int i = 0; i < m; ++i) t[i] = i + 1;
  return t;
}

double gaussian_loglik(const MrssSpec& spec, const SubjectData& subj, const ParameterSet& psi) {
  const AssembledSubject a = assemble_ssm(spec, subj, psi);
  return kalman_loglik(a.model.base, a.z);
}

}  // namespace

TEST_CASE("default layout: measurement rows skip treatment states, phenotype rows are gated") {
  const MrssSpec spec = gaussian_spec();
  CHECK(spec.loading[0][0].kind == CellKind::Zero);
  CHECK(spec.loading[0][1].kind == CellKind::Free);
  CHECK(spec.loading[0][1].gate.empty());
  for (int k = 1; k < 3; ++k) {
    CHECK(spec.loading[k][0].kind == CellKind::Free);
    CHECK(spec.loading[k][0].gate == "a");
    CHECK(spec.loading[k][1].gate.empty());
  }
  CHECK(spec.gate_streams() == std::vector<std::string>{"a"});
}

TEST_CASE("simulation layout reproduces the generator's loading matrices") {
  const MrssSpec spec = sim::simulation_spec();
  const ParameterSet psi = sim::true_parameters(spec);
  const Matrix on = instantiate_loading(spec, psi, {0, 1}, {{"a", 1.0}});
  const Matrix off = instantiate_loading(spec, psi, {0, 1}, {{"a", 0.0}});
  Matrix expect_on(3, 2), expect_off(3, 2);
  expect_on << -0.5, 0.1, 0.2, 0.2, -1.0, 1.0;
  expect_off << 0.0, 0.1, 0.0, 0.2, 0.0, 1.0;
  CHECK(on == expect_on);
  CHECK(off == expect_off);
  CHECK(spec.loading[2][0].kind == CellKind::Fixed);
  CHECK(spec.loading[2][1].kind == CellKind::Fixed);
}

TEST_CASE("indicator off: phenotype channels depend only on health states and covariates") {
  std::mt19937_64 rng(3);
  const MrssSpec spec = gaussian_spec();
  const ParameterSet psi = random_params(spec, rng);
  SubjectData subj = random_subject(spec, rng, grid(6));
  subj.streams["a"].assign(6, 0.0);
  const AssembledSubject a = assemble_ssm(spec, subj, psi);
  for (const Matrix& Z : a.model.base.loading) CHECK(Z.col(0).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 6; ++i)
    CHECK((a.model.base.offset[i] - psi.beta * subj.x.row(i).transpose()).norm() == 0.0);
}

TEST_CASE("gate coherence: with all indicators off, gated loadings do not affect the likelihood") {
  sim::SimConfig cfg;
  cfg.N = 3;
  cfg.T_len = 8;
  cfg.p_treat = 0.0;
  const sim::SimDataset data = sim::generate_dataset(cfg);
  const MrssSpec spec = sim::simulation_spec();
  ParameterSet psi = sim::true_parameters(spec);
  auto loglik = [&](const ParameterSet& par) {
    std::vector<SubjectModel> subjects;
    for (const auto& s : data.subjects) {
      AssembledSubject a = assemble_ssm(spec, s, par);
      subjects.push_back({s.id, a.model, a.z});
    }
    ISOptions opts;
    opts.n_samples = 200;
    return pooled_is_loglik(subjects, 5, opts, {}, 1);
  };
  const double base = loglik(psi);
  psi.lambda(0, 0) = 3.0;
  psi.lambda(1, 0) = -2.0;
  CHECK(loglik(psi) == base);
}

TEST_CASE("assembly of a ragged subject inserts one gap segment matching the full grid") {
  std::mt19937_64 rng(11);
  const MrssSpec spec = gaussian_spec();
  const ParameterSet psi = random_params(spec, rng);
  SubjectData full = random_subject(spec, rng, {1, 2, 3, 4}, 0.0);
  full.z[1].setConstant(NAN);
  full.z[2].setConstant(NAN);
  SubjectData ragged = full;
  ragged.times = {1, 4};
  ragged.z = {full.z[0], full.z[3]};
  ragged.streams["a"] = {full.streams["a"][0], full.streams["a"][3]};
  ragged.x = Matrix(2, 1);
  ragged.x << full.x(0, 0), full.x(3, 0);

  const AssembledSubject a = assemble_ssm(spec, ragged, psi);
  const Transition gap = gap_transition(Vector(psi.T_diag[0]).asDiagonal().toDenseMatrix(), psi.c,
                                        psi.Q, 2);
  CHECK((a.model.base.transition[0].T - gap.T).norm() <= 1e-14);
  CHECK((a.model.base.transition[0].Q - gap.Q).norm() <= 1e-14);
  CHECK(std::abs(gaussian_loglik(spec, ragged, psi) - gaussian_loglik(spec, full, psi)) <= 1e-10);
}

TEST_CASE("smoothed states of an all-Gaussian subject equal the Kalman smoother") {
  std::mt19937_64 rng(4);
  const MrssSpec spec = gaussian_spec();
  const ParameterSet psi = random_params(spec, rng);
  const SubjectData subj = random_subject(spec, rng, grid(7));
  const StatePosterior post = smoothed_states(spec, subj, psi);
  const AssembledSubject a = assemble_ssm(spec, subj, psi);
  const SmootherOutput sm = kalman_smoother(a.model.base, kalman_filter(a.model.base, a.z));
  for (int i = 0; i < 7; ++i) {
    CHECK((post.mean[i] - sm.alpha_hat[i]).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((post.var[i] - sm.V[i].diagonal()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("zero state noise with a known start: smoothed states follow the deterministic path") {
  std::mt19937_64 rng(6);
  MrssSpec spec = gaussian_spec();
  spec.initial.diffuse = false;
  spec.initial.mean = (Vector(2) << 1.5, -0.5).finished();
  spec.initial.cov = Matrix::Zero(2, 2);
  ParameterSet psi = random_params(spec, rng);
  psi.Q.setZero();
  const SubjectData subj = random_subject(spec, rng, grid(6));
  const StatePosterior post = smoothed_states(spec, subj, psi);
  Vector alpha = spec.initial.mean;
  for (int i = 0; i < 6; ++i) {
    CHECK((post.mean[i] - alpha).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(post.var[i].cwiseAbs().maxCoeff() <= 1e-10);
    alpha = psi.T_diag[0].cwiseProduct(alpha) + psi.c;
  }
}

TEST_CASE("one-state Bernoulli posterior mean is close to quadrature") {
  MrssSpec spec;
  spec.channels = {{"B1", Role::Phenotype, ChannelFamily::bernoulli(), ""},
                   {"B2", Role::Phenotype, ChannelFamily::bernoulli(), ""}};
  spec.states = {{"v", StateKind::Health}};
  spec.groups = {{"all", {}, {}, true}};
  spec.loading = {{{CellKind::Free, 1.0, ""}}, {{CellKind::Free, 0.5, ""}}};
  spec.initial.diffuse = false;
  spec.initial.mean = Vector::Zero(1);
  spec.initial.cov = Matrix::Ones(1, 1);
  spec.validate();
  ParameterSet psi;
  psi.lambda = (Matrix(2, 1) << 1.0, 0.5).finished();
  psi.beta = Matrix(2, 0);
  psi.T_diag = {Vector::Constant(1, 0.5)};
  psi.c = Vector::Zero(1);
  psi.Q = Matrix::Ones(1, 1);
  psi.H_diag = Vector::Ones(2);
  SubjectData subj;
  subj.id = "q";
  subj.group = "all";
  subj.times = {1, 2};
  subj.z = {(Vector(2) << 1.0, 0.0).finished(), (Vector(2) << 0.0, 1.0).finished()};
  const StatePosterior post = smoothed_states(spec, subj, psi);

  const oracle::Rule r = oracle::gauss_hermite(60);
  auto loglik = [&](double a, int t) {
    double s = 0.0;
    for (int k = 0; k < 2; ++k)
      s += log_density(ChannelFamily::bernoulli(), subj.z[t](k), psi.lambda(k, 0) * a);
    return s;
  };
  double norm = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const double a1 = std::sqrt(2.0) * r.nodes[i];
    for (std::size_t j = 0; j < r.nodes.size(); ++j) {
      const double a2 = 0.5 * a1 + std::sqrt(2.0) * r.nodes[j];
      const double wgt = r.weights[i] * r.weights[j] * std::exp(loglik(a1, 0) + loglik(a2, 1));
      norm += wgt;
      m1 += wgt * a1;
      m2 += wgt * a2;
    }
  }
  CHECK(std::abs(post.mean[0](0) - m1 / norm) <= 0.02);
  CHECK(std::abs(post.mean[1](0) - m2 / norm) <= 0.02);
}

TEST_CASE("forecast at horizon 0 is the filtered signal; random walk without noise stays there") {
  std::mt19937_64 rng(8);
  const MrssSpec spec = gaussian_spec();
  ParameterSet psi = random_params(spec, rng);
  psi.T_diag[0].setOnes();
  psi.c.setZero();
  psi.Q.setZero();
  const SubjectData subj = random_subject(spec, rng, grid(5));
  const auto f0 = forecast(spec, subj, psi, 0, {});
  const AssembledSubject a = assemble_ssm(spec, subj, psi);
  const FilterOutput filt = kalman_filter(a.model.base, a.z);
  const Vector signal = a.model.base.loading[4] * filt.a_filt[4] + a.model.base.offset[4];
  REQUIRE(f0.size() == 1);
  CHECK((f0[0].theta - signal).cwiseAbs().maxCoeff() <= 1e-12);

  Scenario scn;
  scn.streams["a"] = {subj.streams.at("a")[4]};
  scn.x = subj.x.row(4);
  const auto f1 = forecast(spec, subj, psi, 1, scn);
  CHECK(f1[0].time == 6);
  CHECK((f1[0].theta - f0[0].theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("long-horizon forecast of a stationary scalar state reaches its fixed point") {
  MrssSpec spec;
  spec.channels = {{"G1", Role::Phenotype, ChannelFamily::gaussian(1.0), ""},
                   {"G2", Role::Phenotype, ChannelFamily::gaussian(1.0), ""}};
  spec.states = {{"v", StateKind::Health}};
  spec.covariates = {"X"};
  spec.groups = {{"all", {}, {}, true}};
  spec.loading = {{{CellKind::Free, 1.0, ""}}, {{CellKind::Free, 1.0, ""}}};
  ParameterSet psi;
  psi.lambda = (Matrix(2, 1) << 2.0, -1.0).finished();
  psi.beta = (Matrix(2, 1) << 0.5, 1.5).finished();
  psi.T_diag = {Vector::Constant(1, 0.5)};
  psi.c = Vector::Constant(1, 1.0);
  psi.Q = Matrix::Constant(1, 1, 0.3);
  psi.H_diag = Vector::Ones(2);
  SubjectData subj;
  subj.id = "f";
  subj.group = "all";
  subj.times = {1, 2};
  subj.z = {(Vector(2) << 0.3, 0.1).finished(), (Vector(2) << -0.2, 0.4).finished()};
  subj.x = Matrix::Zero(2, 1);
  Scenario scn;
  scn.x = Matrix::Constant(200, 1, 2.0);
  const auto f = forecast(spec, subj, psi, 200, scn);
  const Vector expect = psi.lambda.col(0) * (1.0 / (1.0 - 0.5)) + psi.beta * 2.0;
  CHECK((f.back().theta - expect).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(f.back().upper(0) > f.back().lower(0));
}

TEST_CASE("incomplete forecast scenario names every missing column") {
  std::mt19937_64 rng(9);
  const MrssSpec spec = gaussian_spec();
  const ParameterSet psi = random_params(spec, rng);
  const SubjectData subj = random_subject(spec, rng, grid(4));
  try {
    forecast(spec, subj, psi, 2, {});
    FAIL("expected ScenarioIncomplete");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScenarioIncomplete);
    const std::string msg = e.detail();
    CHECK(msg.find("a") != std::string::npos);
    CHECK(msg.find("X") != std::string::npos);
  }
}

TEST_CASE("one-step-ahead forecasts equal forecasts from each data prefix") {
  std::mt19937_64 rng(10);
  const MrssSpec spec = gaussian_spec();
  const ParameterSet psi = random_params(spec, rng);
  const SubjectData subj = random_subject(spec, rng, {1, 2, 4, 5});
  const auto seq = one_step_ahead(spec, subj, psi);
  REQUIRE(seq.size() == 3);
  Scenario scn;
  scn.streams["a"].assign(2, subj.streams.at("a")[2]);
  scn.x = subj.x.row(2).replicate(2, 1);
  const auto direct = forecast(spec, subj.prefix(2), psi, 2, scn);
  CHECK(seq[1].time == 4);
  CHECK((seq[1].theta - direct.back().theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("treatment effect equals treatment loadings times smoothed treatment state") {
  std::mt19937_64 rng(12);
  const MrssSpec spec = gaussian_spec();
  ParameterSet psi = random_params(spec, rng);
  const SubjectData subj = random_subject(spec, rng, grid(6));
  const StatePosterior post = smoothed_states(spec, subj, psi);
  const Vector effect = predicted_treatment_effect(spec, subj, psi, 3);
  for (int k = 0; k < 3; ++k) {
    const double expect = spec.loading[k][0].kind == CellKind::Zero ? 0.0
                                                                    : psi.lambda(k, 0) * post.mean[2](0);
    CHECK(std::abs(effect(k) - expect) <= 1e-10);
  }
  psi.lambda(1, 0) = 0.0;
  CHECK(predicted_treatment_effect(spec, subj, psi, 3)(1) == 0.0);
  CHECK(std::isfinite(predicted_treatment_effect(spec, subj, psi, 9)(2)));
  CHECK_THROWS_AS(predicted_treatment_effect(spec, subj, psi, 0), Error);
}

TEST_CASE("untreated group: fewer states, dropped channels and no treatment effect") {
  std::mt19937_64 rng(13);
  MrssSpec spec = gaussian_spec();
  spec.groups = {{"treated", {}, {}, true}, {"control", {"v"}, {"G2", "G3"}, false}};
  spec.validate();
  const ParameterSet psi = random_params(spec, rng);
  SubjectData subj = random_subject(spec, rng, grid(5));
  subj.group = "control";
  const AssembledSubject a = assemble_ssm(spec, subj, psi);
  CHECK(a.states == std::vector<int>{1});
  CHECK(a.model.base.n_state() == 1);
  CHECK(a.model.base.transition[0].T(0, 0) == psi.T_diag[1](1));
  for (const auto& zt : a.z) CHECK(std::isnan(zt(0)));
  const StatePosterior post = smoothed_states(spec, subj, psi);
  CHECK(std::isnan(post.mean[0](0)));
  CHECK(std::isfinite(post.mean[0](1)));
  try {
    predicted_treatment_effect(spec, subj, psi, 2);
    FAIL("expected UntreatedGroup");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UntreatedGroup);
  }
  subj.group = "nobody";
  try {
    assemble_ssm(spec, subj, psi);
    FAIL("expected UnknownGroup");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownGroup);
  }
}

TEST_CASE("constant binary channel is dropped from the subject with a warning") {
  sim::SimConfig cfg;
  cfg.N = 1;
  cfg.T_len = 6;
  sim::SimDataset data = sim::generate_dataset(cfg);
  for (auto& zt : data.subjects[0].z) zt(0) = 1.0;
  const MrssSpec spec = sim::simulation_spec();
  const AssembledSubject a = assemble_ssm(spec, data.subjects[0], sim::true_parameters(spec));
  REQUIRE(a.warnings.size() == 1);
  CHECK(a.warnings[0].find("Y1") != std::string::npos);
  for (const auto& zt : a.z) CHECK(std::isnan(zt(0)));
}

TEST_CASE("spec and data validation") {
  MrssSpec spec = gaussian_spec();
  spec.states.push_back({"v2", StateKind::Health});
  for (auto& row : spec.loading) row.push_back({});
  CHECK_THROWS_AS(spec.validate(), Error);  // three states for three channels

  spec = gaussian_spec();
  spec.loading[0][1].gate = "morning";
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.streams = {"morning"};
  CHECK_NOTHROW(spec.validate());

  spec = gaussian_spec();
  std::mt19937_64 rng(14);
  SubjectData subj = random_subject(spec, rng, grid(3));
  subj.streams["a"][1] = 0.5;
  try {
    subj.validate(spec);
    FAIL("expected UnsupportedValue");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedValue);
  }
  subj = random_subject(spec, rng, {1, 3, 2});
  CHECK_THROWS_AS(subj.validate(spec), Error);

  ParameterSet psi = random_params(spec, rng);
  psi.beta = Matrix::Zero(3, 2);
  try {
    psi.check_layout(spec);
    FAIL("expected LayoutMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LayoutMismatch);
  }
}
