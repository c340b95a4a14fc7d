#include "mrss/simbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "mrss/error.hpp"
#include "mrss/expfam.hpp"

namespace mrss::sim {

namespace {

constexpr double kLogitClamp = 1e-6;

std::string subject_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%03d", i + 1);
  return buf;
}

}  // namespace

void SimConfig::validate() const {
  if (N < 1) throw Error(ErrorCode::Validation, "N: must be at least 1");
  if (T_len < 2) throw Error(ErrorCode::Validation, "T: must be at least 2");
  if (!(p_treat >= 0.0 && p_treat <= 1.0))
    throw Error(ErrorCode::Validation, "p: must lie in [0, 1]");
  if (!(split > 0.0 && split <= 1.0)) throw Error(ErrorCode::Validation, "split: must lie in (0, 1]");
  if (!(count_offset > 0.0)) throw Error(ErrorCode::Validation, "count_offset: must be positive");
}

int SimConfig::train_length() const {
  return std::max(2, static_cast<int>(std::ceil(split * T_len - 1e-9)));
}

SimDataset generate_dataset(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution treat(cfg.p_treat);
  std::binomial_distribution<int> x2_law(4, 0.5);
  const double x1_sd = cfg.x1_sd_convention ? 2.0 : std::sqrt(2.0);
  const Vector T_diag = (Vector(2) << 0.6, 0.8).finished();
  const Vector c = (Vector(2) << 1.2, 2.0).finished();
  const Vector q_sd = (Vector(2) << 1.0, std::sqrt(1.5)).finished();

  SimDataset out;
  for (int i = 0; i < cfg.N; ++i) {
    SubjectData subj;
    SubjectTruth truth;
    subj.id = subject_name(i);
    subj.group = "all";
    const double x1 = -5.0 + x1_sd * normal(rng);
    const double x2 = x2_law(rng);
    subj.x.resize(cfg.T_len, 3);
    std::vector<double> a(cfg.T_len);
    Vector alpha = Vector::Constant(2, kInitialState);
    for (int t = 0; t < cfg.T_len; ++t) {
      if (t > 0)
        for (int s = 0; s < 2; ++s) alpha(s) = T_diag(s) * alpha(s) + c(s) + q_sd(s) * normal(rng);
      a[t] = treat(rng) ? 1.0 : 0.0;
      const double time = t + 1;
      const double fixed = kTrueBeta1 * x1 + kTrueBeta2 * x2 + kTrueTrend * time;
      Vector mu(3);
      mu(0) = -0.5 * a[t] * alpha(0) + 0.1 * alpha(1) + fixed;
      mu(1) = 0.2 * a[t] * alpha(0) + 0.2 * alpha(1) + fixed;
      mu(2) = -a[t] * alpha(0) + alpha(1) + fixed;
      Vector z(3);
      z(0) = std::bernoulli_distribution(expit(mu(0)))(rng) ? 1.0 : 0.0;
      z(1) = static_cast<double>(std::poisson_distribution<long>(std::exp(mu(1)))(rng));
      z(2) = mu(2) + normal(rng);
      subj.times.push_back(t + 1);
      subj.z.push_back(z);
      subj.x.row(t) << x1, x2, time;
      truth.alpha.push_back(alpha);
      truth.mu.push_back(mu);
    }
    subj.streams["a"] = a;
    truth.a = a;
    out.subjects.push_back(std::move(subj));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

MrssSpec simulation_spec(int n_b, int n_v) {
  if (n_b < 0 || n_v < 0 || n_b + n_v < 1)
    throw Error(ErrorCode::Validation, "at least one latent state is required");
  std::vector<ChannelSpec> channels = {
      {"Y1", Role::Phenotype, ChannelFamily::bernoulli(), "trt"},
      {"Y2", Role::Phenotype, ChannelFamily::poisson(), "trt"},
      {"Y3", Role::Phenotype, ChannelFamily::gaussian(1.0), "trt"},
  };
  std::vector<StateSpec> states;
  for (int i = 0; i < n_b; ++i) states.push_back({"b" + std::to_string(i + 1), StateKind::Treatment});
  for (int i = 0; i < n_v; ++i) states.push_back({"v" + std::to_string(i + 1), StateKind::Health});
  MrssSpec spec = MrssSpec::default_layout(channels, states, {{"trt", "a"}}, {"X1", "X2", "t"});
  for (int s = 0; s < spec.n_states(); ++s) {
    const bool treatment = spec.states[s].kind == StateKind::Treatment;
    const bool first = s == 0 || s == n_b;
    LoadingCell& cell = spec.loading[first ? 2 : 1][s];
    cell.kind = CellKind::Fixed;
    cell.value = first && treatment ? -1.0 : 1.0;
  }
  spec.initial.diffuse = false;
  spec.initial.mean = Vector::Constant(spec.n_states(), kInitialState);
  spec.initial.cov = Matrix::Zero(spec.n_states(), spec.n_states());
  spec.validate();
  return spec;
}

ParameterSet true_parameters(const MrssSpec& spec) {
  if (spec.n_states() != 2 || spec.n_channels() != 3 || spec.n_covariates() != 3)
    throw Error(ErrorCode::LayoutMismatch, "true parameters need the one-b one-v layout");
  ParameterSet psi;
  psi.lambda.resize(3, 2);
  psi.lambda << -0.5, 0.1, 0.2, 0.2, -1.0, 1.0;
  psi.beta.resize(3, 3);
  for (int k = 0; k < 3; ++k) psi.beta.row(k) << kTrueBeta1, kTrueBeta2, kTrueTrend;
  psi.T_diag = {(Vector(2) << 0.6, 0.8).finished()};
  psi.c = (Vector(2) << 1.2, 2.0).finished();
  psi.Q = (Vector(2) << 1.0, 1.5).finished().asDiagonal();
  psi.H_diag = Vector::Ones(3);
  return psi;
}

std::vector<std::pair<int, int>> candidate_dimensions() {
  return {{0, 1}, {1, 0}, {1, 1}, {0, 2}, {2, 0}};
}

Matrix var_transform(const SubjectData& subj, double count_offset) {
  Matrix y(subj.n_time(), 3);
  for (int t = 0; t < subj.n_time(); ++t) {
    y(t, 0) = subj.z[t](0);
    y(t, 1) = std::log(subj.z[t](1) + count_offset);
    y(t, 2) = subj.z[t](2);
  }
  return y;
}

VarFit fit_var(const Matrix& y, const std::vector<double>& a, bool min_norm) {
  const int n = static_cast<int>(y.rows()) - 1;
  const int p = static_cast<int>(y.cols());
  if (static_cast<int>(a.size()) != y.rows())
    throw Error(ErrorCode::DimensionMismatch, "treatment series length differs from the response");
  if (n < 5) throw Error(ErrorCode::Validation, "VAR fit needs at least 5 transitions");
  Matrix X(n, p + 2);
  for (int t = 0; t < n; ++t) {
    X(t, 0) = 1.0;
    X.row(t).segment(1, p) = y.row(t);
    X(t, p + 1) = a[t + 1];
  }
  const Matrix Y = y.bottomRows(n);
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  VarFit fit;
  Matrix B;  // (p + 2) x p
  if (qr.rank() == X.cols()) {
    B = qr.solve(Y);
  } else if (min_norm) {
    B = Eigen::CompleteOrthogonalDecomposition<Matrix>(X).solve(Y);
    fit.rank_deficient = true;
  } else {
    throw Error(ErrorCode::RankDeficient, "VAR design is singular (constant channel or treatment)");
  }
  fit.C = B.row(0).transpose();
  fit.A = B.bottomRows(p + 1).transpose();
  const Matrix E = Y - X * B;
  fit.sigma_u = E.transpose() * E / std::max(1, n - static_cast<int>(X.cols()));
  return fit;
}

VarFit pool_var(const std::vector<VarFit>& fits) {
  if (fits.empty()) throw Error(ErrorCode::Validation, "no VAR fits to pool");
  VarFit out = fits.front();
  for (std::size_t i = 1; i < fits.size(); ++i) {
    out.A += fits[i].A;
    out.C += fits[i].C;
    out.sigma_u += fits[i].sigma_u;
  }
  const double n = static_cast<double>(fits.size());
  out.A /= n;
  out.C /= n;
  out.sigma_u /= n;
  return out;
}

Vector var_predict(const VarFit& fit, const Vector& y_prev, double a_t) {
  const int p = static_cast<int>(fit.C.size());
  return fit.C + fit.A.leftCols(p) * y_prev + fit.A.col(p) * a_t;
}

Vector var_to_natural(const Vector& pred, ClampCount& clamps) {
  Vector out = pred;
  double prob = pred(0);
  if (!(prob >= kLogitClamp && prob <= 1.0 - kLogitClamp)) {
    ++clamps.clamped;
    prob = std::clamp(prob, kLogitClamp, 1.0 - kLogitClamp);
  }
  out(0) = logit(prob);
  return out;
}

PredictionErrors prediction_errors(const std::vector<Vector>& truth,
                                   const std::vector<Vector>& predictions, int train) {
  const int m = static_cast<int>(truth.size());
  if (static_cast<int>(predictions.size()) != m)
    throw Error(ErrorCode::DimensionMismatch, "prediction and truth lengths differ");
  if (train < 2 || train > m) throw Error(ErrorCode::Validation, "training length out of range");
  const int p = static_cast<int>(truth.front().size());
  PredictionErrors out{Vector::Zero(p), Vector::Zero(p)};
  for (int i = 1; i < m; ++i) {
    const Vector sq = (predictions[i] - truth[i]).array().square();
    (i < train ? out.in_sample : out.out_sample) += sq;
  }
  out.in_sample /= train - 1;
  if (m > train)
    out.out_sample /= m - train;
  else
    out.out_sample.setConstant(NAN);
  return out;
}

Vector pearson_residual_mse(const std::vector<Vector>& z, const std::vector<Vector>& mean,
                            const std::vector<Vector>& variance) {
  if (z.empty() || z.size() != mean.size() || z.size() != variance.size())
    throw Error(ErrorCode::DimensionMismatch, "Pearson residual inputs differ in length");
  const int p = static_cast<int>(z.front().size());
  Vector sum = Vector::Zero(p);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(p);
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (int k = 0; k < p; ++k) {
      if (std::isnan(z[i](k))) continue;
      if (!(variance[i](k) > 0.0))
        throw Error(ErrorCode::ZeroPredVariance, "predictive variance is zero for channel " +
                                                     std::to_string(k));
      const double r = (z[i](k) - mean[i](k)) / std::sqrt(variance[i](k));
      sum(k) += r * r;
      ++count(k);
    }
  }
  for (int k = 0; k < p; ++k) sum(k) = count(k) > 0 ? sum(k) / count(k) : NAN;
  return sum;
}

ReplicationResult run_replication(const SimConfig& cfg, const ReplicationOptions& opts) {
  const SimDataset data = generate_dataset(cfg);
  FitConfig fc = opts.fit;
  fc.seed = cfg.seed;
  ReplicationResult out;
  out.seed = cfg.seed;
  using Clock = std::chrono::steady_clock;
  auto since = [](Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  for (const auto& [n_b, n_v] : opts.dims) {
    const auto t0 = Clock::now();
    FitResult fit = cbcd_fit(simulation_spec(n_b, n_v), data.subjects, fc);
    out.candidates.push_back({n_b, n_v, std::move(fit), since(t0)});
  }
  if (!opts.prediction) return out;

  const int train = cfg.train_length();
  const MrssSpec spec = simulation_spec();
  std::vector<SubjectData> prefix;
  for (const auto& s : data.subjects) prefix.push_back(s.prefix(train));
  const auto t0 = Clock::now();
  out.prefix_fit = cbcd_fit(spec, prefix, fc);
  out.prefix_seconds = since(t0);

  const int n = static_cast<int>(data.subjects.size());
  std::vector<VarFit> fits;
  for (const auto& s : data.subjects) {
    const Matrix y = var_transform(s, cfg.count_offset).topRows(train);
    const std::vector<double>& a = s.streams.at("a");
    fits.push_back(fit_var(y, std::vector<double>(a.begin(), a.begin() + train), true));
    if (fits.back().rank_deficient) ++out.var_rank_deficient;
  }
  const VarFit pooled = pool_var(fits);

  ClampCount clamps;
  auto accumulate = [&](PredictionErrors& sum, const PredictionErrors& e) {
    if (sum.in_sample.size() == 0) {
      sum = e;
    } else {
      sum.in_sample += e.in_sample;
      sum.out_sample += e.out_sample;
    }
  };
  for (int i = 0; i < n; ++i) {
    const SubjectData& s = data.subjects[i];
    const std::vector<Vector>& mu = data.truth[i].mu;
    const int m = s.n_time();
    const std::vector<Forecast> f = one_step_ahead(spec, s, out.prefix_fit.psi_hat, 1, fc.mode);
    std::vector<Vector> pm(m, Vector::Zero(3)), pv(m, Vector::Zero(3)), pp(m, Vector::Zero(3));
    const Matrix y = var_transform(s, cfg.count_offset);
    const std::vector<double>& a = s.streams.at("a");
    for (int t = 1; t < m; ++t) {
      pm[t] = f[t - 1].theta;
      pv[t] = var_to_natural(var_predict(fits[i], y.row(t - 1).transpose(), a[t]), clamps);
      pp[t] = var_to_natural(var_predict(pooled, y.row(t - 1).transpose(), a[t]), clamps);
    }
    accumulate(out.mrss, prediction_errors(mu, pm, train));
    accumulate(out.individual_var, prediction_errors(mu, pv, train));
    accumulate(out.pooled_var, prediction_errors(mu, pp, train));
  }
  for (PredictionErrors* e : {&out.mrss, &out.individual_var, &out.pooled_var}) {
    e->in_sample /= n;
    e->out_sample /= n;
  }
  out.var_clamped = clamps.clamped;
  return out;
}

}  // namespace mrss::sim
