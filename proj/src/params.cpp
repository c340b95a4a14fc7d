#include "mrss/params.hpp"

#include <algorithm>
#include <cmath>

#include "mrss/error.hpp"

namespace mrss {

namespace {

double to_unbounded(double t) {
  const double r = std::clamp(t / kTransitionBound, -1.0 + 1e-12, 1.0 - 1e-12);
  return std::atanh(r);
}

double to_bounded(double u) { return kTransitionBound * std::tanh(u); }

bool is_gaussian(const MrssSpec& spec, int k) {
  return spec.channels[k].family.kind == Family::Gaussian;
}

// Lower-triangular factor with solved entries for independent pairs.
Matrix complete_factor(const MrssSpec& spec, Matrix L) {
  const int w = static_cast<int>(L.rows());
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < i; ++j) {
      if (!spec.is_q_independent(i, j)) continue;
      double s = 0.0;
      for (int k = 0; k < j; ++k) s += L(i, k) * L(j, k);
      L(i, j) = -s / L(j, j);
    }
  }
  return L;
}

Matrix q_factor(const Matrix& Q) {
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() == Eigen::Success) {
    Matrix L = llt.matrixL();
    if ((L.diagonal().array() > 0).all()) return L;
  }
  const double ridge = 1e-10 * std::max(1.0, Q.diagonal().maxCoeff());
  Eigen::LLT<Matrix> jittered(Q + ridge * Matrix::Identity(Q.rows(), Q.cols()));
  if (jittered.info() != Eigen::Success)
    throw Error(ErrorCode::Validation, "state noise covariance is not positive semi-definite");
  return jittered.matrixL();
}

}  // namespace

void ParameterSet::check_layout(const MrssSpec& spec) const {
  const int p = spec.n_channels(), w = spec.n_states(), q = spec.n_covariates();
  bool ok = lambda.rows() == p && lambda.cols() == w && beta.rows() == p && beta.cols() == q &&
            static_cast<int>(T_diag.size()) == spec.n_groups() && c.size() == w &&
            Q.rows() == w && Q.cols() == w && H_diag.size() == p;
  for (const auto& t : T_diag) ok = ok && t.size() == w;
  if (!ok) throw Error(ErrorCode::LayoutMismatch, "parameter shapes do not match the model layout");
}

const char* block_name(Block b) {
  switch (b) {
    case Block::LambdaBeta: return "lambda_beta";
    case Block::Transition: return "transition";
    case Block::Intercept: return "intercept";
    case Block::Variance: return "variance";
  }
  return "?";
}

ParameterMask parameter_mask(const MrssSpec& spec) {
  const int p = spec.n_channels(), w = spec.n_states(), q = spec.n_covariates();
  ParameterMask mask;
  mask.lambda_free.assign(p, std::vector<char>(w, 0));
  mask.beta_free.assign(p, std::vector<char>(q, 0));
  mask.q_free.assign(w, std::vector<char>(w, 0));
  mask.t_free.assign(spec.n_groups(), std::vector<char>(w, 0));
  mask.h_free.assign(p, 0);
  for (int k = 0; k < p; ++k) {
    for (int s = 0; s < w; ++s) mask.lambda_free[k][s] = spec.loading[k][s].kind == CellKind::Free;
    for (int j = 0; j < q; ++j) mask.beta_free[k][j] = spec.is_beta_free(k, j);
    mask.h_free[k] = is_gaussian(spec, k);
  }
  for (int i = 0; i < w; ++i)
    for (int j = 0; j <= i; ++j) mask.q_free[i][j] = i == j || !spec.is_q_independent(i, j);
  for (int g = 0; g < spec.n_groups(); ++g)
    for (int s : spec.active_states(g)) mask.t_free[g][s] = 1;
  return mask;
}

bool mask_contains(const ParameterMask& full, const ParameterMask& nested) {
  auto grid = [](const std::vector<std::vector<char>>& a, const std::vector<std::vector<char>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != b[i].size()) return false;
      for (std::size_t j = 0; j < a[i].size(); ++j)
        if (b[i][j] && !a[i][j]) return false;
    }
    return true;
  };
  if (full.h_free.size() != nested.h_free.size()) return false;
  for (std::size_t k = 0; k < full.h_free.size(); ++k)
    if (nested.h_free[k] && !full.h_free[k]) return false;
  return grid(full.lambda_free, nested.lambda_free) && grid(full.beta_free, nested.beta_free) &&
         grid(full.q_free, nested.q_free) && grid(full.t_free, nested.t_free);
}

int block_size(const MrssSpec& spec, Block block) {
  const ParameterMask mask = parameter_mask(spec);
  auto count = [](const std::vector<std::vector<char>>& g) {
    int n = 0;
    for (const auto& row : g) n += static_cast<int>(std::count(row.begin(), row.end(), 1));
    return n;
  };
  switch (block) {
    case Block::LambdaBeta: return count(mask.lambda_free) + count(mask.beta_free);
    case Block::Transition: return count(mask.t_free);
    case Block::Intercept: return spec.n_states();
    case Block::Variance:
      return count(mask.q_free) +
             static_cast<int>(std::count(mask.h_free.begin(), mask.h_free.end(), 1));
  }
  return 0;
}

int n_params(const MrssSpec& spec) {
  return block_size(spec, Block::LambdaBeta) + block_size(spec, Block::Transition) +
         block_size(spec, Block::Intercept) + block_size(spec, Block::Variance);
}

Vector pack(const MrssSpec& spec, const ParameterSet& psi, Block block) {
  const ParameterMask mask = parameter_mask(spec);
  std::vector<double> u;
  const int p = spec.n_channels(), w = spec.n_states();
  switch (block) {
    case Block::LambdaBeta:
      for (int k = 0; k < p; ++k)
        for (int s = 0; s < w; ++s)
          if (mask.lambda_free[k][s]) u.push_back(psi.lambda(k, s));
      for (int k = 0; k < p; ++k)
        for (int j = 0; j < spec.n_covariates(); ++j)
          if (mask.beta_free[k][j]) u.push_back(psi.beta(k, j));
      break;
    case Block::Transition:
      for (int g = 0; g < spec.n_groups(); ++g)
        for (int s = 0; s < w; ++s)
          if (mask.t_free[g][s]) u.push_back(to_unbounded(psi.T_diag[g](s)));
      break;
    case Block::Intercept:
      for (int s = 0; s < w; ++s) u.push_back(psi.c(s));
      break;
    case Block::Variance: {
      const Matrix L = q_factor(psi.Q);
      for (int i = 0; i < w; ++i)
        for (int j = 0; j <= i; ++j)
          if (mask.q_free[i][j]) u.push_back(i == j ? std::log(L(i, i)) : L(i, j));
      for (int k = 0; k < p; ++k)
        if (mask.h_free[k]) u.push_back(std::log(psi.H_diag(k)));
      break;
    }
  }
  return Eigen::Map<Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
}

void unpack(const MrssSpec& spec, Block block, const Vector& u, ParameterSet& psi) {
  if (u.size() != block_size(spec, block))
    throw Error(ErrorCode::DimensionMismatch, std::string("wrong coordinate count for block ") +
                                                  block_name(block));
  const ParameterMask mask = parameter_mask(spec);
  const int p = spec.n_channels(), w = spec.n_states();
  Eigen::Index pos = 0;
  switch (block) {
    case Block::LambdaBeta:
      for (int k = 0; k < p; ++k)
        for (int s = 0; s < w; ++s)
          if (mask.lambda_free[k][s]) psi.lambda(k, s) = u(pos++);
      for (int k = 0; k < p; ++k)
        for (int j = 0; j < spec.n_covariates(); ++j)
          if (mask.beta_free[k][j]) psi.beta(k, j) = u(pos++);
      break;
    case Block::Transition:
      for (int g = 0; g < spec.n_groups(); ++g)
        for (int s = 0; s < w; ++s)
          if (mask.t_free[g][s]) psi.T_diag[g](s) = to_bounded(u(pos++));
      break;
    case Block::Intercept:
      for (int s = 0; s < w; ++s) psi.c(s) = u(pos++);
      break;
    case Block::Variance: {
      Matrix L = Matrix::Zero(w, w);
      for (int i = 0; i < w; ++i)
        for (int j = 0; j <= i; ++j)
          if (mask.q_free[i][j]) L(i, j) = i == j ? std::exp(u(pos++)) : u(pos++);
      psi.Q = q_from_factor(spec, L);
      for (int k = 0; k < p; ++k)
        if (mask.h_free[k]) psi.H_diag(k) = std::exp(u(pos++));
      break;
    }
  }
}

Matrix q_from_factor(const MrssSpec& spec, const Matrix& factor) {
  const Matrix L = complete_factor(spec, factor.triangularView<Eigen::Lower>());
  Matrix Q = L * L.transpose();
  for (const auto& [a, b] : spec.q_independent) Q(a, b) = Q(b, a) = 0.0;
  return 0.5 * (Q + Q.transpose());
}

ParameterSet heuristic_seed(const MrssSpec& spec, const std::vector<SubjectData>& subjects) {
  const int p = spec.n_channels(), w = spec.n_states(), q = spec.n_covariates();
  ParameterSet psi;
  psi.lambda = Matrix::Zero(p, w);
  for (int k = 0; k < p; ++k)
    for (int s = 0; s < w; ++s) {
      const LoadingCell& cell = spec.loading[k][s];
      if (cell.kind == CellKind::Fixed) psi.lambda(k, s) = cell.value;
      if (cell.kind == CellKind::Free) psi.lambda(k, s) = 0.1;
    }
  psi.beta = Matrix::Zero(p, q);
  psi.T_diag.assign(spec.n_groups(), Vector::Constant(w, 0.5));
  psi.c = Vector::Zero(w);
  psi.Q = Matrix::Identity(w, w);
  psi.H_diag = Vector::Ones(p);

  for (int k = 0; k < p; ++k) {
    std::vector<int> cols;
    for (int j = 0; j < q; ++j)
      if (spec.is_beta_free(k, j)) cols.push_back(j);
    std::vector<double> y;
    std::vector<Vector> rows;
    for (const auto& subj : subjects) {
      for (int i = 0; i < subj.n_time(); ++i) {
        const double zi = subj.z[i](k);
        if (std::isnan(zi)) continue;
        y.push_back(link_transform(spec.channels[k].family.kind, zi));
        Vector r(cols.size() + 1);
        r(0) = 1.0;
        for (std::size_t j = 0; j < cols.size(); ++j) r(j + 1) = subj.x(i, cols[j]);
        rows.push_back(r);
      }
    }
    const int n = static_cast<int>(y.size());
    if (n <= static_cast<int>(cols.size()) + 1) continue;
    Matrix X(n, cols.size() + 1);
    Vector Y(n);
    for (int i = 0; i < n; ++i) {
      X.row(i) = rows[i].transpose();
      Y(i) = y[i];
    }
    const Vector coef = X.colPivHouseholderQr().solve(Y);
    for (std::size_t j = 0; j < cols.size(); ++j) psi.beta(k, cols[j]) = coef(j + 1);
    if (is_gaussian(spec, k)) {
      const double var = (Y - X * coef).squaredNorm() / std::max(1, n - static_cast<int>(coef.size()));
      psi.H_diag(k) = std::max(var, 1e-3);
    }
  }
  return psi;
}

void canonicalize_signs(const MrssSpec& spec, ParameterSet& psi) {
  const int p = spec.n_channels(), w = spec.n_states();
  for (int s = 0; s < w; ++s) {
    bool anchored = false;
    int first_free = -1;
    for (int k = 0; k < p; ++k) {
      const LoadingCell& cell = spec.loading[k][s];
      if (cell.kind == CellKind::Fixed && cell.value != 0.0) anchored = true;
      if (cell.kind == CellKind::Free && first_free < 0) first_free = k;
    }
    if (!spec.initial.diffuse && spec.initial.mean.size() == w && spec.initial.mean(s) != 0.0)
      anchored = true;
    if (anchored || first_free < 0 || psi.lambda(first_free, s) >= 0.0) continue;
    psi.lambda.col(s) *= -1.0;
    psi.c(s) = -psi.c(s);
    for (int j = 0; j < w; ++j) {
      if (j == s) continue;
      psi.Q(s, j) = -psi.Q(s, j);
      psi.Q(j, s) = -psi.Q(j, s);
    }
  }
}

}  // namespace mrss
