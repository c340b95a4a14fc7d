#include "mrss/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "mrss/error.hpp"
#include "mrss/params.hpp"

namespace mrss {

namespace {

constexpr double kZ975 = 1.959963984540054;

template <typename T>
int find_named(const std::vector<T>& items, const std::string& name) {
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<int> resolve(const std::vector<std::string>& names, int n,
                         const std::function<int(const std::string&)>& lookup,
                         const std::string& what) {
  std::vector<int> out;
  if (names.empty()) {
    for (int i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  for (const auto& name : names) {
    const int idx = lookup(name);
    if (idx < 0) throw Error(ErrorCode::LayoutMismatch, "unknown " + what + " '" + name + "'");
    out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const ParameterSet& checked(const MrssSpec& spec, const ParameterSet& psi) {
  psi.check_layout(spec);
  return psi;
}

std::map<std::string, double> gates_at(const SubjectData& subj, int i) {
  std::map<std::string, double> out;
  for (const auto& [name, values] : subj.streams) out[name] = values[i];
  return out;
}

Vector covariate_offset(const ParameterSet& psi, const Matrix& x, int row) {
  if (psi.beta.cols() == 0) return Vector::Zero(psi.beta.rows());
  return psi.beta * x.row(row).transpose();
}

Matrix restrict_square(const Matrix& A, const std::vector<int>& idx) {
  Matrix out(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = A(idx[i], idx[j]);
  return out;
}

Vector restrict_vec(const Vector& a, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = a(idx[i]);
  return out;
}

Transition group_transition(const ParameterSet& psi, int group, const std::vector<int>& states) {
  Transition tr;
  tr.T = restrict_vec(psi.T_diag[group], states).asDiagonal();
  tr.c = restrict_vec(psi.c, states);
  tr.Q = restrict_square(psi.Q, states);
  return tr;
}

}  // namespace

int MrssSpec::count_states(StateKind kind) const {
  return static_cast<int>(
      std::count_if(states.begin(), states.end(), [&](const auto& s) { return s.kind == kind; }));
}

int MrssSpec::count_channels(Role role) const {
  return static_cast<int>(
      std::count_if(channels.begin(), channels.end(), [&](const auto& c) { return c.role == role; }));
}

int MrssSpec::channel_index(const std::string& name) const { return find_named(channels, name); }
int MrssSpec::state_index(const std::string& name) const { return find_named(states, name); }
int MrssSpec::group_index(const std::string& name) const { return find_named(groups, name); }

const ModalitySpec* MrssSpec::modality(const std::string& name) const {
  const int idx = find_named(modalities, name);
  return idx < 0 ? nullptr : &modalities[idx];
}

bool MrssSpec::is_beta_free(int k, int j) const {
  return beta_free.empty() || beta_free[k][j] != 0;
}

bool MrssSpec::is_q_independent(int i, int j) const {
  for (const auto& [a, b] : q_independent)
    if ((a == i && b == j) || (a == j && b == i)) return true;
  return false;
}

std::vector<std::string> MrssSpec::gate_streams() const {
  std::set<std::string> names;
  for (const auto& row : loading)
    for (const auto& cell : row)
      if (cell.kind != CellKind::Zero && !cell.gate.empty()) names.insert(cell.gate);
  return {names.begin(), names.end()};
}

std::vector<int> MrssSpec::active_states(int group) const {
  return resolve(groups.at(group).states, n_states(),
                 [this](const std::string& n) { return state_index(n); }, "state");
}

std::vector<int> MrssSpec::active_channels(int group) const {
  return resolve(groups.at(group).channels, n_channels(),
                 [this](const std::string& n) { return channel_index(n); }, "channel");
}

void MrssSpec::validate() const {
  const int p = n_channels();
  const int w = n_states();
  if (p == 0 || w == 0) throw Error(ErrorCode::Validation, "spec needs channels and states");
  if (w >= p)
    throw Error(ErrorCode::Validation,
                "state dimension must be smaller than the number of channels");
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (c.name.empty() || !seen.insert("c:" + c.name).second)
      throw Error(ErrorCode::Validation, "channel names must be unique and non-empty");
    if (!c.modality.empty() && modality(c.modality) == nullptr)
      throw Error(ErrorCode::Validation, "channel '" + c.name + "' references unknown modality '" +
                                             c.modality + "'");
    if (c.family.kind == Family::Gaussian && !(c.family.variance > 0.0))
      throw Error(ErrorCode::Validation, "Gaussian channel '" + c.name + "' needs variance > 0");
  }
  for (const auto& s : states)
    if (s.name.empty() || !seen.insert("s:" + s.name).second)
      throw Error(ErrorCode::Validation, "state names must be unique and non-empty");
  if (static_cast<int>(loading.size()) != p)
    throw Error(ErrorCode::LayoutMismatch, "loading layout needs one row per channel");
  std::set<std::string> declared;
  for (const auto& mod : modalities) declared.insert(mod.stream);
  for (const auto& name : streams) declared.insert(name);
  for (int k = 0; k < p; ++k) {
    if (static_cast<int>(loading[k].size()) != w)
      throw Error(ErrorCode::LayoutMismatch, "loading row of '" + channels[k].name +
                                                 "' needs one cell per state");
    for (const auto& cell : loading[k])
      if (cell.kind != CellKind::Zero && !cell.gate.empty() && !declared.count(cell.gate))
        throw Error(ErrorCode::Validation, "loading of '" + channels[k].name +
                                               "' is gated by undeclared stream '" + cell.gate + "'");
  }
  if (!beta_free.empty()) {
    if (static_cast<int>(beta_free.size()) != p)
      throw Error(ErrorCode::LayoutMismatch, "beta mask needs one row per channel");
    for (const auto& row : beta_free)
      if (static_cast<int>(row.size()) != n_covariates())
        throw Error(ErrorCode::LayoutMismatch, "beta mask needs one column per covariate");
  }
  for (const auto& [a, b] : q_independent)
    if (a < 0 || b < 0 || a >= w || b >= w || a == b)
      throw Error(ErrorCode::Validation, "invalid state pair in Q independence mask");
  if (groups.empty()) throw Error(ErrorCode::Validation, "at least one group is required");
  for (int g = 0; g < n_groups(); ++g) {
    if (active_states(g).empty() || active_channels(g).empty())
      throw Error(ErrorCode::Validation, "group '" + groups[g].name + "' has no states or channels");
  }
  if (!initial.diffuse) {
    if (initial.mean.size() != w || initial.cov.rows() != w || initial.cov.cols() != w)
      throw Error(ErrorCode::LayoutMismatch, "initial mean/covariance must match the states");
  } else if (!(initial.kappa >= 1e6)) {
    throw Error(ErrorCode::Validation, "diffuse kappa must be at least 1e6");
  }
}

MrssSpec MrssSpec::default_layout(std::vector<ChannelSpec> channels, std::vector<StateSpec> states,
                                  std::vector<ModalitySpec> modalities,
                                  std::vector<std::string> covariates,
                                  std::vector<GroupSpec> groups) {
  MrssSpec spec;
  spec.channels = std::move(channels);
  spec.states = std::move(states);
  spec.modalities = std::move(modalities);
  spec.covariates = std::move(covariates);
  spec.groups = groups.empty() ? std::vector<GroupSpec>{GroupSpec{"all", {}, {}, true}}
                               : std::move(groups);
  for (const auto& ch : spec.channels) {
    std::vector<LoadingCell> row;
    for (const auto& st : spec.states) {
      LoadingCell cell;
      if (st.kind == StateKind::Health) {
        cell.kind = CellKind::Free;
        cell.value = 0.1;
      } else if (ch.role == Role::Phenotype && !ch.modality.empty()) {
        cell.kind = CellKind::Free;
        cell.value = 0.1;
        cell.gate = spec.modality(ch.modality)->stream;
      }
      row.push_back(cell);
    }
    spec.loading.push_back(row);
  }
  return spec;
}

SubjectData SubjectData::prefix(int count) const {
  SubjectData out;
  out.id = id;
  out.group = group;
  out.times.assign(times.begin(), times.begin() + count);
  out.z.assign(z.begin(), z.begin() + count);
  for (const auto& [name, values] : streams)
    out.streams[name].assign(values.begin(), values.begin() + count);
  out.x = x.topRows(std::min<Eigen::Index>(count, x.rows()));
  return out;
}

void SubjectData::validate(const MrssSpec& spec) const {
  const int m = n_time();
  const std::string who = "subject " + id + ": ";
  if (m == 0) throw Error(ErrorCode::Validation, who + "no time points");
  for (int i = 1; i < m; ++i)
    if (times[i] <= times[i - 1])
      throw Error(ErrorCode::Validation, who + "time indices must be strictly increasing");
  if (static_cast<int>(z.size()) != m)
    throw Error(ErrorCode::LayoutMismatch, who + "one observation row per time point required");
  for (const auto& zt : z)
    if (zt.size() != spec.n_channels())
      throw Error(ErrorCode::LayoutMismatch, who + "observation row has wrong width");
  if (spec.n_covariates() > 0 && (x.rows() != m || x.cols() != spec.n_covariates()))
    throw Error(ErrorCode::LayoutMismatch, who + "covariate matrix must be times x covariates");
  if (spec.group_index(group) < 0)
    throw Error(ErrorCode::UnknownGroup, who + "unknown group '" + group + "'");
  for (const auto& name : spec.gate_streams()) {
    const auto it = streams.find(name);
    if (it == streams.end())
      throw Error(ErrorCode::LayoutMismatch, who + "missing indicator stream '" + name + "'");
    if (static_cast<int>(it->second.size()) != m)
      throw Error(ErrorCode::LayoutMismatch, who + "indicator stream '" + name + "' has wrong length");
    for (double v : it->second)
      if (v != 0.0 && v != 1.0)
        throw Error(ErrorCode::UnsupportedValue, who + "indicator stream '" + name +
                                                     "' must be 0/1");
  }
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < spec.n_channels(); ++k)
      if (!std::isnan(z[i](k))) {
        try {
          check_support(spec.channels[k].family, z[i](k));
        } catch (const Error& e) {
          throw Error(e.code(), who + "channel '" + spec.channels[k].name + "' at t=" +
                                    std::to_string(times[i]) + ": " + e.detail());
        }
      }
}

Matrix instantiate_loading(const MrssSpec& spec, const ParameterSet& psi,
                           const std::vector<int>& states,
                           const std::map<std::string, double>& gates) {
  const int p = spec.n_channels();
  Matrix Z = Matrix::Zero(p, states.size());
  for (int k = 0; k < p; ++k) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      const LoadingCell& cell = spec.loading[k][states[j]];
      if (cell.kind == CellKind::Zero) continue;
      double gate = 1.0;
      if (!cell.gate.empty()) {
        const auto it = gates.find(cell.gate);
        if (it == gates.end())
          throw Error(ErrorCode::ScenarioIncomplete, "missing indicator stream '" + cell.gate + "'");
        gate = it->second;
      }
      Z(k, j) = gate * psi.lambda(k, states[j]);
    }
  }
  return Z;
}

AssembledSubject assemble_ssm(const MrssSpec& spec, const SubjectData& subj,
                              const ParameterSet& psi_in) {
  const ParameterSet& psi = checked(spec, psi_in);
  const int group = spec.group_index(subj.group);
  if (group < 0) throw Error(ErrorCode::UnknownGroup, "unknown group '" + subj.group + "'");
  const int m = subj.n_time();
  const int p = spec.n_channels();

  AssembledSubject out;
  out.states = spec.active_states(group);
  const std::vector<int> channels = spec.active_channels(group);
  std::vector<char> active(p, 0);
  for (int k : channels) active[k] = 1;

  out.z = subj.z;
  for (int k = 0; k < p; ++k) {
    if (!active[k]) {
      for (auto& zt : out.z) zt(k) = NAN;
      continue;
    }
    if (spec.channels[k].family.kind != Family::Bernoulli) continue;
    int n_obs = 0;
    double first = NAN;
    bool constant = true;
    for (const auto& zt : out.z) {
      if (std::isnan(zt(k))) continue;
      if (n_obs++ == 0)
        first = zt(k);
      else if (zt(k) != first)
        constant = false;
    }
    if (n_obs > 0 && constant) {
      for (auto& zt : out.z) zt(k) = NAN;
      out.warnings.push_back("subject " + subj.id + ": binary channel '" + spec.channels[k].name +
                             "' is constant and was dropped");
    }
  }

  GaussianSsm& g = out.model.base;
  Matrix H = Matrix::Identity(p, p);
  out.model.families.reserve(p);
  for (int k = 0; k < p; ++k) {
    ChannelFamily fam = spec.channels[k].family;
    if (fam.kind == Family::Gaussian) {
      fam.variance = psi.H_diag(k);
      H(k, k) = psi.H_diag(k);
    }
    out.model.families.push_back(fam);
  }
  const Transition step = group_transition(psi, group, out.states);
  g.loading.reserve(m);
  g.offset.reserve(m);
  g.obs_cov.assign(m, H);
  g.transition.reserve(m);
  for (int i = 0; i < m; ++i) {
    g.loading.push_back(instantiate_loading(spec, psi, out.states, gates_at(subj, i)));
    g.offset.push_back(covariate_offset(psi, subj.x, i));
    const int tau = i + 1 < m ? subj.times[i + 1] - subj.times[i] - 1 : 0;
    g.transition.push_back(tau == 0 ? step : gap_transition(step.T, step.c, step.Q, tau));
  }
  const int w = static_cast<int>(out.states.size());
  if (spec.initial.diffuse) {
    g.a1 = Vector::Zero(w);
    g.P1 = Matrix::Zero(w, w);
    g.P1_diffuse = Matrix::Identity(w, w);
    g.kappa = spec.initial.kappa;
  } else {
    g.a1 = restrict_vec(spec.initial.mean, out.states);
    g.P1 = restrict_square(spec.initial.cov, out.states);
  }
  return out;
}

StatePosterior smoothed_states(const MrssSpec& spec, const SubjectData& subj,
                               const ParameterSet& psi, const ModeOptions& opts) {
  const AssembledSubject a = assemble_ssm(spec, subj, psi);
  const ModeResult mode = find_mode(a.model, a.z, opts);
  StatePosterior out;
  out.times = subj.times;
  const int w = spec.n_states();
  for (int i = 0; i < subj.n_time(); ++i) {
    Vector mean = Vector::Constant(w, NAN);
    Vector var = Vector::Constant(w, NAN);
    for (std::size_t j = 0; j < a.states.size(); ++j) {
      mean(a.states[j]) = mode.smooth.alpha_hat[i](j);
      var(a.states[j]) = mode.smooth.V[i](j, j);
    }
    out.mean.push_back(mean);
    out.var.push_back(var);
  }
  return out;
}

namespace {

void check_scenario(const MrssSpec& spec, const Scenario& scenario, int horizon) {
  std::vector<std::string> missing;
  for (const auto& name : spec.gate_streams()) {
    const auto it = scenario.streams.find(name);
    if (it == scenario.streams.end() || static_cast<int>(it->second.size()) < horizon)
      missing.push_back(name);
  }
  if (spec.n_covariates() > 0 &&
      (scenario.x.rows() < horizon || scenario.x.cols() != spec.n_covariates())) {
    for (const auto& c : spec.covariates) missing.push_back(c);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& n : missing) names += (names.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::ScenarioIncomplete, "scenario lacks " + names);
  }
}

Forecast make_forecast(const MrssSpec& spec, const AssembledSubject& a, const Matrix& Z,
                       const Vector& d, const Vector& mean, const Matrix& cov, int time) {
  Forecast f;
  f.time = time;
  const int p = spec.n_channels();
  f.theta = Z * mean + d;
  f.theta_var = (Z * cov * Z.transpose()).diagonal().cwiseMax(0.0);
  f.lower = f.theta - kZ975 * f.theta_var.cwiseSqrt();
  f.upper = f.theta + kZ975 * f.theta_var.cwiseSqrt();
  f.response.resize(p);
  for (int k = 0; k < p; ++k) f.response(k) = response_mean(a.model.families[k].kind, f.theta(k));
  return f;
}

struct FilteredEnd {
  AssembledSubject assembled;
  Vector mean;
  Matrix cov;
};

FilteredEnd filtered_end(const MrssSpec& spec, const SubjectData& subj, const ParameterSet& psi,
                         const ModeOptions& opts) {
  FilteredEnd out;
  out.assembled = assemble_ssm(spec, subj, psi);
  const ModeResult mode = find_mode(out.assembled.model, out.assembled.z, opts);
  const int last = subj.n_time() - 1;
  out.mean = mode.filt.a_filt[last];
  out.cov = mode.filt.P_filt[last];
  return out;
}

}  // namespace

std::vector<Forecast> forecast(const MrssSpec& spec, const SubjectData& subj,
                               const ParameterSet& psi, int horizon, const Scenario& scenario,
                               const ModeOptions& opts) {
  if (horizon < 0) throw Error(ErrorCode::Validation, "horizon must be non-negative");
  if (horizon > 0) check_scenario(spec, scenario, horizon);
  FilteredEnd end = filtered_end(spec, subj, psi, opts);
  const AssembledSubject& a = end.assembled;
  const int last = subj.n_time() - 1;
  std::vector<Forecast> out;
  if (horizon == 0) {
    out.push_back(make_forecast(spec, a, a.model.base.loading[last], a.model.base.offset[last],
                                end.mean, end.cov, subj.times[last]));
    return out;
  }
  const Transition tr = group_transition(psi, spec.group_index(subj.group), a.states);
  Vector mean = end.mean;
  Matrix cov = end.cov;
  for (int i = 0; i < horizon; ++i) {
    mean = tr.T * mean + tr.c;
    cov = tr.T * cov * tr.T.transpose() + tr.Q;
    std::map<std::string, double> gates;
    for (const auto& [name, values] : scenario.streams)
      if (static_cast<int>(values.size()) > i) gates[name] = values[i];
    const Matrix Z = instantiate_loading(spec, psi, a.states, gates);
    const Vector d = covariate_offset(psi, scenario.x, i);
    out.push_back(make_forecast(spec, a, Z, d, mean, cov, subj.times[last] + i + 1));
  }
  return out;
}

std::vector<Forecast> one_step_ahead(const MrssSpec& spec, const SubjectData& subj,
                                     const ParameterSet& psi, int from_index,
                                     const ModeOptions& opts) {
  std::vector<Forecast> out;
  for (int i = std::max(1, from_index); i < subj.n_time(); ++i) {
    const int h = subj.times[i] - subj.times[i - 1];
    Scenario scn;
    for (const auto& [name, values] : subj.streams) scn.streams[name].assign(h, values[i]);
    if (spec.n_covariates() > 0) scn.x = subj.x.row(i).replicate(h, 1);
    out.push_back(forecast(spec, subj.prefix(i), psi, h, scn, opts).back());
  }
  return out;
}

Vector predicted_treatment_effect(const MrssSpec& spec, const SubjectData& subj,
                                  const ParameterSet& psi, int at_time, const ModeOptions& opts) {
  const int group = spec.group_index(subj.group);
  if (group < 0) throw Error(ErrorCode::UnknownGroup, "unknown group '" + subj.group + "'");
  if (!spec.groups[group].treated)
    throw Error(ErrorCode::UntreatedGroup, "group '" + subj.group + "' is not treated");

  const auto it = std::find(subj.times.begin(), subj.times.end(), at_time);
  const int last = subj.n_time() - 1;
  std::map<std::string, double> gates;
  Vector state;
  std::vector<int> states;
  if (it != subj.times.end()) {
    const int i = static_cast<int>(it - subj.times.begin());
    const AssembledSubject a = assemble_ssm(spec, subj, psi);
    const ModeResult mode = find_mode(a.model, a.z, opts);
    state = mode.smooth.alpha_hat[i];
    states = a.states;
    gates = gates_at(subj, i);
  } else if (at_time > subj.times[last]) {
    FilteredEnd end = filtered_end(spec, subj, psi, opts);
    const Transition tr = group_transition(psi, group, end.assembled.states);
    state = end.mean;
    for (int s = subj.times[last]; s < at_time; ++s) state = tr.T * state + tr.c;
    states = end.assembled.states;
    gates = gates_at(subj, last);
  } else {
    throw Error(ErrorCode::Validation, "time " + std::to_string(at_time) +
                                           " is neither observed nor after the last observation");
  }
  std::map<std::string, double> on = gates, off = gates;
  for (const auto& mod : spec.modalities) {
    on[mod.stream] = 1.0;
    off[mod.stream] = 0.0;
  }
  Vector effect = (instantiate_loading(spec, psi, states, on) -
                   instantiate_loading(spec, psi, states, off)) * state;
  const std::vector<int> channels = spec.active_channels(group);
  for (int k = 0; k < spec.n_channels(); ++k)
    if (std::find(channels.begin(), channels.end(), k) == channels.end()) effect(k) = NAN;
  return effect;
}

}  // namespace mrss
