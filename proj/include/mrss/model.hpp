#pragma once

// Multi-subject mixed-response model: channel/state layout, indicator-gated loadings,
// per-group transitions and assembly of each subject's state-space model.

#include <map>
#include <string>
#include <vector>

#include "mrss/expfam.hpp"
#include "mrss/lgss.hpp"
#include "mrss/mode.hpp"

namespace mrss {

enum class Role { Measurement, Phenotype };  // A channels, Y channels
enum class StateKind { Treatment, Health };  // b states, v states

struct ChannelSpec {
  std::string name;
  Role role = Role::Phenotype;
  ChannelFamily family;
  std::string modality;  // empty = none
};

struct StateSpec {
  std::string name;
  StateKind kind = StateKind::Health;
};

struct ModalitySpec {
  std::string name;
  std::string stream;  // treatment indicator stream gating this modality
};

enum class CellKind { Zero, Free, Fixed };

struct LoadingCell {
  CellKind kind = CellKind::Zero;
  double value = 0.0;  // Fixed value, or starting value for Free cells
  std::string gate;    // indicator stream multiplying the cell; empty = ungated
};

struct GroupSpec {
  std::string name;
  std::vector<std::string> states;    // active states; empty = all
  std::vector<std::string> channels;  // active channels; empty = all
  bool treated = true;
};

struct InitialSpec {
  bool diffuse = true;
  double kappa = kDefaultKappa;
  Vector mean;  // known initial law when !diffuse
  Matrix cov;
};

struct MrssSpec {
  std::vector<ChannelSpec> channels;
  std::vector<StateSpec> states;
  std::vector<ModalitySpec> modalities;
  std::vector<std::string> streams;  // extra indicator streams (besides treatment streams)
  std::vector<std::string> covariates;
  std::vector<GroupSpec> groups;
  std::vector<std::vector<LoadingCell>> loading;  // channels x states
  std::vector<std::vector<char>> beta_free;       // channels x covariates; empty = all free
  std::vector<std::pair<int, int>> q_independent; // state pairs with zero noise covariance
  InitialSpec initial;

  int n_channels() const { return static_cast<int>(channels.size()); }
  int n_states() const { return static_cast<int>(states.size()); }
  int n_covariates() const { return static_cast<int>(covariates.size()); }
  int n_groups() const { return static_cast<int>(groups.size()); }
  int count_states(StateKind kind) const;
  int count_channels(Role role) const;

  int channel_index(const std::string& name) const;  // -1 if absent
  int state_index(const std::string& name) const;
  int group_index(const std::string& name) const;
  const ModalitySpec* modality(const std::string& name) const;

  bool is_beta_free(int k, int j) const;
  bool is_q_independent(int i, int j) const;
  // Indicator streams referenced by gated loading cells.
  std::vector<std::string> gate_streams() const;
  // Indices of active states/channels of a group.
  std::vector<int> active_states(int group) const;
  std::vector<int> active_channels(int group) const;

  // Throws Validation / LayoutMismatch on an inconsistent specification.
  void validate() const;

  // A rows: zero over b, free over v. Y rows: free over b gated by the channel's modality
  // stream, free over v. One group "all" unless supplied.
  static MrssSpec default_layout(std::vector<ChannelSpec> channels, std::vector<StateSpec> states,
                                 std::vector<ModalitySpec> modalities,
                                 std::vector<std::string> covariates,
                                 std::vector<GroupSpec> groups = {});
};

struct SubjectData {
  std::string id;
  std::string group;
  std::vector<int> times;                              // strictly increasing grid indices
  Panel z;                                             // per time, all channels, NaN = missing
  std::map<std::string, std::vector<double>> streams;  // indicator streams per time
  Matrix x;                                            // times x covariates

  int n_time() const { return static_cast<int>(times.size()); }
  // Leading `count` time points.
  SubjectData prefix(int count) const;
  void validate(const MrssSpec& spec) const;
};

struct ParameterSet;

struct AssembledSubject {
  NonGaussianSsm model;
  Panel z;                          // inactive or dropped channels set to NaN
  std::vector<int> states;          // spec state index of each model state
  std::vector<std::string> warnings;
};

// Loading row values for one time point, given indicator values by stream name.
Matrix instantiate_loading(const MrssSpec& spec, const ParameterSet& psi,
                           const std::vector<int>& states,
                           const std::map<std::string, double>& gates);

AssembledSubject assemble_ssm(const MrssSpec& spec, const SubjectData& subj,
                              const ParameterSet& psi);

struct StatePosterior {
  std::vector<int> times;
  std::vector<Vector> mean;  // all spec states; NaN for states inactive in the group
  std::vector<Vector> var;
};

StatePosterior smoothed_states(const MrssSpec& spec, const SubjectData& subj,
                               const ParameterSet& psi, const ModeOptions& opts = {});

// Future indicator streams and covariates, one row per forecast step.
struct Scenario {
  std::map<std::string, std::vector<double>> streams;
  Matrix x;
};

struct Forecast {
  int time = 0;
  Vector theta;        // natural-parameter mean
  Vector theta_var;
  Vector lower;        // 95% interval on the natural-parameter scale
  Vector upper;
  Vector response;     // inverse link of theta
};

// h-step forecasts from the filtered state at the last observed time; scenario row i
// describes grid time last + i + 1. horizon 0 returns the filtered signal at the last time.
std::vector<Forecast> forecast(const MrssSpec& spec, const SubjectData& subj,
                               const ParameterSet& psi, int horizon, const Scenario& scenario,
                               const ModeOptions& opts = {});

// Forecast of each time point i >= from_index using data at times < times[i], with the
// subject's own indicators and covariates at times[i].
std::vector<Forecast> one_step_ahead(const MrssSpec& spec, const SubjectData& subj,
                                     const ParameterSet& psi, int from_index = 1,
                                     const ModeOptions& opts = {});

// Natural-parameter difference between a = 1 and a = 0 at grid time `at_time` for all
// treatment streams; uses the smoothed state if at_time lies inside the data, else the forecast.
Vector predicted_treatment_effect(const MrssSpec& spec, const SubjectData& subj,
                                  const ParameterSet& psi, int at_time,
                                  const ModeOptions& opts = {});

}  // namespace mrss
