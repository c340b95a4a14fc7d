#pragma once

// Files of the command-line tool: datasets as a long observation CSV with wide companions,
// JSON documents for specifications, parameters, fits and configurations, and run manifests.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mrss/estimator.hpp"
#include "mrss/model.hpp"
#include "mrss/simbench.hpp"

namespace mrss::io {

using Json = nlohmann::ordered_json;

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);
Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& doc);

// Shortest round-tripping decimal form; NaN prints as an empty cell.
std::string fmt(double v);

// 64-bit FNV-1a, printed as 16 hex digits.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex_digest(std::string_view bytes);

// Dataset directory: observations.csv (subject_id,t,channel,value; empty value = missing),
// covariates.csv (subject_id,t,group,<covariates>) and streams.csv (subject_id,t,<streams>).
// The covariates file defines the subjects and their time grids.
void write_dataset(const std::string& dir, const MrssSpec& spec,
                   const std::vector<SubjectData>& subjects);
std::vector<SubjectData> read_dataset(const std::string& dir, const MrssSpec& spec);
inline constexpr const char* kDatasetFiles[] = {"observations.csv", "covariates.csv",
                                                "streams.csv"};

// truth.csv: subject_id,t,a,alpha_1,alpha_2,mu_1,mu_2,mu_3.
void write_truth(const std::string& path, const sim::SimDataset& data);

Json spec_to_json(const MrssSpec& spec);
MrssSpec spec_from_json(const Json& doc);

Json params_to_json(const MrssSpec& spec, const ParameterSet& psi);
ParameterSet params_from_json(const MrssSpec& spec, const Json& doc);

Json fit_to_json(const MrssSpec& spec, const FitResult& fit);

// Plain key-value documents; unknown keys are validation errors.
sim::SimConfig sim_config_from_json(const Json& doc);
Json sim_config_to_json(const sim::SimConfig& cfg);
FitConfig fit_config_from_json(const Json& doc);
Json fit_config_to_json(const FitConfig& cfg);

// Scenario CSV: subject_id,step,<streams>,<covariates> with steps 1..h per subject.
std::map<std::string, Scenario> read_scenarios(const std::string& path, const MrssSpec& spec,
                                               int horizon);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::map<std::string, std::string> inputs;  // path -> digest
  double wall_time = 0.0;                     // seconds
  std::vector<std::string> outputs;
};
Json manifest_to_json(const RunManifest& m);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace mrss::io
