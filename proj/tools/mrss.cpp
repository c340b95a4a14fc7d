#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "mrss/error.hpp"
#include "mrss/io.hpp"

using namespace mrss;
namespace fs = std::filesystem;
using io::Json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitNotConverged = 4;

class Run {
 public:
  Run(std::string command, std::string out_dir)
      : out_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.version = io::kVersion;
    fs::create_directories(out_);
  }

  void input_file(const std::string& path) {
    manifest_.inputs[path] = io::hex_digest(io::read_text(path));
  }
  void input_dataset(const std::string& dir) {
    for (const char* name : io::kDatasetFiles) {
      const fs::path p = fs::path(dir) / name;
      if (fs::exists(p)) input_file(p.string());
    }
  }
  void config(const Json& effective, std::uint64_t seed) {
    manifest_.config_hash = io::hex_digest(effective.dump());
    manifest_.seed = seed;
  }
  std::string path(const std::string& name) const { return (fs::path(out_) / name).string(); }
  void output(const std::string& name, const std::string& text) {
    io::write_text(path(name), text);
    manifest_.outputs.push_back(path(name));
  }
  void output(const std::string& name, const Json& doc) { output(name, doc.dump(2) + "\n"); }
  void output_dataset() {
    for (const char* name : io::kDatasetFiles) manifest_.outputs.push_back(path(name));
  }

  ~Run() {
    manifest_.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    try {
      io::write_json(path("manifest.json"), io::manifest_to_json(manifest_));
    } catch (const std::exception& e) {
      std::cerr << "warning: manifest not written: " << e.what() << "\n";
    }
  }

 private:
  io::RunManifest manifest_;
  std::string out_;
  std::chrono::steady_clock::time_point start_;
};

struct FitFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> is_samples;
  std::optional<double> tol;
  std::optional<int> max_outer;
  bool allow_partial = false;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--config", f.config, "Optimizer configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Importance-sampling seed");
  cmd->add_option("--threads", f.threads, "Worker threads across subjects")->check(CLI::PositiveNumber);
  cmd->add_option("--is-samples", f.is_samples, "Importance samples while optimizing");
  cmd->add_option("--tol", f.tol, "Relative outer tolerance on the log-likelihood");
  cmd->add_option("--max-outer", f.max_outer, "Maximum outer iterations (0 returns the start)");
  cmd->add_flag("--allow-partial", f.allow_partial, "Exit 0 when the fit did not converge");
}

FitConfig fit_config(const FitFlags& f, Run& run) {
  FitConfig c;
  if (!f.config.empty()) {
    c = io::fit_config_from_json(io::read_json(f.config));
    run.input_file(f.config);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.is_samples) c.n_samples = *f.is_samples;
  if (f.tol) c.tol_rel = *f.tol;
  if (f.max_outer) c.max_outer = *f.max_outer;
  return c;
}

std::string states_table(const MrssSpec& spec, const std::vector<SubjectData>& subjects,
                         const ParameterSet& psi, const ModeOptions& mode) {
  std::ostringstream out;
  out << "subject_id,t,state,mean,var\n";
  for (const auto& s : subjects) {
    const StatePosterior post = smoothed_states(spec, s, psi, mode);
    for (std::size_t i = 0; i < post.times.size(); ++i)
      for (int j = 0; j < spec.n_states(); ++j) {
        if (std::isnan(post.mean[i](j))) continue;
        out << s.id << ',' << post.times[i] << ',' << spec.states[j].name << ','
            << io::fmt(post.mean[i](j)) << ',' << io::fmt(post.var[i](j)) << '\n';
      }
  }
  return out.str();
}

// ---- simulate

struct SimulateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
  Run run("simulate", a.out);
  Json doc = io::read_json(a.config);
  run.input_file(a.config);
  if (a.seed) doc["seed"] = *a.seed;
  const sim::SimConfig cfg = io::sim_config_from_json(doc);
  run.config(io::sim_config_to_json(cfg), cfg.seed);
  const sim::SimDataset data = sim::generate_dataset(cfg);
  const MrssSpec spec = sim::simulation_spec();
  io::write_dataset(a.out, spec, data.subjects);
  run.output_dataset();
  io::write_truth(run.path("truth.csv"), data);
  run.output("truth.csv", io::read_text(run.path("truth.csv")));
  run.output("spec.json", io::spec_to_json(spec));
  run.output("truth_params.json", io::params_to_json(spec, sim::true_parameters(spec)));
  std::cout << "simulated " << data.subjects.size() << " subjects x " << cfg.T_len
            << " times into " << a.out << "\n";
  return 0;
}

// ---- fit

struct FitArgs {
  std::string spec, data, out, lrt;
  FitFlags flags;
};

int cmd_fit(const FitArgs& a) {
  Run run("fit", a.out);
  const MrssSpec spec = io::spec_from_json(io::read_json(a.spec));
  run.input_file(a.spec);
  const std::vector<SubjectData> subjects = io::read_dataset(a.data, spec);
  run.input_dataset(a.data);
  const FitConfig cfg = fit_config(a.flags, run);
  Json effective = {{"fit", io::fit_config_to_json(cfg)}, {"lrt", a.lrt}};
  run.config(effective, cfg.seed);

  const FitResult fit = cbcd_fit(spec, subjects, cfg);
  run.output("fit.json", io::fit_to_json(spec, fit));
  run.output("states.csv", states_table(spec, subjects, fit.psi_hat, cfg.mode));
  std::cout << "loglik " << io::fmt(fit.loglik) << " (mc se " << io::fmt(fit.mc_se) << "), "
            << fit.n_params << " parameters, AIC " << io::fmt(fit.aic) << ", "
            << fit.n_outer << " outer iterations\n";
  bool converged = fit.converged;

  if (!a.lrt.empty()) {
    const MrssSpec nested_spec = io::spec_from_json(io::read_json(a.lrt));
    run.input_file(a.lrt);
    const std::vector<SubjectData> nested_subjects = io::read_dataset(a.data, nested_spec);
    const FitResult nested = cbcd_fit(nested_spec, nested_subjects, cfg);
    run.output("nested_fit.json", io::fit_to_json(nested_spec, nested));
    const LrtResult t = lrt(fit, nested);
    run.output("lrt.json", Json{{"statistic", t.statistic},
                                {"df", t.df},
                                {"p_value", t.p_value},
                                {"loglik_full", fit.loglik},
                                {"loglik_nested", nested.loglik}});
    std::cout << "LRT statistic " << io::fmt(t.statistic) << " on " << t.df << " df, p "
              << io::fmt(t.p_value) << "\n";
    converged = converged && nested.converged;
  }
  if (!converged && !a.flags.allow_partial) {
    std::cerr << "error: NotConverged: no convergence within " << cfg.max_outer
              << " outer iterations (outputs written; --allow-partial accepts them)\n";
    return kExitNotConverged;
  }
  return 0;
}

// ---- forecast

struct ForecastArgs {
  std::string fit, data, scenario, out;
  int horizon = 1;
  bool treatment_effect = false;
  bool one_step = false;
  std::optional<int> threads;
};

int cmd_forecast(const ForecastArgs& a) {
  Run run("forecast", a.out);
  const Json fit = io::read_json(a.fit);
  run.input_file(a.fit);
  if (!fit.contains("spec") || !fit.contains("psi_hat"))
    throw Error(ErrorCode::Validation, a.fit + ": not a fit document");
  const MrssSpec spec = io::spec_from_json(fit.at("spec"));
  const ParameterSet psi = io::params_from_json(spec, fit.at("psi_hat"));
  const std::vector<SubjectData> subjects = io::read_dataset(a.data, spec);
  run.input_dataset(a.data);
  if (a.horizon < 0) throw Error(ErrorCode::Validation, "--horizon must be >= 0");
  std::map<std::string, Scenario> scenarios;
  if (!a.one_step && a.horizon > 0) {
    if (a.scenario.empty())
      throw Error(ErrorCode::ScenarioIncomplete, "--scenario is required for horizon > 0");
    scenarios = io::read_scenarios(a.scenario, spec, a.horizon);
    run.input_file(a.scenario);
  }
  run.config({{"horizon", a.horizon},
              {"one_step", a.one_step},
              {"treatment_effect", a.treatment_effect}},
             0);

  std::ostringstream out;
  out << "subject_id,step,t,channel,theta,theta_var,lower,upper,response";
  if (a.treatment_effect) out << ",treatment_effect";
  out << '\n';
  for (const auto& s : subjects) {
    std::vector<Forecast> rows;
    if (a.one_step) {
      rows = one_step_ahead(spec, s, psi, 1);
    } else {
      Scenario sc;
      if (a.horizon > 0) {
        const auto it = scenarios.find(s.id);
        if (it == scenarios.end())
          throw Error(ErrorCode::ScenarioIncomplete, "scenario has no rows for subject " + s.id);
        sc = it->second;
      }
      rows = forecast(spec, s, psi, a.horizon, sc);
    }
    const bool treated = spec.groups[spec.group_index(s.group)].treated;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Forecast& f = rows[r];
      Vector effect;
      if (a.treatment_effect && treated) effect = predicted_treatment_effect(spec, s, psi, f.time);
      const int step = a.one_step ? 1 : static_cast<int>(r) + (a.horizon == 0 ? 0 : 1);
      for (int k = 0; k < spec.n_channels(); ++k) {
        if (std::isnan(f.theta(k))) continue;
        out << s.id << ',' << step << ',' << f.time << ',' << spec.channels[k].name << ','
            << io::fmt(f.theta(k)) << ',' << io::fmt(f.theta_var(k)) << ','
            << io::fmt(f.lower(k)) << ',' << io::fmt(f.upper(k)) << ',' << io::fmt(f.response(k));
        if (a.treatment_effect) out << ',' << (treated ? io::fmt(effect(k)) : std::string());
        out << '\n';
      }
    }
  }
  run.output("forecast.csv", out.str());
  std::cout << "forecast written to " << run.path("forecast.csv") << "\n";
  return 0;
}

// ---- select

struct SelectArgs {
  std::string data, out;
  std::vector<std::string> specs;
  FitFlags flags;
};

int cmd_select(const SelectArgs& a) {
  Run run("select", a.out);
  std::vector<std::pair<std::string, MrssSpec>> candidates;
  if (a.specs.empty()) {
    for (const auto& [nb, nv] : sim::candidate_dimensions())
      candidates.emplace_back("b" + std::to_string(nb) + "_v" + std::to_string(nv),
                              sim::simulation_spec(nb, nv));
  } else {
    for (const auto& path : a.specs) {
      candidates.emplace_back(fs::path(path).stem().string(), io::spec_from_json(io::read_json(path)));
      run.input_file(path);
    }
  }
  run.input_dataset(a.data);
  const FitConfig cfg = fit_config(a.flags, run);
  Json names = Json::array();
  for (const auto& c : candidates) names.push_back(c.first);
  run.config({{"fit", io::fit_config_to_json(cfg)}, {"candidates", names}}, cfg.seed);

  std::vector<FitResult> fits;
  int best = -1;
  bool all_converged = true;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& [name, spec] = candidates[i];
    const std::vector<SubjectData> subjects = io::read_dataset(a.data, spec);
    fits.push_back(cbcd_fit(spec, subjects, cfg));
    run.output("fit_" + name + ".json", io::fit_to_json(spec, fits.back()));
    all_converged = all_converged && fits.back().converged;
    if (best < 0 || fits.back().aic < fits[best].aic) best = static_cast<int>(i);
    std::cout << name << ": AIC " << io::fmt(fits.back().aic) << "\n";
  }
  std::ostringstream table;
  table << "candidate,n_states,n_params,loglik,mc_se,aic,converged,selected\n";
  for (std::size_t i = 0; i < fits.size(); ++i)
    table << candidates[i].first << ',' << candidates[i].second.n_states() << ','
          << fits[i].n_params << ',' << io::fmt(fits[i].loglik) << ',' << io::fmt(fits[i].mc_se)
          << ',' << io::fmt(fits[i].aic) << ',' << (fits[i].converged ? 1 : 0) << ','
          << (static_cast<int>(i) == best ? 1 : 0) << '\n';
  run.output("selection.csv", table.str());
  if (best >= 0) std::cout << "selected " << candidates[best].first << "\n";
  if (!all_converged && !a.flags.allow_partial) {
    std::cerr << "error: NotConverged: at least one candidate fit did not converge\n";
    return kExitNotConverged;
  }
  return 0;
}

// ---- benchmark

struct BenchmarkArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> reps;
};

const std::set<std::string> kMethods = {"mrss", "individual_var", "pooled_var"};

int cmd_benchmark(const BenchmarkArgs& a) {
  Run run("benchmark", a.out);
  Json doc = io::read_json(a.config);
  run.input_file(a.config);
  for (const auto& [key, _] : doc.items())
    if (key != "settings" && key != "reps" && key != "methods" && key != "dims" && key != "fit" &&
        key != "seed")
      throw Error(ErrorCode::Validation, "benchmark config: unknown key '" + key + "'");
  if (a.seed) doc["seed"] = *a.seed;
  if (a.reps) doc["reps"] = *a.reps;

  std::vector<sim::SimConfig> settings;
  std::vector<std::string> methods;
  std::vector<std::pair<int, int>> dims;
  int reps = 0;
  std::uint64_t base_seed = 1;
  FitConfig fit;
  try {
    reps = doc.value("reps", 1);
    base_seed = doc.value("seed", std::uint64_t{1});
    methods = doc.value("methods", std::vector<std::string>{"mrss", "individual_var", "pooled_var"});
    if (doc.contains("dims"))
      for (const auto& d : doc.at("dims")) dims.emplace_back(d.at(0).get<int>(), d.at(1).get<int>());
    else
      dims = {{1, 1}};
    if (doc.contains("fit")) fit = io::fit_config_from_json(doc.at("fit"));
    const Json list = doc.contains("settings") ? doc.at("settings") : Json::array({Json::object()});
    for (const auto& s : list) settings.push_back(io::sim_config_from_json(s));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("benchmark config: ") + e.what());
  }
  if (reps < 1) throw Error(ErrorCode::Validation, "benchmark config: reps must be >= 1");
  for (const auto& m : methods)
    if (!kMethods.count(m)) throw Error(ErrorCode::Validation, "benchmark config: unknown method '" + m + "'");
  for (const auto& [nb, nv] : dims)
    if (nb < 1 || nv < 1)
      throw Error(ErrorCode::Validation, "benchmark config: dims need at least one state of each kind");
  if (a.threads) fit.threads = *a.threads;
  const bool prediction = methods.size() > 1 || methods[0] != "mrss";
  run.config(doc, base_seed);

  const MrssSpec spec11 = sim::simulation_spec();
  const ParameterSet truth = sim::true_parameters(spec11);
  std::ostringstream coef, pred, sel;
  coef << "N,T,p,rep,seed,n_b,n_v,channel,covariate,estimate,truth\n";
  pred << "N,T,p,rep,seed,method,channel,sample,error\n";
  sel << "N,T,p,rep,seed,n_b,n_v,n_params,loglik,aic,converged,selected\n";
  // (setting, channel, covariate) -> squared errors; (setting, method, channel, sample) -> errors
  std::map<std::tuple<int, int, int>, std::vector<double>> coef_sq;
  std::map<std::tuple<int, std::string, int, std::string>, std::vector<double>> pred_err;

  for (std::size_t si = 0; si < settings.size(); ++si) {
    for (int rep = 0; rep < reps; ++rep) {
      sim::SimConfig cfg = settings[si];
      cfg.seed = base_seed + static_cast<std::uint64_t>(si) * 100000 + static_cast<std::uint64_t>(rep);
      sim::ReplicationOptions opts;
      opts.fit = fit;
      opts.dims = dims;
      opts.prediction = prediction;
      const sim::ReplicationResult r = sim::run_replication(cfg, opts);
      std::ostringstream key;
      key << cfg.N << ',' << cfg.T_len << ',' << io::fmt(cfg.p_treat) << ',' << rep << ',' << cfg.seed;

      int best = 0;
      for (std::size_t c = 0; c < r.candidates.size(); ++c)
        if (r.candidates[c].fit.aic < r.candidates[best].fit.aic) best = static_cast<int>(c);
      for (std::size_t c = 0; c < r.candidates.size(); ++c) {
        const auto& cand = r.candidates[c];
        sel << key.str() << ',' << cand.n_b << ',' << cand.n_v << ',' << cand.fit.n_params << ','
            << io::fmt(cand.fit.loglik) << ',' << io::fmt(cand.fit.aic) << ','
            << (cand.fit.converged ? 1 : 0) << ',' << (static_cast<int>(c) == best ? 1 : 0) << '\n';
        for (int k = 0; k < spec11.n_channels(); ++k)
          for (int j = 0; j < spec11.n_covariates(); ++j) {
            const double est = cand.fit.psi_hat.beta(k, j);
            coef << key.str() << ',' << cand.n_b << ',' << cand.n_v << ','
                 << spec11.channels[k].name << ',' << spec11.covariates[j] << ',' << io::fmt(est)
                 << ',' << io::fmt(truth.beta(k, j)) << '\n';
            if (c == 0) coef_sq[{static_cast<int>(si), k, j}].push_back(std::pow(est - truth.beta(k, j), 2));
          }
      }
      if (prediction) {
        const std::pair<std::string, const sim::PredictionErrors*> by_method[] = {
            {"mrss", &r.mrss}, {"individual_var", &r.individual_var}, {"pooled_var", &r.pooled_var}};
        for (const auto& [name, errs] : by_method) {
          if (std::find(methods.begin(), methods.end(), name) == methods.end()) continue;
          for (int k = 0; k < spec11.n_channels(); ++k)
            for (const auto& [sample, v] :
                 {std::pair<std::string, double>{"in", errs->in_sample(k)}, {"out", errs->out_sample(k)}}) {
              pred << key.str() << ',' << name << ',' << spec11.channels[k].name << ',' << sample
                   << ',' << io::fmt(v) << '\n';
              pred_err[{static_cast<int>(si), name, k, sample}].push_back(v);
            }
        }
      }
      std::cout << "setting " << si + 1 << "/" << settings.size() << " rep " << rep + 1 << "/" << reps
                << " done\n";
    }
  }

  auto mean_sd = [](const std::vector<double>& v) {
    double m = 0.0, ss = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair<double, double>(m, v.size() > 1 ? std::sqrt(ss / (v.size() - 1.0)) : NAN);
  };
  std::ostringstream coef_table, pred_table;
  coef_table << "N,T,p,channel,covariate,mse,sd,reps\n";
  for (const auto& [k, v] : coef_sq) {
    const auto& [si, ch, cv] = k;
    const auto [m, sd] = mean_sd(v);
    coef_table << settings[si].N << ',' << settings[si].T_len << ',' << io::fmt(settings[si].p_treat)
               << ',' << spec11.channels[ch].name << ',' << spec11.covariates[cv] << ','
               << io::fmt(m) << ',' << io::fmt(sd) << ',' << v.size() << '\n';
  }
  pred_table << "N,T,p,method,channel,sample,mean_error,sd,reps\n";
  for (const auto& [k, v] : pred_err) {
    const auto& [si, name, ch, sample] = k;
    const auto [m, sd] = mean_sd(v);
    pred_table << settings[si].N << ',' << settings[si].T_len << ',' << io::fmt(settings[si].p_treat)
               << ',' << name << ',' << spec11.channels[ch].name << ',' << sample << ','
               << io::fmt(m) << ',' << io::fmt(sd) << ',' << v.size() << '\n';
  }
  run.output("coefficients.csv", coef.str());
  run.output("coefficient_mse.csv", coef_table.str());
  run.output("selection.csv", sel.str());
  if (prediction) {
    run.output("prediction_errors.csv", pred.str());
    run.output("prediction_summary.csv", pred_table.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-response state-space models: simulate, fit, forecast, select, benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kVersion);

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic benchmark dataset");
  simulate->add_option("--config", sa.config, "Simulation configuration (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sa.out, "Output directory")->required();
  simulate->add_option("--seed", sa.seed, "Overrides the configuration seed");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit of a model specification");
  fit->add_option("--spec", fa.spec, "Model specification (JSON)")->required()->check(CLI::ExistingFile);
  fit->add_option("--data", fa.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  fit->add_option("--out", fa.out, "Output directory")->required();
  fit->add_option("--lrt", fa.lrt, "Nested specification for a likelihood-ratio test")->check(CLI::ExistingFile);
  add_fit_flags(fit, fa.flags);

  ForecastArgs fc;
  auto* fcast = app.add_subcommand("forecast", "Forecasts and treatment effects from a fit");
  fcast->add_option("--fit", fc.fit, "fit.json from the fit command")->required()->check(CLI::ExistingFile);
  fcast->add_option("--data", fc.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  fcast->add_option("--scenario", fc.scenario, "Future indicators and covariates (CSV)")->check(CLI::ExistingFile);
  fcast->add_option("--horizon", fc.horizon, "Forecast steps after each subject's last time");
  fcast->add_option("--out", fc.out, "Output directory")->required();
  fcast->add_flag("--treatment-effect", fc.treatment_effect, "Add the predicted treatment effect column");
  fcast->add_flag("--one-step", fc.one_step, "One-step-ahead predictions over the observed times");

  SelectArgs se;
  auto* select = app.add_subcommand("select", "AIC comparison of candidate specifications");
  select->add_option("--data", se.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  select->add_option("--spec", se.specs, "Candidate specification (repeatable); default: state-count sweep")
      ->check(CLI::ExistingFile);
  select->add_option("--out", se.out, "Output directory")->required();
  add_fit_flags(select, se.flags);

  BenchmarkArgs ba;
  auto* bench = app.add_subcommand("benchmark", "Simulation benchmark over a settings grid");
  bench->add_option("--config", ba.config, "Benchmark configuration (JSON)")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", ba.out, "Output directory")->required();
  bench->add_option("--seed", ba.seed, "Base seed");
  bench->add_option("--threads", ba.threads, "Worker threads across subjects")->check(CLI::PositiveNumber);
  bench->add_option("--reps", ba.reps, "Overrides the configured number of replications");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) return cmd_simulate(sa);
    if (*fit) return cmd_fit(fa);
    if (*fcast) return cmd_forecast(fc);
    if (*select) return cmd_select(se);
    if (*bench) return cmd_benchmark(ba);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitValidation : kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: Validation: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
