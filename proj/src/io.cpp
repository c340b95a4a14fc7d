#include "mrss/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mrss/error.hpp"

namespace mrss::io {

namespace {

namespace fs = std::filesystem;

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // source line of each row

  int column(const std::string& name, bool required = true, std::size_t from = 0) const {
    for (std::size_t j = from; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    if (required) throw Error(ErrorCode::Validation, file + ": missing column '" + name + "'");
    return -1;
  }

  [[noreturn]] void fail(std::size_t r, const std::string& col, const std::string& what) const {
    throw Error(ErrorCode::Validation,
                file + " line " + std::to_string(lines[r]) + " column " + col + ": " + what);
  }

  double number(std::size_t r, int j, bool allow_missing = false) const {
    const std::string& cell = rows[r][j];
    if (cell.empty()) {
      if (allow_missing) return NAN;
      fail(r, header[j], "empty value");
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size() || !std::isfinite(v)) fail(r, header[j], "'" + cell + "' is not a number");
    return v;
  }

  int integer(std::size_t r, int j) const {
    const double v = number(r, j);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail(r, header[j], "'" + rows[r][j] + "' is not an integer");
    return static_cast<int>(v);
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Validation, "cannot open " + path);
  CsvTable t;
  t.file = fs::path(path).filename().string();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw Error(ErrorCode::Validation, t.file + " line " + std::to_string(lineno) + ": expected " +
                                             std::to_string(t.header.size()) + " cells, found " +
                                             std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw Error(ErrorCode::Validation, t.file + ": empty file");
  return t;
}


std::vector<std::string> dataset_streams(const MrssSpec& spec,
                                         const std::vector<SubjectData>& subjects) {
  std::set<std::string> names;
  for (const auto& m : spec.modalities) names.insert(m.stream);
  for (const auto& s : spec.streams) names.insert(s);
  for (const auto& s : subjects)
    for (const auto& [name, _] : s.streams) names.insert(name);
  return {names.begin(), names.end()};
}

Json matrix_json(const Matrix& M) {
  Json out = Json::array();
  for (int i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    out.push_back(row);
  }
  return out;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix json_matrix(const Json& j, int rows, int cols, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw Error(ErrorCode::LayoutMismatch, what + ": expected " + std::to_string(rows) + " rows");
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
      throw Error(ErrorCode::LayoutMismatch, what + ": expected " + std::to_string(cols) + " columns");
    for (int k = 0; k < cols; ++k) M(i, k) = j[i][k].get<double>();
  }
  return M;
}

Vector json_vector(const Json& j, int n, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw Error(ErrorCode::LayoutMismatch, what + ": expected " + std::to_string(n) + " entries");
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = j[i].get<double>();
  return v;
}

const char* role_name(Role r) { return r == Role::Measurement ? "measurement" : "phenotype"; }
const char* kind_name(StateKind k) { return k == StateKind::Treatment ? "treatment" : "health"; }
const char* cell_name(CellKind k) {
  switch (k) {
    case CellKind::Free: return "free";
    case CellKind::Fixed: return "fixed";
    case CellKind::Zero: return "zero";
  }
  return "zero";
}

template <typename F>
auto field(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Validation, what + ": " + e.what());
  }
}

void check_keys(const Json& doc, std::initializer_list<const char*> keys, const std::string& what) {
  if (!doc.is_object()) throw Error(ErrorCode::Validation, what + ": expected an object");
  for (const auto& [key, _] : doc.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw Error(ErrorCode::Validation, what + ": unknown key '" + key + "'");
  }
}

}  // namespace

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Validation, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Validation, "cannot write " + path);
  out << text;
}

Json read_json(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Validation, path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

void write_dataset(const std::string& dir, const MrssSpec& spec,
                   const std::vector<SubjectData>& subjects) {
  const std::vector<std::string> streams = dataset_streams(spec, subjects);
  std::ostringstream obs, cov, str;
  obs << "subject_id,t,channel,value\n";
  cov << "subject_id,t,group";
  for (const auto& c : spec.covariates) cov << ',' << c;
  cov << '\n';
  str << "subject_id,t";
  for (const auto& s : streams) str << ',' << s;
  str << '\n';
  for (const auto& s : subjects) {
    for (int i = 0; i < s.n_time(); ++i) {
      const int t = s.times[i];
      for (int k = 0; k < spec.n_channels(); ++k)
        obs << s.id << ',' << t << ',' << spec.channels[k].name << ',' << fmt(s.z[i](k)) << '\n';
      cov << s.id << ',' << t << ',' << s.group;
      for (int j = 0; j < spec.n_covariates(); ++j) cov << ',' << fmt(s.x(i, j));
      cov << '\n';
      str << s.id << ',' << t;
      for (const auto& name : streams) {
        const auto it = s.streams.find(name);
        str << ',' << (it == s.streams.end() ? std::string() : fmt(it->second[i]));
      }
      str << '\n';
    }
  }
  fs::create_directories(dir);
  write_text((fs::path(dir) / "observations.csv").string(), obs.str());
  write_text((fs::path(dir) / "covariates.csv").string(), cov.str());
  write_text((fs::path(dir) / "streams.csv").string(), str.str());
}

std::vector<SubjectData> read_dataset(const std::string& dir, const MrssSpec& spec) {
  const CsvTable cov = read_csv((fs::path(dir) / "covariates.csv").string());
  std::vector<SubjectData> subjects;
  std::map<std::string, int> index;
  std::map<std::pair<int, int>, int> row_of;  // (subject, t) -> time index
  {
    const int cid = cov.column("subject_id"), ct = cov.column("t"), cg = cov.column("group");
    std::vector<int> cols;
    for (const auto& c : spec.covariates) cols.push_back(cov.column(c, true, 3));
    std::vector<std::vector<std::vector<double>>> xs;
    for (std::size_t r = 0; r < cov.rows.size(); ++r) {
      const std::string& id = cov.rows[r][cid];
      if (id.empty()) cov.fail(r, "subject_id", "empty subject id");
      auto [it, fresh] = index.emplace(id, static_cast<int>(subjects.size()));
      if (fresh) {
        subjects.emplace_back();
        subjects.back().id = id;
        subjects.back().group = cov.rows[r][cg];
        xs.emplace_back();
      }
      SubjectData& s = subjects[it->second];
      if (cov.rows[r][cg] != s.group) cov.fail(r, "group", "group changes within subject " + id);
      const int t = cov.integer(r, ct);
      if (!s.times.empty() && t <= s.times.back()) cov.fail(r, "t", "times must increase within a subject");
      row_of[{it->second, t}] = s.n_time();
      s.times.push_back(t);
      std::vector<double> x;
      for (std::size_t j = 0; j < cols.size(); ++j) x.push_back(cov.number(r, cols[j]));
      xs[it->second].push_back(x);
    }
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      SubjectData& s = subjects[i];
      s.x.resize(s.n_time(), spec.n_covariates());
      for (int r = 0; r < s.n_time(); ++r)
        for (int j = 0; j < spec.n_covariates(); ++j) s.x(r, j) = xs[i][r][j];
      s.z.assign(s.n_time(), Vector::Constant(spec.n_channels(), NAN));
    }
  }
  auto locate = [&](const CsvTable& tab, std::size_t r, int cid, int ct) {
    const auto it = index.find(tab.rows[r][cid]);
    if (it == index.end()) tab.fail(r, "subject_id", "unknown subject '" + tab.rows[r][cid] + "'");
    const int t = tab.integer(r, ct);
    const auto pos = row_of.find({it->second, t});
    if (pos == row_of.end()) tab.fail(r, "t", "time " + std::to_string(t) + " not in covariates.csv");
    return std::pair<int, int>(it->second, pos->second);
  };

  const fs::path stream_path = fs::path(dir) / "streams.csv";
  if (fs::exists(stream_path)) {
    const CsvTable str = read_csv(stream_path.string());
    const int cid = str.column("subject_id"), ct = str.column("t");
    for (std::size_t j = 0; j < str.header.size(); ++j) {
      if (static_cast<int>(j) == cid || static_cast<int>(j) == ct) continue;
      for (auto& s : subjects) s.streams[str.header[j]].assign(s.n_time(), NAN);
    }
    for (std::size_t r = 0; r < str.rows.size(); ++r) {
      const auto [i, row] = locate(str, r, cid, ct);
      for (std::size_t j = 0; j < str.header.size(); ++j) {
        if (static_cast<int>(j) == cid || static_cast<int>(j) == ct) continue;
        subjects[i].streams[str.header[j]][row] = str.number(r, static_cast<int>(j), true);
      }
    }
  }

  const CsvTable obs = read_csv((fs::path(dir) / "observations.csv").string());
  const int cid = obs.column("subject_id"), ct = obs.column("t"), cc = obs.column("channel"),
            cv = obs.column("value");
  for (std::size_t r = 0; r < obs.rows.size(); ++r) {
    const auto [i, row] = locate(obs, r, cid, ct);
    const int k = spec.channel_index(obs.rows[r][cc]);
    if (k < 0) obs.fail(r, "channel", "unknown channel '" + obs.rows[r][cc] + "'");
    subjects[i].z[row](k) = obs.number(r, cv, true);
  }
  for (const auto& s : subjects) s.validate(spec);
  return subjects;
}

void write_truth(const std::string& path, const sim::SimDataset& data) {
  std::ostringstream out;
  out << "subject_id,t,a,alpha_1,alpha_2,mu_1,mu_2,mu_3\n";
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const SubjectData& s = data.subjects[i];
    const sim::SubjectTruth& tr = data.truth[i];
    for (int r = 0; r < s.n_time(); ++r) {
      out << s.id << ',' << s.times[r] << ',' << fmt(tr.a[r]);
      for (int k = 0; k < tr.alpha[r].size(); ++k) out << ',' << fmt(tr.alpha[r](k));
      for (int k = 0; k < tr.mu[r].size(); ++k) out << ',' << fmt(tr.mu[r](k));
      out << '\n';
    }
  }
  write_text(path, out.str());
}

Json spec_to_json(const MrssSpec& spec) {
  Json doc;
  Json channels = Json::array();
  for (const auto& c : spec.channels) {
    Json ch = {{"name", c.name}, {"role", role_name(c.role)},
               {"family", std::string(family_name(c.family.kind))}};
    if (c.family.kind == Family::Gaussian) ch["variance"] = c.family.variance;
    if (!c.modality.empty()) ch["modality"] = c.modality;
    channels.push_back(ch);
  }
  doc["channels"] = channels;
  Json states = Json::array();
  for (const auto& s : spec.states) states.push_back({{"name", s.name}, {"kind", kind_name(s.kind)}});
  doc["states"] = states;
  Json modalities = Json::array();
  for (const auto& m : spec.modalities) modalities.push_back({{"name", m.name}, {"stream", m.stream}});
  doc["modalities"] = modalities;
  doc["streams"] = spec.streams;
  doc["covariates"] = spec.covariates;
  Json groups = Json::array();
  for (const auto& g : spec.groups)
    groups.push_back({{"name", g.name}, {"states", g.states}, {"channels", g.channels},
                      {"treated", g.treated}});
  doc["groups"] = groups;
  Json loading = Json::array();
  for (const auto& row : spec.loading) {
    Json r = Json::array();
    for (const auto& cell : row) {
      Json c = {{"kind", cell_name(cell.kind)}};
      if (cell.kind != CellKind::Zero) c["value"] = cell.value;
      if (!cell.gate.empty()) c["gate"] = cell.gate;
      r.push_back(c);
    }
    loading.push_back(r);
  }
  doc["loading"] = loading;
  if (!spec.beta_free.empty()) {
    Json bf = Json::array();
    for (const auto& row : spec.beta_free) {
      Json r = Json::array();
      for (char f : row) r.push_back(f != 0);
      bf.push_back(r);
    }
    doc["beta_free"] = bf;
  }
  Json qi = Json::array();
  for (const auto& [i, j] : spec.q_independent) qi.push_back({i, j});
  doc["q_independent"] = qi;
  Json init = {{"diffuse", spec.initial.diffuse}};
  if (spec.initial.diffuse) {
    init["kappa"] = spec.initial.kappa;
  } else {
    init["mean"] = vector_json(spec.initial.mean);
    init["cov"] = matrix_json(spec.initial.cov);
  }
  doc["initial"] = init;
  return doc;
}

MrssSpec spec_from_json(const Json& doc) {
  return field("spec", [&] {
    check_keys(doc, {"channels", "states", "modalities", "streams", "covariates", "groups",
                     "loading", "beta_free", "q_independent", "initial"},
               "spec");
    std::vector<ChannelSpec> channels;
    for (const auto& c : doc.at("channels")) {
      ChannelSpec ch;
      ch.name = c.at("name").get<std::string>();
      const std::string role = c.value("role", "phenotype");
      if (role != "phenotype" && role != "measurement")
        throw Error(ErrorCode::Validation, "spec: channel " + ch.name + ": unknown role '" + role + "'");
      ch.role = role == "measurement" ? Role::Measurement : Role::Phenotype;
      ch.family.kind = parse_family(c.at("family").get<std::string>());
      ch.family.variance = c.value("variance", 1.0);
      ch.modality = c.value("modality", "");
      channels.push_back(ch);
    }
    std::vector<StateSpec> states;
    for (const auto& s : doc.at("states")) {
      const std::string kind = s.at("kind").get<std::string>();
      if (kind != "treatment" && kind != "health")
        throw Error(ErrorCode::Validation, "spec: unknown state kind '" + kind + "'");
      states.push_back({s.at("name").get<std::string>(),
                        kind == "treatment" ? StateKind::Treatment : StateKind::Health});
    }
    std::vector<ModalitySpec> modalities;
    if (doc.contains("modalities"))
      for (const auto& m : doc.at("modalities"))
        modalities.push_back({m.at("name").get<std::string>(), m.at("stream").get<std::string>()});
    std::vector<std::string> covariates = doc.value("covariates", std::vector<std::string>{});
    std::vector<GroupSpec> groups;
    if (doc.contains("groups"))
      for (const auto& g : doc.at("groups")) {
        GroupSpec gs;
        gs.name = g.at("name").get<std::string>();
        gs.states = g.value("states", std::vector<std::string>{});
        gs.channels = g.value("channels", std::vector<std::string>{});
        gs.treated = g.value("treated", true);
        groups.push_back(gs);
      }
    MrssSpec spec = MrssSpec::default_layout(channels, states, modalities, covariates, groups);
    spec.streams = doc.value("streams", std::vector<std::string>{});
    if (doc.contains("loading")) {
      const Json& L = doc.at("loading");
      if (static_cast<int>(L.size()) != spec.n_channels())
        throw Error(ErrorCode::LayoutMismatch, "spec: loading needs one row per channel");
      for (int k = 0; k < spec.n_channels(); ++k) {
        if (static_cast<int>(L[k].size()) != spec.n_states())
          throw Error(ErrorCode::LayoutMismatch, "spec: loading row " + channels[k].name +
                                                     " needs one cell per state");
        for (int s = 0; s < spec.n_states(); ++s) {
          const Json& c = L[k][s];
          LoadingCell cell;
          const std::string kind = c.at("kind").get<std::string>();
          if (kind == "free") cell.kind = CellKind::Free;
          else if (kind == "fixed") cell.kind = CellKind::Fixed;
          else if (kind == "zero") cell.kind = CellKind::Zero;
          else throw Error(ErrorCode::Validation, "spec: unknown loading kind '" + kind + "'");
          cell.value = c.value("value", 0.0);
          cell.gate = c.value("gate", "");
          spec.loading[k][s] = cell;
        }
      }
    }
    if (doc.contains("beta_free")) {
      spec.beta_free.clear();
      for (const auto& row : doc.at("beta_free")) {
        std::vector<char> r;
        for (const auto& f : row) r.push_back(f.get<bool>() ? 1 : 0);
        spec.beta_free.push_back(r);
      }
    }
    if (doc.contains("q_independent"))
      for (const auto& pair : doc.at("q_independent"))
        spec.q_independent.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    if (doc.contains("initial")) {
      const Json& init = doc.at("initial");
      spec.initial.diffuse = init.value("diffuse", true);
      spec.initial.kappa = init.value("kappa", kDefaultKappa);
      if (!spec.initial.diffuse) {
        spec.initial.mean = json_vector(init.at("mean"), spec.n_states(), "spec initial mean");
        spec.initial.cov = json_matrix(init.at("cov"), spec.n_states(), spec.n_states(), "spec initial cov");
      }
    }
    spec.validate();
    return spec;
  });
}

Json params_to_json(const MrssSpec& spec, const ParameterSet& psi) {
  const ParameterMask mask = parameter_mask(spec);
  Json doc;
  doc["lambda"] = matrix_json(psi.lambda);
  Json lm = Json::array();
  for (const auto& row : spec.loading) {
    Json r = Json::array();
    for (const auto& cell : row) r.push_back(cell_name(cell.kind));
    lm.push_back(r);
  }
  doc["lambda_mask"] = lm;
  doc["beta"] = matrix_json(psi.beta);
  doc["beta_free"] = mask.beta_free;
  Json T = Json::object();
  for (int g = 0; g < spec.n_groups(); ++g) T[spec.groups[g].name] = vector_json(psi.T_diag[g]);
  doc["T_diag"] = T;
  doc["c"] = vector_json(psi.c);
  doc["Q"] = matrix_json(psi.Q);
  Json qi = Json::array();
  for (const auto& [i, j] : spec.q_independent) qi.push_back({i, j});
  doc["q_independent"] = qi;
  doc["H_diag"] = vector_json(psi.H_diag);
  doc["h_free"] = mask.h_free;
  return doc;
}

ParameterSet params_from_json(const MrssSpec& spec, const Json& doc) {
  return field("parameters", [&] {
    const int p = spec.n_channels(), w = spec.n_states();
    ParameterSet psi;
    psi.lambda = json_matrix(doc.at("lambda"), p, w, "lambda");
    psi.beta = json_matrix(doc.at("beta"), p, spec.n_covariates(), "beta");
    for (const auto& g : spec.groups) {
      if (!doc.at("T_diag").contains(g.name))
        throw Error(ErrorCode::LayoutMismatch, "T_diag: missing group " + g.name);
      psi.T_diag.push_back(json_vector(doc.at("T_diag").at(g.name), w, "T_diag " + g.name));
    }
    psi.c = json_vector(doc.at("c"), w, "c");
    psi.Q = json_matrix(doc.at("Q"), w, w, "Q");
    psi.H_diag = json_vector(doc.at("H_diag"), p, "H_diag");
    psi.check_layout(spec);
    return psi;
  });
}

Json fit_to_json(const MrssSpec& spec, const FitResult& fit) {
  Json doc;
  doc["spec"] = spec_to_json(spec);
  doc["psi_hat"] = params_to_json(spec, fit.psi_hat);
  doc["init"] = params_to_json(spec, fit.init);
  doc["loglik"] = fit.loglik;
  doc["mc_se"] = fit.mc_se;
  doc["loglik_trace"] = fit.loglik_trace;
  doc["converged"] = fit.converged;
  doc["n_outer"] = fit.n_outer;
  doc["n_params"] = fit.n_params;
  doc["aic"] = fit.aic;
  doc["seed"] = fit.seed;
  doc["n_final"] = fit.n_final;
  Json blocks = Json::array();
  for (const auto& b : fit.blocks)
    blocks.push_back({{"outer", b.outer}, {"block", block_name(b.block)}, {"before", b.before},
                      {"after", b.after}, {"evals", b.evals}});
  doc["blocks"] = blocks;
  Json ex = Json::array();
  for (const auto& e : fit.extrapolations)
    ex.push_back({{"outer", e.outer}, {"scale", e.scale}, {"before", e.before},
                  {"after", e.after}, {"evals", e.evals}});
  doc["extrapolations"] = ex;
  doc["warnings"] = fit.warnings;
  return doc;
}

sim::SimConfig sim_config_from_json(const Json& doc) {
  return field("simulation config", [&] {
    check_keys(doc, {"N", "T", "p", "seed", "split", "x1_sd_convention", "count_offset"},
               "simulation config");
    sim::SimConfig cfg;
    cfg.N = doc.value("N", cfg.N);
    cfg.T_len = doc.value("T", cfg.T_len);
    cfg.p_treat = doc.value("p", cfg.p_treat);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.split = doc.value("split", cfg.split);
    cfg.x1_sd_convention = doc.value("x1_sd_convention", cfg.x1_sd_convention);
    cfg.count_offset = doc.value("count_offset", cfg.count_offset);
    cfg.validate();
    return cfg;
  });
}

Json sim_config_to_json(const sim::SimConfig& cfg) {
  return {{"N", cfg.N},
          {"T", cfg.T_len},
          {"p", cfg.p_treat},
          {"seed", cfg.seed},
          {"split", cfg.split},
          {"x1_sd_convention", cfg.x1_sd_convention},
          {"count_offset", cfg.count_offset}};
}

FitConfig fit_config_from_json(const Json& doc) {
  return field("fit config", [&] {
    check_keys(doc, {"rounds", "max_outer", "tol_rel", "tol_abs", "n_samples", "n_check", "n_final",
                     "antithetic", "seed", "threads", "block_evals", "block_f_tol", "extrapolate",
                     "init_max_iter", "init_max_evals", "mode_tol", "mode_max_iter"},
               "fit config");
    FitConfig c;
    c.rounds = doc.value("rounds", c.rounds);
    c.max_outer = doc.value("max_outer", c.max_outer);
    c.tol_rel = doc.value("tol_rel", c.tol_rel);
    c.tol_abs = doc.value("tol_abs", c.tol_abs);
    c.n_samples = doc.value("n_samples", c.n_samples);
    c.n_check = doc.value("n_check", c.n_check);
    c.n_final = doc.value("n_final", c.n_final);
    c.antithetic = doc.value("antithetic", c.antithetic);
    c.seed = doc.value("seed", c.seed);
    c.threads = doc.value("threads", c.threads);
    c.block_evals = doc.value("block_evals", c.block_evals);
    c.block_f_tol = doc.value("block_f_tol", c.block_f_tol);
    c.extrapolate = doc.value("extrapolate", c.extrapolate);
    c.init.max_iter = doc.value("init_max_iter", c.init.max_iter);
    c.init.max_evals = doc.value("init_max_evals", c.init.max_evals);
    c.mode.tol = doc.value("mode_tol", c.mode.tol);
    c.mode.max_iter = doc.value("mode_max_iter", c.mode.max_iter);
    return c;
  });
}

Json fit_config_to_json(const FitConfig& c) {
  return {{"rounds", c.rounds},
          {"max_outer", c.max_outer},
          {"tol_rel", c.tol_rel},
          {"tol_abs", c.tol_abs},
          {"n_samples", c.n_samples},
          {"n_check", c.n_check},
          {"n_final", c.n_final},
          {"antithetic", c.antithetic},
          {"seed", c.seed},
          {"threads", c.threads},
          {"block_evals", c.block_evals},
          {"block_f_tol", c.block_f_tol},
          {"extrapolate", c.extrapolate},
          {"init_max_iter", c.init.max_iter},
          {"init_max_evals", c.init.max_evals},
          {"mode_tol", c.mode.tol},
          {"mode_max_iter", c.mode.max_iter}};
}

std::map<std::string, Scenario> read_scenarios(const std::string& path, const MrssSpec& spec,
                                               int horizon) {
  const CsvTable tab = read_csv(path);
  const int cid = tab.column("subject_id"), cs = tab.column("step");
  std::map<std::string, Scenario> out;
  std::vector<std::pair<std::string, int>> stream_cols, cov_cols;
  for (std::size_t j = 0; j < tab.header.size(); ++j) {
    if (static_cast<int>(j) == cid || static_cast<int>(j) == cs) continue;
    const auto& name = tab.header[j];
    bool is_cov = false;
    for (const auto& c : spec.covariates) is_cov = is_cov || c == name;
    (is_cov ? cov_cols : stream_cols).emplace_back(name, static_cast<int>(j));
  }
  std::vector<std::string> missing;
  for (const auto& g : spec.gate_streams())
    if (tab.column(g, false) < 0) missing.push_back(g);
  for (const auto& c : spec.covariates)
    if (tab.column(c, false) < 0) missing.push_back(c);
  if (!missing.empty()) {
    std::string names;
    for (const auto& n : missing) names += (names.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::ScenarioIncomplete, tab.file + " lacks columns " + names);
  }
  for (std::size_t r = 0; r < tab.rows.size(); ++r) {
    const std::string& id = tab.rows[r][cid];
    const int step = tab.integer(r, cs);
    if (step < 1 || step > horizon) tab.fail(r, "step", "step outside 1.." + std::to_string(horizon));
    Scenario& sc = out[id];
    if (sc.x.rows() == 0) {
      sc.x = Matrix::Constant(horizon, spec.n_covariates(), NAN);
      for (const auto& [name, _] : stream_cols) sc.streams[name].assign(horizon, NAN);
    }
    for (const auto& [name, j] : stream_cols) sc.streams[name][step - 1] = tab.number(r, j);
    for (const auto& [name, j] : cov_cols) {
      int k = 0;
      while (spec.covariates[k] != name) ++k;
      sc.x(step - 1, k) = tab.number(r, j);
    }
  }
  return out;
}

Json manifest_to_json(const RunManifest& m) {
  Json inputs = Json::object();
  for (const auto& [path, digest] : m.inputs) inputs[path] = digest;
  return {{"command", m.command},   {"config_hash", m.config_hash}, {"seed", m.seed},
          {"version", m.version},   {"inputs", inputs},            {"wall_time_s", m.wall_time},
          {"outputs", m.outputs}};
}

}  // namespace mrss::io
