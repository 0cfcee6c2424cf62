#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace slowfast {

using nlohmann::json;

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::StrongRate: return "strong-rate";
    case ExperimentKind::WeakRate: return "weak-rate";
    case ExperimentKind::CltRate: return "clt-rate";
    case ExperimentKind::OracleSuite: return "oracle-suite";
    case ExperimentKind::MomentDiag: return "moment-diag";
  }
  return "strong-rate";
}

ExperimentKind kind_from_name(const std::string& name) {
  if (name == "strong-rate") return ExperimentKind::StrongRate;
  if (name == "weak-rate") return ExperimentKind::WeakRate;
  if (name == "clt-rate") return ExperimentKind::CltRate;
  if (name == "oracle-suite") return ExperimentKind::OracleSuite;
  if (name == "moment-diag" || name == "moment-diagnostics")
    return ExperimentKind::MomentDiag;
  throw ConfigError("unknown experiment kind: " + name);
}

CoefficientPtr FamilyConfig::build() const {
  try {
    if (name == "linear")
      return std::make_shared<LinearFamily>(a, b, c, d);
    if (name == "bounded")
      return std::make_shared<BoundedFamily>(a, b, d, clip, 0.0);
    if (name == "bounded-holder")
      return std::make_shared<BoundedFamily>(a, b, d, clip, kappa);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("family parameters rejected: ") + e.what());
  }
  throw ConfigError("unknown coefficient family: " + name);
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.epsilon = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256,
                 1.0 / 512};
  switch (kind) {
    case ExperimentKind::StrongRate:
      cfg.replicas = 2000;
      cfg.slope_min = 0.40;
      cfg.slope_max = 0.60;
      break;
    case ExperimentKind::WeakRate:
      cfg.replicas = 2000;
      cfg.slope_min = 0.80;
      cfg.slope_max = 1.20;
      break;
    case ExperimentKind::CltRate:
      cfg.replicas = 5000;
      cfg.theta = 0.25 * kPi;
      cfg.slope_min = 0.35;
      cfg.slope_max = 0.65;
      break;
    case ExperimentKind::OracleSuite:
      cfg.replicas = 1;
      cfg.epsilon.clear();
      break;
    case ExperimentKind::MomentDiag:
      cfg.replicas = 400;
      cfg.family.name = "bounded";
      cfg.family.d = 1.0;
      break;
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (modes < 1 || modes > 4096)
    throw ConfigError("modes must be in [1, 4096]");
  if (!(time_horizon > 0.0))
    throw ConfigError("time_horizon must be positive");
  if (checkpoints < 1) throw ConfigError("checkpoints must be >= 1");
  if (!(micro_factor > 0.0) || micro_factor > 0.05)
    throw ConfigError("micro_factor must lie in (0, 0.05]");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (replicas < 1) throw ConfigError("replicas must be >= 1");
  const bool rate_kind = kind == ExperimentKind::StrongRate ||
                         kind == ExperimentKind::WeakRate ||
                         kind == ExperimentKind::CltRate;
  if (rate_kind) {
    if (replicas < 100)
      throw ConfigError("rate experiments need replicas >= 100");
    if (epsilon.size() < 4)
      throw ConfigError("rate experiments need an epsilon grid of >= 4");
  }
  if (kind == ExperimentKind::MomentDiag && epsilon.empty())
    throw ConfigError("moment-diag needs at least one epsilon");
  for (double e : epsilon)
    if (!(e > 0.0) || e > 1.0)
      throw ConfigError("epsilon values must lie in (0, 1]");
  for (size_t i = 1; i < epsilon.size(); ++i)
    if (!(epsilon[i] < epsilon[i - 1]))
      throw ConfigError("epsilon grid must be strictly decreasing");
  if (q1_scale < 0.0 || q2_scale < 0.0)
    throw ConfigError("noise scales must be >= 0");
  if (q1_scale > 0.0 && q1_exponent <= 1.0)
    throw ConfigError("q1_exponent must exceed 1 (trace-class noise)");
  if (q2_scale > 0.0 && q2_exponent <= 1.0)
    throw ConfigError("q2_exponent must exceed 1 (trace-class noise)");
  const size_t nm = static_cast<size_t>(modes);
  if (u0.size() > nm || v0.size() > nm || y0.size() > nm ||
      functional.size() > nm)
    throw ConfigError("mode coefficient lists longer than modes");
  if (!(slope_min < slope_max))
    throw ConfigError("slope window must satisfy slope_min < slope_max");
  if (kind == ExperimentKind::OracleSuite && draws < 1000)
    throw ConfigError("oracle suite needs draws >= 1000");
  if (kind == ExperimentKind::CltRate) {
    if (zbar_replicas < 100)
      throw ConfigError("clt-rate needs zbar_replicas >= 100");
    if (!(zbar_dt > 0.0) || zbar_dt > time_horizon)
      throw ConfigError("zbar_dt must lie in (0, time_horizon]");
  }
  // Family and estimator budgets: built eagerly so bad values fail here.
  const CoefficientPtr fam = family.build();
  const double margin = fam->mixing_margin();
  ergodic.validate(margin);
  psi.validate(margin);
}

std::vector<double> ExperimentConfig::padded(
    const std::vector<double>& modes_list) const {
  std::vector<double> out(static_cast<size_t>(modes), 0.0);
  std::copy(modes_list.begin(), modes_list.end(), out.begin());
  return out;
}

SimConfig ExperimentConfig::make_sim_config() const {
  try {
    SimConfig sim;
    sim.basis = make_basis(modes);
    sim.T = time_horizon;
    sim.checkpoints = checkpoints;
    sim.micro_factor = micro_factor;
    sim.q1 = power_law_noise(NoiseRole::Slow, modes, q1_exponent, q1_scale);
    sim.q2 = power_law_noise(NoiseRole::Fast, modes, q2_exponent, q2_scale);
    sim.u0 = padded(u0);
    sim.v0 = padded(v0);
    sim.y0 = padded(y0);
    sim.validate();
    return sim;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("simulation setup rejected: ") + e.what());
  }
}

namespace {

// ---- TOML subset ----------------------------------------------------------
// Supported: comments (#), blank lines, [section] headers (flattened as
// "section.key"), key = value with value one of integer, float, boolean,
// quoted string, or array of numbers.  That covers every config key; richer
// TOML is rejected loudly rather than half-parsed.

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Strips a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

json parse_toml_scalar(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty())
    throw ConfigError("toml line " + std::to_string(line_no) +
                      ": missing value");
  if (v == "true") return json(true);
  if (v == "false") return json(false);
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigError("toml line " + std::to_string(line_no) +
                        ": unterminated string");
    return json(v.substr(1, v.size() - 2));
  }
  try {
    size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos &&
        v.find("inf") == std::string::npos &&
        v.find("nan") == std::string::npos) {
      const long long i = std::stoll(v, &used);
      if (used == v.size()) return json(i);
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return json(d);
  } catch (const std::exception&) {
  }
  throw ConfigError("toml line " + std::to_string(line_no) +
                    ": cannot parse value '" + v + "'");
}

json parse_toml_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']')
      throw ConfigError("toml line " + std::to_string(line_no) +
                        ": unterminated array");
    json arr = json::array();
    const std::string body = v.substr(1, v.size() - 2);
    std::string item;
    std::stringstream ss(body);
    while (std::getline(ss, item, ',')) {
      if (trim(item).empty()) continue;
      arr.push_back(parse_toml_scalar(item, line_no));
    }
    return arr;
  }
  return parse_toml_scalar(v, line_no);
}

json parse_toml_subset(const std::string& text) {
  json out = json::object();
  std::string prefix;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3)
        throw ConfigError("toml line " + std::to_string(line_no) +
                          ": malformed section header");
      prefix = trim(body.substr(1, body.size() - 2)) + ".";
      continue;
    }
    const size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("toml line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty())
      throw ConfigError("toml line " + std::to_string(line_no) +
                        ": empty key");
    out[prefix + key] = parse_toml_value(body.substr(eq + 1), line_no);
  }
  return out;
}

// ---- typed field application ----------------------------------------------

double as_number(const json& v, const std::string& key) {
  if (!v.is_number())
    throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

long as_integer(const json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<long>();
  if (v.is_number()) {
    const double d = v.get<double>();
    const long i = static_cast<long>(d);
    if (static_cast<double>(i) == d) return i;
  }
  throw ConfigError("config key '" + key + "' must be an integer");
}

bool as_boolean(const json& v, const std::string& key) {
  if (!v.is_boolean())
    throw ConfigError("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string())
    throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> as_array(const json& v, const std::string& key) {
  if (!v.is_array())
    throw ConfigError("config key '" + key + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& item : v) out.push_back(as_number(item, key));
  return out;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const json& v,
               bool allow_kind) {
  if (key == "kind") {
    const ExperimentKind parsed = kind_from_name(as_string(v, key));
    if (!allow_kind && parsed != cfg.kind)
      throw ConfigError(std::string("config kind '") + kind_name(parsed) +
                        "' conflicts with selected kind '" +
                        kind_name(cfg.kind) + "'");
    cfg.kind = parsed;
  } else if (key == "seed") {
    if (v.is_number_unsigned())
      cfg.seed = v.get<std::uint64_t>();
    else
      cfg.seed = static_cast<std::uint64_t>(as_integer(v, key));
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(as_integer(v, key));
  } else if (key == "modes") {
    cfg.modes = static_cast<int>(as_integer(v, key));
  } else if (key == "time_horizon") {
    cfg.time_horizon = as_number(v, key);
  } else if (key == "checkpoints") {
    cfg.checkpoints = static_cast<int>(as_integer(v, key));
  } else if (key == "micro_factor") {
    cfg.micro_factor = as_number(v, key);
  } else if (key == "epsilon") {
    cfg.epsilon = as_array(v, key);
  } else if (key == "replicas") {
    cfg.replicas = as_integer(v, key);
  } else if (key == "family") {
    cfg.family.name = as_string(v, key);
  } else if (key == "family_a") {
    cfg.family.a = as_number(v, key);
  } else if (key == "family_b") {
    cfg.family.b = as_number(v, key);
  } else if (key == "family_c") {
    cfg.family.c = as_number(v, key);
  } else if (key == "family_d") {
    cfg.family.d = as_number(v, key);
  } else if (key == "family_clip") {
    cfg.family.clip = as_number(v, key);
  } else if (key == "family_kappa") {
    cfg.family.kappa = as_number(v, key);
  } else if (key == "q1_exponent") {
    cfg.q1_exponent = as_number(v, key);
  } else if (key == "q1_scale") {
    cfg.q1_scale = as_number(v, key);
  } else if (key == "q2_exponent") {
    cfg.q2_exponent = as_number(v, key);
  } else if (key == "q2_scale") {
    cfg.q2_scale = as_number(v, key);
  } else if (key == "u0") {
    cfg.u0 = as_array(v, key);
  } else if (key == "v0") {
    cfg.v0 = as_array(v, key);
  } else if (key == "y0") {
    cfg.y0 = as_array(v, key);
  } else if (key == "functional") {
    cfg.functional = as_array(v, key);
  } else if (key == "theta") {
    cfg.theta = as_number(v, key);
  } else if (key == "ergodic_burn_in") {
    cfg.ergodic.burn_in = as_number(v, key);
  } else if (key == "ergodic_horizon") {
    cfg.ergodic.horizon = as_number(v, key);
  } else if (key == "ergodic_dt") {
    cfg.ergodic.dt = as_number(v, key);
  } else if (key == "ergodic_replicas") {
    cfg.ergodic.replicas = static_cast<int>(as_integer(v, key));
  } else if (key == "ergodic_thinning") {
    cfg.ergodic.thinning = static_cast<int>(as_integer(v, key));
  } else if (key == "psi_t_cut") {
    cfg.psi.t_cut = as_number(v, key);
  } else if (key == "psi_replicas") {
    cfg.psi.replicas = static_cast<int>(as_integer(v, key));
  } else if (key == "psi_grading") {
    cfg.psi.grading = as_number(v, key);
  } else if (key == "psi_dt_max") {
    cfg.psi.dt_max = as_number(v, key);
  } else if (key == "dt_check") {
    cfg.dt_check = as_boolean(v, key);
  } else if (key == "slope_min") {
    cfg.slope_min = as_number(v, key);
  } else if (key == "slope_max") {
    cfg.slope_max = as_number(v, key);
  } else if (key == "draws") {
    cfg.draws = as_integer(v, key);
  } else if (key == "zbar_replicas") {
    cfg.zbar_replicas = as_integer(v, key);
  } else if (key == "zbar_dt") {
    cfg.zbar_dt = as_number(v, key);
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

ExperimentConfig config_from_json_object(const json& obj) {
  if (!obj.is_object()) throw ConfigError("config root must be an object");
  const json* root = &obj;
  // A full result record embeds its config echo; accept it directly.
  if (obj.contains("config") && obj.at("config").is_object())
    root = &obj.at("config");
  if (!root->contains("kind"))
    throw ConfigError("config is missing required key 'kind'");
  const ExperimentKind kind =
      kind_from_name(as_string(root->at("kind"), "kind"));
  ExperimentConfig cfg = default_config(kind);
  for (const auto& [key, value] : root->items())
    apply_key(cfg, key, value, /*allow_kind=*/true);
  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig config_from_text(const std::string& text,
                                  const std::string& format) {
  if (format == "json") {
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("json parse error: ") + e.what());
    }
    return config_from_json_object(obj);
  }
  if (format == "toml") return config_from_json_object(parse_toml_subset(text));
  throw ConfigError("unknown config format: " + format +
                    " (expected json or toml)");
}

ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const size_t dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "json") return config_from_text(buf.str(), "json");
  if (ext == "toml") return config_from_text(buf.str(), "toml");
  throw ConfigError("config file must end in .json or .toml: " + path);
}

void apply_override_json(ExperimentConfig& cfg, const std::string& json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("override parse error: ") + e.what());
  }
  if (!obj.is_object()) throw ConfigError("override must be a JSON object");
  for (const auto& [key, value] : obj.items())
    apply_key(cfg, key, value, /*allow_kind=*/false);
  cfg.validate();
}

std::string resolved_json(const ExperimentConfig& cfg) {
  json obj;
  obj["kind"] = kind_name(cfg.kind);
  obj["seed"] = cfg.seed;
  obj["threads"] = cfg.threads;
  obj["modes"] = cfg.modes;
  obj["time_horizon"] = cfg.time_horizon;
  obj["checkpoints"] = cfg.checkpoints;
  obj["micro_factor"] = cfg.micro_factor;
  obj["epsilon"] = cfg.epsilon;
  obj["replicas"] = cfg.replicas;
  obj["family"] = cfg.family.name;
  obj["family_a"] = cfg.family.a;
  obj["family_b"] = cfg.family.b;
  obj["family_c"] = cfg.family.c;
  obj["family_d"] = cfg.family.d;
  obj["family_clip"] = cfg.family.clip;
  obj["family_kappa"] = cfg.family.kappa;
  obj["q1_exponent"] = cfg.q1_exponent;
  obj["q1_scale"] = cfg.q1_scale;
  obj["q2_exponent"] = cfg.q2_exponent;
  obj["q2_scale"] = cfg.q2_scale;
  obj["u0"] = cfg.u0;
  obj["v0"] = cfg.v0;
  obj["y0"] = cfg.y0;
  obj["functional"] = cfg.functional;
  obj["theta"] = cfg.theta;
  obj["ergodic_burn_in"] = cfg.ergodic.burn_in;
  obj["ergodic_horizon"] = cfg.ergodic.horizon;
  obj["ergodic_dt"] = cfg.ergodic.dt;
  obj["ergodic_replicas"] = cfg.ergodic.replicas;
  obj["ergodic_thinning"] = cfg.ergodic.thinning;
  obj["psi_t_cut"] = cfg.psi.t_cut;
  obj["psi_replicas"] = cfg.psi.replicas;
  obj["psi_grading"] = cfg.psi.grading;
  obj["psi_dt_max"] = cfg.psi.dt_max;
  obj["dt_check"] = cfg.dt_check;
  obj["slope_min"] = cfg.slope_min;
  obj["slope_max"] = cfg.slope_max;
  obj["draws"] = cfg.draws;
  obj["zbar_replicas"] = cfg.zbar_replicas;
  obj["zbar_dt"] = cfg.zbar_dt;
  return obj.dump(2);
}

}  // namespace slowfast
