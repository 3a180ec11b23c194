#include "autopinn/config.hpp"

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "autopinn/errors.hpp"

namespace autopinn {

namespace {

/// Shortest decimal form that parses back to exactly the same double, so
/// echoes stay readable and round-trip losslessly.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const ConfigEntry& e) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(e.value.c_str(), &end);
  if (end == e.value.c_str() || *end != '\0' || errno == ERANGE ||
      !std::isfinite(v))
    throw ValidationError(e.location + ": malformed number '" + e.value +
                          "' for key '" + e.key + "'");
  return v;
}

long parse_long(const ConfigEntry& e) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(e.value.c_str(), &end, 10);
  if (end == e.value.c_str() || *end != '\0' || errno == ERANGE)
    throw ValidationError(e.location + ": malformed integer '" + e.value +
                          "' for key '" + e.key + "'");
  return v;
}

int parse_int(const ConfigEntry& e) { return static_cast<int>(parse_long(e)); }

std::uint64_t parse_seed(const ConfigEntry& e) {
  const std::string& s = e.value;
  if (s.empty() || s[0] == '-' || !std::isdigit(static_cast<unsigned char>(s[0])))
    throw ValidationError(e.location + ": malformed seed '" + s + "'");
  errno = 0;
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(s.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE)
    throw ValidationError(e.location + ": malformed seed '" + s + "'");
  return v;
}

/// Bare keys that set a row value or pin a search dimension. Count keys hold
/// integers; the rest are real-valued.
bool integer_hyper_key(const std::string& key) {
  return key == "layers" || key == "neurons" || key == "n_domain" ||
         key == "n_boundary" || key == "n_initial";
}

std::vector<std::string> hyper_roster(bool has_initial) {
  if (has_initial)
    return {"layers", "neurons",    "lr",  "n_domain", "n_boundary",
            "n_initial", "w_R", "w_B", "w_I"};
  return {"layers", "neurons", "lr", "n_domain", "n_boundary", "w_R", "w_B"};
}

void apply_overrides(const std::map<std::string, double>& overrides,
                     HyperParams& row) {
  for (const auto& [key, v] : overrides) {
    if (key == "layers") row.layers = static_cast<int>(v);
    else if (key == "neurons") row.width = static_cast<int>(v);
    else if (key == "lr") row.lr = v;
    else if (key == "n_domain") row.n_domain = static_cast<int>(v);
    else if (key == "n_boundary") row.n_boundary = static_cast<int>(v);
    else if (key == "n_initial") row.n_initial = static_cast<int>(v);
    else if (key == "w_R") row.w_R = v;
    else if (key == "w_B") row.w_B = v;
    else if (key == "w_I") row.w_I = v;
  }
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Full: return "full";
    case RunMode::Preset: return "preset";
    case RunMode::BoOnly: return "bo-only";
    case RunMode::TrainOnly: return "train-only";
  }
  throw ValidationError("unknown run mode");
}

RunMode run_mode_from_string(const std::string& name) {
  if (name == "full") return RunMode::Full;
  if (name == "preset") return RunMode::Preset;
  if (name == "bo-only") return RunMode::BoOnly;
  if (name == "train-only") return RunMode::TrainOnly;
  throw ValidationError("unknown run mode '" + name +
                        "' (expected full, preset, bo-only, or train-only)");
}

std::vector<ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open config file: " + path);
  std::vector<ConfigEntry> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string loc = path + ": line " + std::to_string(lineno);
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError(loc + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ValidationError(loc + ": empty key");
    if (value.empty())
      throw ValidationError(loc + ": empty value for key '" + key + "'");
    out.push_back({key, value, loc, false});
  }
  return out;
}

RunConfig resolve_config(const std::vector<ConfigEntry>& entries) {
  std::map<std::string, ConfigEntry> kv;
  for (const auto& e : entries) {
    const auto it = kv.find(e.key);
    if (it != kv.end() && !e.from_flag)
      throw ValidationError(e.location + ": duplicate key '" + e.key +
                            "' (already set at " + it->second.location + ")");
    kv[e.key] = e;
  }
  const auto take = [&kv](const std::string& key) -> std::optional<ConfigEntry> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    ConfigEntry e = it->second;
    kv.erase(it);
    return e;
  };

  RunConfig c;

  const auto pe = take("problem");
  if (!pe) throw ValidationError("config: missing required key 'problem'");
  std::string pname = pe->value;
  std::optional<int> alias_n;
  if (pname.size() == 9 && pname.rfind("poisson", 0) == 0 &&
      pname.back() == 'd' &&
      std::isdigit(static_cast<unsigned char>(pname[7]))) {
    alias_n = pname[7] - '0';
    pname = "poisson";
  } else if (pname != "helmholtz2d" && pname != "burgers1d" &&
             pname != "poisson") {
    throw ValidationError(pe->location + ": unknown problem '" + pe->value +
                          "'");
  }

  const auto ne = take("n");
  if (pname == "poisson") {
    if (ne) {
      const int n = parse_int(*ne);
      if (alias_n && n != *alias_n)
        throw ValidationError(ne->location + ": n = " + std::to_string(n) +
                              " conflicts with problem '" + pe->value + "'");
      c.n = n;
    } else if (alias_n) {
      c.n = *alias_n;
    }
    if (c.n < 2 || c.n > 8)
      throw ValidationError((ne ? ne->location : pe->location) +
                            ": poisson dimension must be in [2, 8]");
    c.problem = "poisson" + std::to_string(c.n) + "d";
  } else {
    if (ne)
      throw ValidationError(ne->location +
                            ": key 'n' applies only to poisson problems");
    c.problem = pname;
  }

  const bool is_helmholtz = c.problem == "helmholtz2d";
  const bool is_burgers = c.problem == "burgers1d";
  if (auto e = take("a1")) {
    if (!is_helmholtz)
      throw ValidationError(e->location + ": key 'a1' applies only to helmholtz2d");
    c.a1 = parse_double(*e);
  }
  if (auto e = take("a2")) {
    if (!is_helmholtz)
      throw ValidationError(e->location + ": key 'a2' applies only to helmholtz2d");
    c.a2 = parse_double(*e);
  }
  if (auto e = take("k")) {
    if (!is_helmholtz)
      throw ValidationError(e->location + ": key 'k' applies only to helmholtz2d");
    c.k = parse_double(*e);
  }
  if (auto e = take("nu")) {
    if (!is_burgers)
      throw ValidationError(e->location + ": key 'nu' applies only to burgers1d");
    c.nu = parse_double(*e);
    if (c.nu <= 0.0)
      throw ValidationError(e->location + ": nu must be positive");
  }

  if (auto e = take("mode")) {
    try {
      c.mode = run_mode_from_string(e->value);
    } catch (const ValidationError& err) {
      throw ValidationError(e->location + ": " + err.what());
    }
  }
  if (auto e = take("net")) {
    try {
      c.net = net_kind_from_string(e->value);
    } catch (const ValidationError& err) {
      throw ValidationError(e->location + ": " + err.what());
    }
  }
  if (auto e = take("activation")) {
    try {
      c.activation = activation_from_string(e->value);
    } catch (const ValidationError& err) {
      throw ValidationError(e->location + ": " + err.what());
    }
  }

  if (auto e = take("seed")) c.seed = parse_seed(*e);
  if (auto e = take("jobs")) {
    c.jobs = parse_int(*e);
    if (c.jobs < 1)
      throw ValidationError(e->location + ": jobs must be at least 1");
  }
  if (auto e = take("out_dir")) c.out_dir = e->value;
  if (auto e = take("reference")) c.reference = e->value;
  if (auto e = take("bo.init")) {
    c.bo_init = parse_int(*e);
    if (c.bo_init < 1)
      throw ValidationError(e->location + ": bo.init must be at least 1");
  }
  if (auto e = take("bo.iter")) {
    c.bo_iter = parse_int(*e);
    if (c.bo_iter < 0)
      throw ValidationError(e->location + ": bo.iter must be nonnegative");
  }

  std::map<std::string, std::string> explicit_plan;  // key -> location
  const auto plan_long = [&](const char* key, long& dst) {
    if (auto e = take(std::string("plan.") + key)) {
      dst = parse_long(*e);
      explicit_plan[key] = e->location;
    }
  };
  const auto plan_int = [&](const char* key, int& dst) {
    if (auto e = take(std::string("plan.") + key)) {
      dst = parse_int(*e);
      explicit_plan[key] = e->location;
    }
  };
  plan_long("pretrain_iters", c.plan.pretrain_iters);
  plan_long("stage2_iters", c.plan.stage2_iters);
  plan_long("stage3_iters", c.plan.stage3_iters);
  plan_long("ema_period", c.plan.ema_period);
  plan_int("rar_rounds", c.plan.rar_rounds);
  plan_int("rar_candidates", c.plan.rar_candidates);
  plan_int("rar_new", c.plan.rar_new);
  c.plan.validate();

  c.space = default_search_space(is_burgers, c.net);
  std::vector<ConfigEntry> space_edits;
  for (auto it = kv.begin(); it != kv.end();) {
    if (it->first.rfind("space.", 0) == 0) {
      space_edits.push_back(it->second);
      it = kv.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& e : space_edits) {
    const std::string rest = e.key.substr(6);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == rest.size())
      throw ValidationError(e.location + ": malformed key '" + e.key +
                            "' (expected space.<dimension>.<lo|hi|step>)");
    const std::string dname = rest.substr(0, dot);
    const std::string field = rest.substr(dot + 1);
    const int d = c.space.find(dname);
    if (d < 0)
      throw ValidationError(e.location + ": no search dimension '" + dname +
                            "' for " + c.problem);
    const double v = parse_double(e);
    if (field == "lo") c.space.dims[d].lo = v;
    else if (field == "hi") c.space.dims[d].hi = v;
    else if (field == "step") c.space.dims[d].step = v;
    else
      throw ValidationError(e.location + ": unknown space field '" + field +
                            "' (expected lo, hi, or step)");
  }
  try {
    c.space.validate();
  } catch (const ValidationError& err) {
    throw ValidationError(std::string("search space: ") + err.what());
  }

  const std::vector<std::string> roster = hyper_roster(is_burgers);
  for (const char* key : {"n_initial", "w_I"}) {
    if (is_burgers) continue;
    if (auto e = take(key))
      throw ValidationError(e->location + ": key '" + std::string(key) +
                            "' applies only to problems with an initial condition");
  }
  for (const auto& key : roster) {
    const auto e = take(key);
    if (!e) continue;
    const double v = parse_double(*e);
    if (integer_hyper_key(key) && v != std::floor(v))
      throw ValidationError(e->location + ": " + key + " must be an integer");
    const SpaceDim& dim = c.space.dims[c.space.find(key)];
    if (v < dim.lo || v > dim.hi)
      throw ValidationError(e->location + ": " + key + " = " + fmt(v) +
                            " outside [" + fmt(dim.lo) + ", " + fmt(dim.hi) +
                            "]");
    c.overrides[key] = v;
  }

  switch (c.mode) {
    case RunMode::Preset: {
      HyperParams row = preset(c.problem);
      apply_overrides(c.overrides, row);
      c.hyper = row;
      break;
    }
    case RunMode::TrainOnly: {
      for (const auto& key : roster)
        if (!c.overrides.count(key))
          throw ValidationError("train-only mode requires key '" + key + "'");
      HyperParams row;
      apply_overrides(c.overrides, row);
      c.hyper = row;
      break;
    }
    case RunMode::Full:
    case RunMode::BoOnly: {
      for (const auto& [key, v] : c.overrides) {
        const int d = c.space.find(key);
        c.space.dims[d].lo = v;
        c.space.dims[d].hi = v;
      }
      if (c.mode == RunMode::BoOnly) {
        const auto forced_zero = [&](const char* key, long value) {
          const auto it = explicit_plan.find(key);
          if (it != explicit_plan.end() && value != 0)
            throw ValidationError(it->second + ": plan." + key +
                                  " must be 0 in bo-only mode");
        };
        forced_zero("stage2_iters", c.plan.stage2_iters);
        forced_zero("stage3_iters", c.plan.stage3_iters);
        forced_zero("rar_rounds", c.plan.rar_rounds);
        c.plan.stage2_iters = 0;
        c.plan.stage3_iters = 0;
        c.plan.rar_rounds = 0;
      }
      break;
    }
  }

  if (!kv.empty()) {
    const ConfigEntry& e = kv.begin()->second;
    throw ValidationError(e.location + ": unknown key '" + e.key + "'");
  }
  return c;
}

RunConfig parse_config(const std::string& path,
                       const std::vector<ConfigEntry>& overrides) {
  std::vector<ConfigEntry> entries;
  if (!path.empty()) entries = read_config_file(path);
  entries.insert(entries.end(), overrides.begin(), overrides.end());
  return resolve_config(entries);
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "# run config v1\n";
  out << "problem = " << c.problem << "\n";
  if (c.problem == "helmholtz2d") {
    out << "a1 = " << fmt(c.a1) << "\n";
    out << "a2 = " << fmt(c.a2) << "\n";
    out << "k = " << fmt(c.k) << "\n";
  }
  if (c.problem == "burgers1d") out << "nu = " << fmt(c.nu) << "\n";
  out << "mode = " << to_string(c.mode) << "\n";
  out << "net = " << to_string(c.net) << "\n";
  out << "activation = " << to_string(c.activation) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "jobs = " << c.jobs << "\n";
  if (!c.out_dir.empty()) out << "out_dir = " << c.out_dir << "\n";
  if (!c.reference.empty()) out << "reference = " << c.reference << "\n";
  out << "bo.init = " << c.bo_init << "\n";
  out << "bo.iter = " << c.bo_iter << "\n";
  out << "plan.pretrain_iters = " << c.plan.pretrain_iters << "\n";
  out << "plan.stage2_iters = " << c.plan.stage2_iters << "\n";
  out << "plan.stage3_iters = " << c.plan.stage3_iters << "\n";
  out << "plan.ema_period = " << c.plan.ema_period << "\n";
  out << "plan.rar_rounds = " << c.plan.rar_rounds << "\n";
  out << "plan.rar_candidates = " << c.plan.rar_candidates << "\n";
  out << "plan.rar_new = " << c.plan.rar_new << "\n";
  for (const auto& dim : c.space.dims) {
    out << "space." << dim.name << ".lo = " << fmt(dim.lo) << "\n";
    out << "space." << dim.name << ".hi = " << fmt(dim.hi) << "\n";
    out << "space." << dim.name << ".step = " << fmt(dim.step) << "\n";
  }
  for (const auto& key : hyper_roster(c.problem == "burgers1d")) {
    const auto it = c.overrides.find(key);
    if (it != c.overrides.end())
      out << key << " = " << fmt(it->second) << "\n";
  }
  return out.str();
}

PdeProblem make_problem(const RunConfig& c) {
  if (c.problem == "helmholtz2d") return helmholtz2d(c.a1, c.a2, c.k);
  if (c.problem == "burgers1d") {
    if (c.reference.empty())
      throw ValidationError(
          "burgers1d needs 'reference = <dataset.csv>': its truth metrics "
          "come from a reference dataset");
    PdeProblem p = burgers1d(c.nu);
    p.attach_reference(load_reference(c.reference, p));
    return p;
  }
  return poisson_nd(c.n);
}

RunReport run_config(const RunConfig& c) {
  const PdeProblem problem = make_problem(c);
  PipelineOptions opt;
  opt.kind = c.net;
  opt.activation = c.activation;
  opt.bo_init = c.bo_init;
  opt.bo_iter = c.bo_iter;
  opt.jobs = c.jobs;
  opt.out_dir = c.out_dir;
  opt.fixed_h = c.hyper;
  return run_full(problem, c.space, c.plan, c.seed, opt);
}

}  // namespace autopinn
