#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "autopinn/pipeline.hpp"

namespace autopinn {

enum class RunMode { Full, Preset, BoOnly, TrainOnly };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

/// One raw `key = value` assignment and where it came from ("cfg: line 3",
/// "flag --mode"), for error messages and precedence. A repeated key is an
/// error inside a file; flag entries replace whatever came before them.
struct ConfigEntry {
  std::string key;
  std::string value;
  std::string location;
  bool from_flag = false;
};

/// A fully resolved run description. Bare hyperparameter keys (layers,
/// neurons, lr, n_domain, n_boundary, n_initial, w_R, w_B, w_I) mean a row
/// value in preset/train-only modes and collapse the matching search
/// dimension to a single point in full/bo-only modes; either way explicit
/// values are range-checked against the effective search bounds. Published
/// preset rows themselves bypass the bounds.
struct RunConfig {
  std::string problem;  // canonical: helmholtz2d | burgers1d | poisson<n>d
  double a1 = 1.0;      // oscillator counts and wavenumber (helmholtz2d)
  double a2 = 4.0;
  double k = 1.0;
  double nu = 0.01 / 3.14159265358979323846;  // viscosity (burgers1d)
  int n = 3;                                  // dimension count (poisson)
  RunMode mode = RunMode::Full;
  NetKind net = NetKind::FCNN;
  ActivationKind activation = ActivationKind::TG;
  StagePlan plan;
  int bo_init = 10;  // search budget: initial design + guided trials
  int bo_iter = 20;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir;    // empty: no artifacts
  std::string reference;  // truth dataset path, required for burgers1d runs
  std::optional<HyperParams> hyper;          // resolved row (preset/train-only)
  std::map<std::string, double> overrides;   // explicit bare-key values
  SearchSpace space;                         // effective space after edits
};

/// `key = value` lines; full-line # comments and blank lines are skipped.
/// Returns raw assignments in file order; resolution happens separately.
std::vector<ConfigEntry> read_config_file(const std::string& path);

/// Folds raw assignments (later entries win) into a validated RunConfig with
/// every default resolved. Unknown keys, inapplicable keys, malformed or
/// out-of-range values throw ValidationError naming the offending location.
RunConfig resolve_config(const std::vector<ConfigEntry>& entries);

/// read_config_file + flag overrides (appended after the file, so they win)
/// + resolve_config. An empty path skips the file and resolves flags alone.
RunConfig parse_config(const std::string& path,
                       const std::vector<ConfigEntry>& overrides = {});

/// Canonical echo of a resolved config; parsing it back reproduces the same
/// resolved config, and re-serializing that reproduces the same bytes.
std::string serialize_config(const RunConfig& config);

/// Instantiates the selected benchmark with the configured parameters; for
/// burgers1d the reference dataset is loaded and attached, and a missing
/// reference path fails here, before any training.
PdeProblem make_problem(const RunConfig& config);

/// make_problem + run_full with the configured mode, budgets, and seeds.
RunReport run_config(const RunConfig& config);

}  // namespace autopinn
