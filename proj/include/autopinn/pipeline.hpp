#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autopinn/bayesopt.hpp"
#include "autopinn/problems.hpp"
#include "autopinn/training.hpp"

namespace autopinn {

/// Iteration budgets for the three training stages plus the in-training
/// adaptation knobs. Defaults give the standard 500 + 5000 + 10000 split
/// with 10 refinement rounds of 50 points from 1000 candidates each.
struct StagePlan {
  long pretrain_iters = 500;   // per-trial budget in the search stage
  long stage2_iters = 5000;    // weight-adapted first-order training
  long stage3_iters = 10000;   // quasi-Newton outer iterations
  long ema_period = 1000;      // weight-adaptation cadence in stage 2
  int rar_rounds = 10;         // refinement rounds before stage 2
  int rar_candidates = 1000;   // candidate pool per refinement round
  int rar_new = 50;            // points kept per refinement round

  /// All fields must be nonnegative; throws ValidationError otherwise.
  void validate() const;
};

/// Error level and wall time after one completed stage. Wall time is
/// in-memory only: the serialized report omits it so identical runs
/// produce identical files.
struct StageOutcome {
  std::string name;  // stage1 | stage2 | stage3
  double l2 = 0.0;   // relative error on the problem's evaluation set
  double wall_seconds = 0.0;
};

/// Everything a finished or aborted run reports: the chosen row, budgets,
/// seeds, per-stage errors, the concatenated loss trace, and sample-set
/// accounting. `params` holds the latest trained weights in memory;
/// serialized reports reference checkpoints instead.
struct RunReport {
  std::string problem;
  NetKind kind = NetKind::FCNN;
  ActivationKind activation = ActivationKind::TG;
  HyperParams h;
  StagePlan plan;
  std::uint64_t seed = 0;
  std::array<std::uint64_t, 3> stage_seeds{};
  std::vector<StageOutcome> stages;   // one entry per completed stage
  double final_l2 = 0.0;              // error after the last completed stage
  Eigen::VectorXd final_per_channel;  // per-output-channel relative errors
  std::vector<TraceRow> trace;
  int n_domain = 0;     // domain points before refinement
  int n_boundary = 0;
  int n_initial = 0;
  int n_rar_added = 0;  // domain points added by refinement
  long param_count = 0;
  std::string failed_stage;  // empty on success, else the aborted stage
  Eigen::VectorXd params;    // final weights (not serialized)
};

/// Knobs around run_full that are not part of the stage budgets: network
/// family and activation, search width, initial-trial parallelism, the
/// artifact directory, and an optional fixed row that skips the search.
struct PipelineOptions {
  NetKind kind = NetKind::FCNN;
  ActivationKind activation = ActivationKind::TG;
  int bo_init = 10;     // initial-design trials in the search stage
  int bo_iter = 20;     // surrogate-guided trials in the search stage
  int jobs = 1;         // threads for the independent initial trials
  std::string out_dir;  // empty: no artifacts written
  std::optional<HyperParams> fixed_h;  // set: skip the search stage
};

/// Three-stage run: hyperparameter search (or the fixed row) with ADAM
/// pre-training, residual-driven refinement plus weight-adapted ADAM, then
/// quasi-Newton refinement on frozen weights and samples. Per-stage seeds
/// derive from the master seed by fixed offsets, so equal inputs give
/// bit-identical reports. A RuntimeError inside a stage aborts the run and
/// returns the partial report with failed_stage set; invalid inputs throw.
/// With out_dir set, artifacts land there: report, bo_log, trace.csv,
/// samples.csv, grid.csv, and checkpoints/stage{1,2,3}.
RunReport run_full(const PdeProblem& problem, const SearchSpace& space,
                   const StagePlan& plan, std::uint64_t seed,
                   const PipelineOptions& opt = {});

/// Published hyperparameter rows for the five stock benchmarks, enabling
/// search-skip runs. Unknown names throw ValidationError.
HyperParams preset(const std::string& problem_name);

/// CSV of evaluation-set inputs and predictions; when the problem can score
/// itself the truth and pointwise absolute error columns are appended.
/// Problems without truth fall back to a 201x201 grid over a 2D box.
void export_prediction_grid(const PdeProblem& problem, const JetModel& model,
                            const std::string& path);

/// Structured text, one `key value` line per field; stage rows serialize as
/// `stage <name> l2 <value>`. Timing fields are omitted so identical runs
/// write identical bytes. read_run_report inverts write_run_report exactly
/// (trace and weights excluded; they live in trace.csv and checkpoints).
void write_run_report(const RunReport& report, const std::string& path);
RunReport read_run_report(const std::string& path);

}  // namespace autopinn
