#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autopinn/network.hpp"
#include "autopinn/problems.hpp"
#include "autopinn/training.hpp"

namespace autopinn {

/// One stepped search dimension; every emitted point is snapped to
/// lo + k*step and clamped into [lo, hi].
struct SpaceDim {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;
};

struct SearchSpace {
  std::vector<SpaceDim> dims;

  int size() const { return static_cast<int>(dims.size()); }
  double snap(int d, double v) const;
  Eigen::VectorXd snap(Eigen::VectorXd v) const;
  bool on_grid(const Eigen::VectorXd& v, double tol = 1e-9) const;
  void validate() const;
  /// Index of the dimension with this name, -1 if absent.
  int find(const std::string& name) const;
};

/// The tuned-dimension roster for a benchmark run, in fixed order: layers,
/// neurons, lr, n_domain, n_boundary, [n_initial], w_R, w_B, [w_I]. The
/// initial-condition dimensions exist only for time-dependent problems.
/// Residual blocks search a shallower depth range than plain stacks.
SearchSpace default_search_space(bool has_initial, NetKind kind);

/// One candidate training configuration.
struct HyperParams {
  int layers = 0;
  int width = 0;
  double lr = 0.0;
  int n_domain = 0;
  int n_boundary = 0;
  std::optional<int> n_initial;
  double w_R = 0.0;
  double w_B = 0.0;
  std::optional<double> w_I;

  bool operator==(const HyperParams&) const = default;
};

/// Space-point <-> HyperParams conversion for spaces whose dimension names
/// come from the default roster. Unknown names throw ValidationError.
HyperParams decode_point(const SearchSpace& space, const Eigen::VectorXd& v);
Eigen::VectorXd encode_point(const SearchSpace& space, const HyperParams& h);

LossWeights loss_weights(const HyperParams& h);

/// Gaussian-process surrogate over search-space points. Inputs are min-max
/// normalized per dimension to the unit cube and targets standardized; the
/// kernel is an anisotropic squared exponential with per-dimension
/// lengthscales. Factorization state is kept for O(n^2) predictions.
struct GprModel {
  Eigen::MatrixXd X;       // D x n normalized inputs
  Eigen::VectorXd y;       // standardized targets
  Eigen::VectorXd x_lo, x_span;
  double y_mean = 0.0, y_std = 1.0;
  Eigen::VectorXd ell;     // lengthscales, unit-cube metric
  double sigma_f2 = 1.0;   // signal variance
  double sigma_n2 = 1e-8;  // noise variance
  double jitter = 0.0;     // extra diagonal required by the factorization
  Eigen::MatrixXd chol;    // lower Cholesky of K + (sigma_n2 + jitter) I
  Eigen::VectorXd alpha;   // (K + (sigma_n2 + jitter) I)^{-1} y
  double log_marginal = 0.0;

  int dim() const { return static_cast<int>(X.rows()); }
  int n() const { return static_cast<int>(X.cols()); }
};

/// Factorize at caller-chosen kernel hyperparameters (lengthscales in the
/// normalized metric). sigma_n2 = 0 is allowed for exact interpolation.
GprModel gpr_build(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& ell, double sigma_f2,
                   double sigma_n2);

/// Fit kernel hyperparameters by multi-start (8) quasi-Newton maximization
/// of the log marginal likelihood; noise variance floored at 1e-8 and the
/// Cholesky jittered in escalating steps up to 1e-6 when needed. Requires at
/// least two distinct input points.
GprModel gpr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Posterior mean and standard deviation at one raw-space point, via
/// triangular solves; negative variance from rounding is clipped to zero.
std::pair<double, double> gpr_predict(const GprModel& model,
                                      const Eigen::VectorXd& x);

/// EI = d*Phi(d/sigma) + sigma*phi(d/sigma) with d = mu - f_best, for
/// maximization; sigma = 0 degenerates to max(d, 0). Never negative.
double expected_improvement(double mu, double sigma, double f_best);

/// Acquisition maximization by stepped-candidate scan: 10,000 LHS candidates
/// snapped to the grid, plus the 50 best perturbed by +-1 step in each
/// dimension; ties resolve to the lowest candidate index.
Eigen::VectorXd propose_next(const GprModel& model, const SearchSpace& space,
                             double f_best, std::uint64_t seed);

/// Outcome of one training trial.
struct TrialRecord {
  int index = -1;
  Eigen::VectorXd point;   // search-space coordinates
  HyperParams h;           // decoded view (default-roster spaces)
  double objective = 0.0;  // -(L2 relative error); -10 on failure
  bool failed = false;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::string checkpoint;  // saved-model path, empty when not persisted
  Eigen::VectorXd params;  // trained parameters (in-memory runs only)
  bool from_log = false;   // replayed from a resume log
};

/// Build a network from h, sample collocation sets, run full-batch ADAM for
/// pretrain_iters steps at h's loss weights, and score by the negated L2
/// relative error on the problem's evaluation set. Divergence (non-finite
/// loss, gradient, or error) marks the trial failed with objective -10.
TrialRecord evaluate_trial(const PdeProblem& problem, NetKind kind,
                           ActivationKind activation, const HyperParams& h,
                           std::uint64_t seed, long pretrain_iters = 500);

/// Trial oracle for the search loop: maps a space point to its outcome.
using TrialFn = std::function<TrialRecord(
    const Eigen::VectorXd& point, int index, std::uint64_t trial_seed)>;

struct BoOptions {
  int n_init = 10;
  int n_iter = 20;
  std::uint64_t seed = 0;
  int jobs = 1;          // parallelism for the independent initial trials
  std::string log_path;  // empty: in-memory only; existing file: resume
};

struct BoResult {
  TrialRecord best;
  std::vector<TrialRecord> log;
};

/// Sequential model-based search: an LHS initial design of n_init points,
/// then n_iter rounds of fit -> propose -> evaluate. Returns the best
/// non-failed trial (ties to the lowest index) and the full log; throws
/// RuntimeError when every trial failed. With a log_path the log is written
/// after each trial and an existing file resumes the run, skipping completed
/// trials; same options and seed always reproduce an identical log.
BoResult bo_search(const SearchSpace& space, const TrialFn& fn,
                   const BoOptions& opt);

/// The same loop driving evaluate_trial on a benchmark problem. When
/// ckpt_dir is set, each successful trial's weights are saved to
/// ckpt_dir/trial_NNN.ckpt and replayed from there instead of retrained.
BoResult bo_search(const PdeProblem& problem, NetKind kind,
                   ActivationKind activation, const SearchSpace& space,
                   const BoOptions& opt, long pretrain_iters = 500,
                   const std::string& ckpt_dir = "");

/// Structured text log, one record per trial: index, status, seed,
/// objective, wall time, checkpoint path, and the point coordinates keyed by
/// space dimension name. Trained parameters live in checkpoints, not here.
void write_bo_log(const std::vector<TrialRecord>& log,
                  const SearchSpace& space, const std::string& path);
std::vector<TrialRecord> read_bo_log(const std::string& path,
                                     const SearchSpace& space);

}  // namespace autopinn
