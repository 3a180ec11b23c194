#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autopinn/problems.hpp"
#include "autopinn/sampling.hpp"

namespace autopinn {

/// Multipliers of the composite loss terms. `w_I` exists only for problems
/// with a time axis; `w_D` is a hook for an observed-data term that no
/// benchmark configures.
struct LossWeights {
  double w_R = 1.0;
  double w_B = 1.0;
  std::optional<double> w_I;
  std::optional<double> w_D;
};

/// Mean-squared loss terms before weighting.
struct LossParts {
  double residual = 0.0;
  double boundary = 0.0;
  double initial = 0.0;
};

/// Exponential-moving-average controller state for the loss weights. The
/// smoothed magnitudes start from the first observed parts, so the controller
/// has no cold-start bias toward zero.
struct EmaState {
  double m_R = 0.0, m_B = 0.0, m_I = 0.0;
  double beta = 0.999;   // decay of the smoothed loss magnitudes
  double gamma = 0.999;  // decay of the weights toward the provisional ones
  bool initialized = false;
  long degenerate_count = 0;  // calls skipped because all magnitudes were zero
};

/// First/second-moment optimizer state; `lr` is the only tuned knob.
struct AdamState {
  AdamState(Eigen::Index n, double lr);

  Eigen::VectorXd m, v;
  long t = 0;
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// One logged training step; serialized by write_trace_csv.
struct TraceRow {
  long iter = 0;
  std::string stage;
  LossParts parts;
  double total = 0.0;
  LossWeights weights;
};

/// Composite loss of a model on a sample set:
///   total = w_R * mean(r^2) + w_B * mean((u-g)^2) [+ w_I * mean((u-h)^2)].
/// Throws ValidationError when the set or weights do not match the problem
/// (empty domain/boundary sets, initial term present iff time axis).
std::pair<double, LossParts> assemble_loss(const PdeProblem& problem,
                                           const JetModel& model,
                                           const SampleSet& set,
                                           const LossWeights& weights);

/// Same loss for a network, accumulating d(total)/d(params) into `grad`
/// (resized and zeroed first). Evaluation is chunked at kEvalChunk columns in
/// a fixed order, so results do not depend on set size alignment.
std::pair<double, LossParts> assemble_loss_grad(
    const PdeProblem& problem, const Architecture& arch,
    const Eigen::VectorXd& params, const SampleSet& set,
    const LossWeights& weights, Eigen::VectorXd& grad);

/// Bias-corrected first-order update; mutates the state, returns new params.
/// Throws RuntimeError on a non-finite gradient.
Eigen::VectorXd adam_step(AdamState& state, Eigen::VectorXd params,
                          const Eigen::VectorXd& grad);

/// One weight-adaptation step: smooth the observed parts, form provisional
/// weights proportional to the smoothed magnitudes (normalized to sum one),
/// move the weights toward them at rate 1-gamma, clamp to [0.001, 1.0]. All
/// magnitudes zero leaves the weights unchanged and counts the event.
LossWeights ema_update(EmaState& ema, const LossParts& parts,
                       LossWeights weights);

/// Objective callback for the quasi-Newton minimizer: value plus gradient.
using LossFn =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

enum class LbfgsStatus { Converged, MaxIters, LineSearchFailed };

std::string to_string(LbfgsStatus status);

struct LbfgsResult {
  Eigen::VectorXd params;
  std::vector<double> trace;  // loss after each accepted iteration
  LbfgsStatus status = LbfgsStatus::MaxIters;
  long iters = 0;
};

/// Observer for accepted quasi-Newton iterates (iteration number counts
/// from 1, value is the objective at the new point).
using IterateFn =
    std::function<void(long iter, const Eigen::VectorXd& x, double f)>;

/// Limited-memory BFGS with a strong-Wolfe line search (c1=1e-4, c2=0.9).
/// Stops at max_iters, gradient norm <= 1e-9, or line-search failure; the
/// last returns the best iterate with a status flag rather than throwing.
/// Curvature pairs are kept only when s.y > 1e-10.
LbfgsResult lbfgs_minimize(const LossFn& fn, Eigen::VectorXd params,
                           long max_iters, int m_hist = 10,
                           const IterateFn& on_iterate = {});

struct AdamRunResult {
  Eigen::VectorXd params;
  std::vector<TraceRow> trace;
  double final_total = 0.0;
  LossParts final_parts;
};

/// Plain full-batch ADAM training at fixed weights; logs every `log_every`
/// iterations plus a final row at `iter_offset + iters`.
AdamRunResult train_adam(const PdeProblem& problem, const Architecture& arch,
                         Eigen::VectorXd params, const SampleSet& set,
                         const LossWeights& weights, long iters, double lr,
                         const std::string& stage = "stage1",
                         long log_every = 100, long iter_offset = 0);

struct Stage2Result {
  Eigen::VectorXd params;
  LossWeights weights;
  std::vector<TraceRow> trace;
  double final_total = 0.0;
  LossParts final_parts;
};

/// ADAM training with weight adaptation: at iterations {0, ema_period,
/// 2*ema_period, ...} and at `iters` the current parts feed ema_update
/// before the next step.
Stage2Result train_stage2(const PdeProblem& problem, const Architecture& arch,
                          Eigen::VectorXd params, const SampleSet& set,
                          LossWeights weights, long iters = 5000,
                          double lr = 0.001, double beta = 0.999,
                          double gamma = 0.999, long ema_period = 1000,
                          long iter_offset = 0);

/// CSV columns `iter,stage,L_R,L_B,L_I,total,w_R,w_B,w_I`; absent initial
/// terms serialize as zero.
void write_trace_csv(const std::vector<TraceRow>& rows,
                     const std::string& path);

}  // namespace autopinn
