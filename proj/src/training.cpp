#include "autopinn/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "autopinn/batcheval.hpp"
#include "autopinn/errors.hpp"

namespace autopinn {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_loss_inputs(const PdeProblem& problem, const SampleSet& set,
                       const LossWeights& weights) {
  if (set.n_domain() < 1) throw ValidationError("empty domain sample set");
  if (set.n_boundary() < 1) throw ValidationError("empty boundary sample set");
  if (set.domain_points.rows() != problem.input_dim() ||
      set.boundary_points.rows() != problem.input_dim())
    throw ValidationError("sample set dimension does not match problem");
  if (problem.has_initial()) {
    if (set.n_initial() < 1)
      throw ValidationError(problem.name() + " needs initial sample points");
    if (!weights.w_I)
      throw ValidationError(problem.name() + " needs an initial-loss weight");
  } else {
    if (set.n_initial() > 0)
      throw ValidationError(problem.name() + " takes no initial points");
    if (weights.w_I)
      throw ValidationError(problem.name() + " takes no initial-loss weight");
  }
  if (!(weights.w_R > 0.0) || !(weights.w_B > 0.0) ||
      (weights.w_I && !(*weights.w_I > 0.0)))
    throw ValidationError("loss weights must be positive");
}

/// Per-point Dirichlet targets for the whole boundary set, column j from the
/// face recorded for point j.
MatrixXd boundary_targets(const PdeProblem& problem, const SampleSet& set) {
  MatrixXd g(problem.output_dim(), set.n_boundary());
  for (int j = 0; j < set.n_boundary(); ++j)
    g.col(j) =
        problem.boundary_target(set.boundary_faces[j], set.boundary_points.col(j));
  return g;
}

double weighted_total(const LossWeights& w, const LossParts& p) {
  double total = w.w_R * p.residual + w.w_B * p.boundary;
  if (w.w_I) total += *w.w_I * p.initial;
  return total;
}

}  // namespace

std::pair<double, LossParts> assemble_loss(const PdeProblem& problem,
                                           const JetModel& model,
                                           const SampleSet& set,
                                           const LossWeights& weights) {
  check_loss_inputs(problem, set, weights);
  if (model.input_dim() != problem.input_dim() ||
      model.output_dim() != problem.output_dim())
    throw ValidationError("model dimensions do not match problem");

  LossParts parts;
  {
    MatrixXd u;
    std::vector<MatrixXd> d1, d2;
    model.jets(set.domain_points, u, d1, d2);
    const MatrixXd r = problem.residual(set.domain_points, u, d1, d2);
    parts.residual = r.squaredNorm() / set.n_domain();
  }
  {
    const MatrixXd u = model.values(set.boundary_points);
    parts.boundary =
        (u - boundary_targets(problem, set)).squaredNorm() / set.n_boundary();
  }
  if (set.n_initial() > 0) {
    const MatrixXd u = model.values(set.initial_points);
    parts.initial = (u - problem.initial_target(set.initial_points)).squaredNorm() /
                    set.n_initial();
  }
  return {weighted_total(weights, parts), parts};
}

std::pair<double, LossParts> assemble_loss_grad(
    const PdeProblem& problem, const Architecture& arch, const VectorXd& params,
    const SampleSet& set, const LossWeights& weights, VectorXd& grad) {
  check_loss_inputs(problem, set, weights);
  if (arch.input_dim != problem.input_dim() ||
      arch.output_dim != problem.output_dim())
    throw ValidationError("network dimensions do not match problem");

  BatchEvaluator ev(arch);
  grad = VectorXd::Zero(params.size());
  const int d = arch.input_dim;
  std::vector<int> dirs(d);
  for (int k = 0; k < d; ++k) dirs[k] = k;

  LossParts parts;
  // PDE residual term over domain points, chunked in a fixed order.
  for (int off = 0; off < set.n_domain(); off += kEvalChunk) {
    const int n = std::min<int>(kEvalChunk, set.n_domain() - off);
    const MatrixXd X = set.domain_points.middleCols(off, n);
    ev.forward_jets(params, X, dirs, /*for_grad=*/true);
    ev.check_finite();
    std::vector<MatrixXd> d1(d), d2(d);
    for (int k = 0; k < d; ++k) {
      d1[k] = ev.d1(k);
      d2[k] = ev.d2(k);
    }
    const MatrixXd r = problem.residual(X, ev.value(), d1, d2);
    parts.residual += r.squaredNorm() / set.n_domain();

    // d total / d r = 2 w_R r / N_d; pull back through the residual operator.
    const MatrixXd rbar = (2.0 * weights.w_R / set.n_domain()) * r;
    MatrixXd ubar = MatrixXd::Zero(r.rows(), n);
    std::vector<MatrixXd> d1bar(d, MatrixXd::Zero(r.rows(), n));
    std::vector<MatrixXd> d2bar(d, MatrixXd::Zero(r.rows(), n));
    problem.residual_adjoint(X, ev.value(), d1, d2, rbar, ubar, d1bar, d2bar);
    ev.backward(params, ubar, &d1bar, &d2bar, grad);
  }

  // Squared-mismatch terms need only the value channel. The chunk must
  // outlive backward(), which re-reads the forward input.
  const auto mismatch_term = [&](const MatrixXd& points, const MatrixXd& target,
                                 double weight, double* part) {
    const auto n_total = points.cols();
    for (Eigen::Index off = 0; off < n_total; off += kEvalChunk) {
      const auto n = std::min<Eigen::Index>(kEvalChunk, n_total - off);
      const MatrixXd X = points.middleCols(off, n);
      ev.forward_values(params, X, /*for_grad=*/true);
      ev.check_finite();
      const MatrixXd diff = ev.value() - target.middleCols(off, n);
      *part += diff.squaredNorm() / n_total;
      const MatrixXd vbar = (2.0 * weight / n_total) * diff;
      ev.backward(params, vbar, nullptr, nullptr, grad);
    }
  };
  mismatch_term(set.boundary_points, boundary_targets(problem, set),
                weights.w_B, &parts.boundary);
  if (set.n_initial() > 0)
    mismatch_term(set.initial_points, problem.initial_target(set.initial_points),
                  *weights.w_I, &parts.initial);

  return {weighted_total(weights, parts), parts};
}

AdamState::AdamState(Eigen::Index n, double lr_) : lr(lr_) {
  if (n < 1) throw ValidationError("optimizer state needs at least one parameter");
  // lr = 0 is legal (a no-op optimizer); negative rates are not.
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be nonnegative");
  m = VectorXd::Zero(n);
  v = VectorXd::Zero(n);
}

VectorXd adam_step(AdamState& state, VectorXd params, const VectorXd& grad) {
  if (params.size() != state.m.size() || grad.size() != state.m.size())
    throw ValidationError("parameter/gradient size does not match state");
  if (!grad.allFinite())
    throw RuntimeError("non-finite gradient at optimizer step " +
                       std::to_string(state.t + 1));
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v =
      (state.beta2 * state.v.array() + (1.0 - state.beta2) * grad.array().square())
          .matrix();
  const double mc = 1.0 - std::pow(state.beta1, double(state.t));
  const double vc = 1.0 - std::pow(state.beta2, double(state.t));
  params.array() -= state.lr * (state.m.array() / mc) /
                    ((state.v.array() / vc).sqrt() + state.eps);
  return params;
}

LossWeights ema_update(EmaState& ema, const LossParts& parts,
                       LossWeights weights) {
  if (parts.residual < 0 || parts.boundary < 0 || parts.initial < 0)
    throw ValidationError("loss parts must be nonnegative");
  const bool with_initial = weights.w_I.has_value();
  if (!ema.initialized) {
    ema.m_R = parts.residual;
    ema.m_B = parts.boundary;
    ema.m_I = with_initial ? parts.initial : 0.0;
    ema.initialized = true;
  } else {
    ema.m_R = ema.beta * ema.m_R + (1.0 - ema.beta) * parts.residual;
    ema.m_B = ema.beta * ema.m_B + (1.0 - ema.beta) * parts.boundary;
    if (with_initial)
      ema.m_I = ema.beta * ema.m_I + (1.0 - ema.beta) * parts.initial;
  }
  const double sum = ema.m_R + ema.m_B + (with_initial ? ema.m_I : 0.0);
  if (sum == 0.0) {
    // All smoothed magnitudes vanished; there is nothing to rebalance.
    ++ema.degenerate_count;
    return weights;
  }
  const auto blend = [&](double w, double m) {
    const double provisional = m / sum;
    return std::clamp(ema.gamma * w + (1.0 - ema.gamma) * provisional, 0.001, 1.0);
  };
  weights.w_R = blend(weights.w_R, ema.m_R);
  weights.w_B = blend(weights.w_B, ema.m_B);
  if (with_initial) weights.w_I = blend(*weights.w_I, ema.m_I);
  return weights;
}

AdamRunResult train_adam(const PdeProblem& problem, const Architecture& arch,
                         VectorXd params, const SampleSet& set,
                         const LossWeights& weights, long iters, double lr,
                         const std::string& stage, long log_every,
                         long iter_offset) {
  if (iters < 0) throw ValidationError("iteration count must be nonnegative");
  AdamRunResult res;
  AdamState adam(params.size(), lr);
  VectorXd grad;
  for (long it = 0; it < iters; ++it) {
    const auto [total, parts] =
        assemble_loss_grad(problem, arch, params, set, weights, grad);
    if (it % log_every == 0)
      res.trace.push_back({iter_offset + it, stage, parts, total, weights});
    params = adam_step(adam, params, grad);
  }
  std::tie(res.final_total, res.final_parts) = assemble_loss(
      problem, NetworkModel(arch, params), set, weights);
  res.trace.push_back(
      {iter_offset + iters, stage, res.final_parts, res.final_total, weights});
  res.params = std::move(params);
  return res;
}

Stage2Result train_stage2(const PdeProblem& problem, const Architecture& arch,
                          VectorXd params, const SampleSet& set,
                          LossWeights weights, long iters, double lr,
                          double beta, double gamma, long ema_period,
                          long iter_offset) {
  if (iters < 0) throw ValidationError("iteration count must be nonnegative");
  if (ema_period < 1)
    throw ValidationError("weight-adaptation period must be positive");
  Stage2Result res;
  AdamState adam(params.size(), lr);
  EmaState ema;
  ema.beta = beta;
  ema.gamma = gamma;
  VectorXd grad;
  LossParts parts;
  double total = 0.0;
  for (long it = 0;; ++it) {
    const bool checkpoint = (it % ema_period == 0) || it == iters;
    if (checkpoint) {
      // Parts are weight-independent, so evaluate once, adapt, then reweigh.
      std::tie(total, parts) =
          assemble_loss(problem, NetworkModel(arch, params), set, weights);
      weights = ema_update(ema, parts, weights);
      total = weights.w_R * parts.residual + weights.w_B * parts.boundary +
              (weights.w_I ? *weights.w_I * parts.initial : 0.0);
      res.trace.push_back({iter_offset + it, "stage2", parts, total, weights});
    }
    if (it == iters) break;
    std::tie(total, parts) =
        assemble_loss_grad(problem, arch, params, set, weights, grad);
    if (!checkpoint && it % 100 == 0)
      res.trace.push_back({iter_offset + it, "stage2", parts, total, weights});
    params = adam_step(adam, params, grad);
  }
  res.final_total = total;
  res.final_parts = parts;
  res.params = std::move(params);
  res.weights = weights;
  return res;
}

void write_trace_csv(const std::vector<TraceRow>& rows,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write " + path);
  out << "iter,stage,L_R,L_B,L_I,total,w_R,w_B,w_I\n";
  char buf[32];
  const auto emit = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << sep;
  };
  for (const TraceRow& r : rows) {
    out << r.iter << ',' << r.stage << ',';
    emit(r.parts.residual, ',');
    emit(r.parts.boundary, ',');
    emit(r.parts.initial, ',');
    emit(r.total, ',');
    emit(r.weights.w_R, ',');
    emit(r.weights.w_B, ',');
    emit(r.weights.w_I.value_or(0.0), '\n');
  }
  if (!out) throw RuntimeError("write failed for " + path);
}

std::string to_string(LbfgsStatus status) {
  switch (status) {
    case LbfgsStatus::Converged: return "converged";
    case LbfgsStatus::MaxIters: return "max-iterations";
    case LbfgsStatus::LineSearchFailed: return "line-search-failed";
  }
  throw RuntimeError("unreachable optimizer status");
}

}  // namespace autopinn
