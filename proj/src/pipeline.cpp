#include "autopinn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "autopinn/checkpoint.hpp"
#include "autopinn/errors.hpp"
#include "autopinn/model.hpp"
#include "autopinn/rng.hpp"
#include "autopinn/sampling.hpp"

namespace autopinn {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

/// Same structural checks a search trial applies before training; fixed rows
/// bypass the search-space bounds but not these.
void check_hyperparams(const PdeProblem& problem, const HyperParams& h) {
  if (h.layers < 1 || h.width < 1)
    throw ValidationError("run needs at least one hidden layer and one neuron");
  if (!(h.lr > 0.0) || !std::isfinite(h.lr))
    throw ValidationError("run learning rate must be positive and finite");
  if (h.n_domain < 1 || h.n_boundary < 1)
    throw ValidationError("run needs domain and boundary points");
  if (h.n_initial.has_value() != problem.has_initial() ||
      h.w_I.has_value() != problem.has_initial())
    throw ValidationError(
        "initial-condition settings must match the problem's time axis");
  if (h.n_initial && *h.n_initial < 1)
    throw ValidationError(
        "run needs initial points for a time-dependent problem");
}

}  // namespace

void StagePlan::validate() const {
  if (pretrain_iters < 0 || stage2_iters < 0 || stage3_iters < 0 ||
      ema_period < 0 || rar_rounds < 0 || rar_candidates < 0 || rar_new < 0)
    throw ValidationError("stage plan fields must be nonnegative");
}

HyperParams preset(const std::string& problem_name) {
  HyperParams h;
  if (problem_name == "helmholtz2d") {
    h.layers = 2, h.width = 74, h.lr = 0.005;
    h.n_domain = 1350, h.n_boundary = 1650;
    h.w_R = 0.0144, h.w_B = 0.2406;
  } else if (problem_name == "burgers1d") {
    h.layers = 7, h.width = 35, h.lr = 0.006;
    h.n_domain = 4250, h.n_boundary = 1900, h.n_initial = 1100;
    h.w_R = 0.0410, h.w_B = 0.0593, h.w_I = 0.0815;
  } else if (problem_name == "poisson3d") {
    h.layers = 3, h.width = 74, h.lr = 0.007;
    h.n_domain = 13600, h.n_boundary = 1050;
    h.w_R = 0.0767, h.w_B = 0.1142;
  } else if (problem_name == "poisson4d") {
    h.layers = 6, h.width = 59, h.lr = 0.009;
    h.n_domain = 12150, h.n_boundary = 6500;
    h.w_R = 0.0328, h.w_B = 0.2335;
  } else if (problem_name == "poisson5d") {
    h.layers = 3, h.width = 58, h.lr = 0.009;
    h.n_domain = 9550, h.n_boundary = 2700;
    h.w_R = 0.0377, h.w_B = 0.1565;
  } else {
    throw ValidationError("unknown preset '" + problem_name + "'");
  }
  return h;
}

void export_prediction_grid(const PdeProblem& problem, const JetModel& model,
                            const std::string& path) {
  if (model.input_dim() != problem.input_dim() ||
      model.output_dim() != problem.output_dim())
    throw ValidationError("model shape does not match the problem");
  const bool with_truth = problem.has_truth();
  Eigen::MatrixXd X;
  if (with_truth) {
    X = problem.eval_points();
  } else if (problem.input_dim() == 2) {
    const int n = 201;
    const auto& box = problem.domain().box;
    X.resize(2, n * n);
    for (int i = 0; i < n; ++i) {
      const double x = box[0][0] + (box[0][1] - box[0][0]) * i / double(n - 1);
      for (int j = 0; j < n; ++j) {
        const double y =
            box[1][0] + (box[1][1] - box[1][0]) * j / double(n - 1);
        X(0, i * n + j) = x;
        X(1, i * n + j) = y;
      }
    }
  } else {
    throw ValidationError("no evaluation set for " + problem.name() +
                          " and no grid fallback above two dimensions");
  }
  const Eigen::MatrixXd pred = model.values(X);
  Eigen::MatrixXd truth;
  if (with_truth) truth = problem.eval_truth();

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError("cannot open grid export for writing: " + path);
  const int d = problem.input_dim();
  for (int i = 0; i < d; ++i) out << "x_" << (i + 1) << ",";
  out << "u_pred";
  if (with_truth) out << ",u_true,abs_error";
  out << "\n";
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (int i = 0; i < d; ++i) out << fmt17(X(i, c)) << ",";
    out << fmt17(pred(0, c));
    if (with_truth)
      out << "," << fmt17(truth(0, c)) << ","
          << fmt17(std::abs(pred(0, c) - truth(0, c)));
    out << "\n";
  }
  if (!out) throw RuntimeError("failed writing grid export: " + path);
}

void write_run_report(const RunReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError("cannot open report for writing: " + path);
  out << "# run report v1\n";
  out << "problem " << r.problem << "\n";
  out << "net " << to_string(r.kind) << "\n";
  out << "activation " << to_string(r.activation) << "\n";
  out << "seed " << r.seed << "\n";
  out << "stage1_seed " << r.stage_seeds[0] << "\n";
  out << "stage2_seed " << r.stage_seeds[1] << "\n";
  out << "stage3_seed " << r.stage_seeds[2] << "\n";
  out << "plan.pretrain_iters " << r.plan.pretrain_iters << "\n";
  out << "plan.stage2_iters " << r.plan.stage2_iters << "\n";
  out << "plan.stage3_iters " << r.plan.stage3_iters << "\n";
  out << "plan.ema_period " << r.plan.ema_period << "\n";
  out << "plan.rar_rounds " << r.plan.rar_rounds << "\n";
  out << "plan.rar_candidates " << r.plan.rar_candidates << "\n";
  out << "plan.rar_new " << r.plan.rar_new << "\n";
  out << "h.layers " << r.h.layers << "\n";
  out << "h.width " << r.h.width << "\n";
  out << "h.lr " << fmt17(r.h.lr) << "\n";
  out << "h.n_domain " << r.h.n_domain << "\n";
  out << "h.n_boundary " << r.h.n_boundary << "\n";
  if (r.h.n_initial) out << "h.n_initial " << *r.h.n_initial << "\n";
  out << "h.w_R " << fmt17(r.h.w_R) << "\n";
  out << "h.w_B " << fmt17(r.h.w_B) << "\n";
  if (r.h.w_I) out << "h.w_I " << fmt17(*r.h.w_I) << "\n";
  out << "samples.domain " << r.n_domain << "\n";
  out << "samples.boundary " << r.n_boundary << "\n";
  out << "samples.initial " << r.n_initial << "\n";
  out << "samples.rar_added " << r.n_rar_added << "\n";
  out << "param_count " << r.param_count << "\n";
  for (const StageOutcome& s : r.stages)
    out << "stage " << s.name << " l2 " << fmt17(s.l2) << "\n";
  out << "final_l2 " << fmt17(r.final_l2) << "\n";
  out << "final_per_channel";
  for (Eigen::Index i = 0; i < r.final_per_channel.size(); ++i)
    out << " " << fmt17(r.final_per_channel[i]);
  out << "\n";
  if (!r.failed_stage.empty()) out << "failed_stage " << r.failed_stage << "\n";
  out << "end\n";
  if (!out) throw RuntimeError("failed writing report: " + path);
}

RunReport read_run_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open report: " + path);
  RunReport r;
  std::string line;
  long line_no = 0;
  bool saw_end = false;

  auto fail = [&](const std::string& what) {
    throw ValidationError(path + ": line " + std::to_string(line_no) + ": " +
                          what);
  };
  auto parse_double = [&](const std::string& v) {
    try {
      size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      fail("malformed numeric value '" + v + "'");
      return 0.0;
    }
  };
  auto parse_long = [&](const std::string& v) {
    try {
      size_t used = 0;
      const long x = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      fail("malformed integer value '" + v + "'");
      return 0L;
    }
  };
  auto parse_seed = [&](const std::string& v) {
    try {
      size_t used = 0;
      const std::uint64_t x = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      fail("malformed seed '" + v + "'");
      return std::uint64_t{0};
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "# run report v1") fail("not a run report");
      continue;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.empty() || key[0] == '#') continue;
    if (saw_end) fail("content after 'end'");
    if (key == "end") {
      saw_end = true;
      continue;
    }
    if (key == "stage") {
      std::string name, tag, val;
      ls >> name >> tag >> val;
      if (name.empty() || tag != "l2" || val.empty())
        fail("malformed stage line");
      r.stages.push_back({name, parse_double(val), 0.0});
      continue;
    }
    if (key == "final_per_channel") {
      std::vector<double> vals;
      std::string tok;
      while (ls >> tok) vals.push_back(parse_double(tok));
      r.final_per_channel.resize(static_cast<Eigen::Index>(vals.size()));
      for (size_t i = 0; i < vals.size(); ++i)
        r.final_per_channel[static_cast<Eigen::Index>(i)] = vals[i];
      continue;
    }
    std::string value;
    std::getline(ls, value);
    const size_t first = value.find_first_not_of(" \t");
    value = (first == std::string::npos) ? std::string() : value.substr(first);
    if (value.empty()) fail("field '" + key + "' without a value");
    try {
      if (key == "problem") r.problem = value;
      else if (key == "net") r.kind = net_kind_from_string(value);
      else if (key == "activation") r.activation = activation_from_string(value);
      else if (key == "seed") r.seed = parse_seed(value);
      else if (key == "stage1_seed") r.stage_seeds[0] = parse_seed(value);
      else if (key == "stage2_seed") r.stage_seeds[1] = parse_seed(value);
      else if (key == "stage3_seed") r.stage_seeds[2] = parse_seed(value);
      else if (key == "plan.pretrain_iters") r.plan.pretrain_iters = parse_long(value);
      else if (key == "plan.stage2_iters") r.plan.stage2_iters = parse_long(value);
      else if (key == "plan.stage3_iters") r.plan.stage3_iters = parse_long(value);
      else if (key == "plan.ema_period") r.plan.ema_period = parse_long(value);
      else if (key == "plan.rar_rounds") r.plan.rar_rounds = static_cast<int>(parse_long(value));
      else if (key == "plan.rar_candidates") r.plan.rar_candidates = static_cast<int>(parse_long(value));
      else if (key == "plan.rar_new") r.plan.rar_new = static_cast<int>(parse_long(value));
      else if (key == "h.layers") r.h.layers = static_cast<int>(parse_long(value));
      else if (key == "h.width") r.h.width = static_cast<int>(parse_long(value));
      else if (key == "h.lr") r.h.lr = parse_double(value);
      else if (key == "h.n_domain") r.h.n_domain = static_cast<int>(parse_long(value));
      else if (key == "h.n_boundary") r.h.n_boundary = static_cast<int>(parse_long(value));
      else if (key == "h.n_initial") r.h.n_initial = static_cast<int>(parse_long(value));
      else if (key == "h.w_R") r.h.w_R = parse_double(value);
      else if (key == "h.w_B") r.h.w_B = parse_double(value);
      else if (key == "h.w_I") r.h.w_I = parse_double(value);
      else if (key == "samples.domain") r.n_domain = static_cast<int>(parse_long(value));
      else if (key == "samples.boundary") r.n_boundary = static_cast<int>(parse_long(value));
      else if (key == "samples.initial") r.n_initial = static_cast<int>(parse_long(value));
      else if (key == "samples.rar_added") r.n_rar_added = static_cast<int>(parse_long(value));
      else if (key == "param_count") r.param_count = parse_long(value);
      else if (key == "final_l2") r.final_l2 = parse_double(value);
      else if (key == "failed_stage") r.failed_stage = value;
      else fail("unknown field '" + key + "'");
    } catch (const ValidationError& e) {
      if (std::string(e.what()).rfind(path, 0) == 0) throw;
      fail(e.what());
    }
  }
  if (line_no == 0) {
    line_no = 1;
    fail("not a run report");
  }
  if (!saw_end) {
    ++line_no;
    fail("unterminated report");
  }
  return r;
}

RunReport run_full(const PdeProblem& problem, const SearchSpace& space,
                   const StagePlan& plan, std::uint64_t seed,
                   const PipelineOptions& opt) {
  plan.validate();
  if (plan.rar_rounds > 0 && plan.rar_new > plan.rar_candidates)
    throw ValidationError(
        "refinement cannot keep more points than it samples");

  RunReport rep;
  rep.problem = problem.name();
  rep.kind = opt.kind;
  rep.activation = opt.activation;
  rep.plan = plan;
  rep.seed = seed;
  rep.stage_seeds = {mix_seed(seed, 11), mix_seed(seed, 22),
                     mix_seed(seed, 33)};

  namespace fs = std::filesystem;
  const bool artifacts = !opt.out_dir.empty();
  const fs::path out_root(opt.out_dir);
  if (artifacts)
    for (const char* s : {"stage1", "stage2", "stage3"})
      fs::create_directories(out_root / "checkpoints" / s);

  Architecture arch;
  SampleSet set;
  Eigen::VectorXd params;
  LossWeights weights;

  auto record = [&](const char* name, double wall) {
    const NetworkModel net(arch, params);
    const double l2 = l2_relative_error(problem, net, &rep.final_per_channel);
    rep.final_l2 = l2;
    rep.stages.push_back({name, l2, wall});
  };
  auto finalize = [&]() {
    if (artifacts) {
      if (!rep.trace.empty())
        write_trace_csv(rep.trace, (out_root / "trace.csv").string());
      if (set.n_domain() > 0)
        write_samples_csv(set, (out_root / "samples.csv").string());
      if (rep.failed_stage.empty()) {
        const NetworkModel net(arch, params);
        export_prediction_grid(problem, net, (out_root / "grid.csv").string());
      }
      write_run_report(rep, (out_root / "report").string());
    }
    rep.params = std::move(params);
  };

  // Stage 1: choose the row (search or fixed), then pre-train it. The search
  // already pre-trains every trial; the winning row is re-trained from its
  // trial seed, which reproduces the winning weights exactly and yields a
  // uniform stage-1 trace for both paths.
  HyperParams h;
  std::uint64_t trial_seed = rep.stage_seeds[0];
  auto t0 = std::chrono::steady_clock::now();
  if (opt.fixed_h) {
    h = *opt.fixed_h;
    check_hyperparams(problem, h);
  } else {
    BoOptions bopt;
    bopt.n_init = opt.bo_init;
    bopt.n_iter = opt.bo_iter;
    bopt.seed = rep.stage_seeds[0];
    bopt.jobs = opt.jobs;
    if (artifacts) bopt.log_path = (out_root / "bo_log").string();
    const std::string ckpt_dir =
        artifacts ? (out_root / "checkpoints" / "stage1").string() : "";
    try {
      BoResult res = bo_search(problem, opt.kind, opt.activation, space, bopt,
                               plan.pretrain_iters, ckpt_dir);
      h = res.best.h;
      trial_seed = res.best.seed;
    } catch (const RuntimeError&) {
      rep.failed_stage = "stage1";
      finalize();
      return rep;
    }
  }
  rep.h = h;

  try {
    arch = Architecture{opt.kind,  problem.input_dim(), problem.output_dim(),
                        h.layers,  h.width,             opt.activation};
    rep.param_count = arch.param_count();
    params = init_params(arch, mix_seed(trial_seed, 1));
    set = sample_problem(problem, h.n_domain, h.n_boundary,
                         h.n_initial.value_or(0));
    rep.n_domain = set.n_domain();
    rep.n_boundary = set.n_boundary();
    rep.n_initial = set.n_initial();
    weights = loss_weights(h);
    AdamRunResult run = train_adam(problem, arch, std::move(params), set,
                                   weights, plan.pretrain_iters, h.lr);
    params = std::move(run.params);
    rep.trace.insert(rep.trace.end(), run.trace.begin(), run.trace.end());
    record("stage1", elapsed_seconds(t0));
    if (artifacts)
      save_checkpoint(
          arch, params,
          (out_root / "checkpoints" / "stage1" / "selected.ckpt").string());
  } catch (const RuntimeError&) {
    rep.failed_stage = "stage1";
    finalize();
    return rep;
  }

  // Stage 2: residual-driven refinement of the domain set, then first-order
  // training with weight adaptation.
  t0 = std::chrono::steady_clock::now();
  try {
    if (plan.rar_rounds > 0 && plan.rar_new > 0) {
      const NetworkModel pre(arch, params);
      set = rar_d(problem, pre, set, plan.rar_rounds, plan.rar_candidates,
                  plan.rar_new, rep.stage_seeds[1]);
    }
    rep.n_rar_added = set.added_by_refinement();
    Stage2Result s2 = train_stage2(problem, arch, std::move(params), set,
                                   weights, plan.stage2_iters, h.lr, 0.999,
                                   0.999, plan.ema_period, plan.pretrain_iters);
    params = std::move(s2.params);
    weights = s2.weights;
    rep.trace.insert(rep.trace.end(), s2.trace.begin(), s2.trace.end());
    record("stage2", elapsed_seconds(t0));
    if (artifacts)
      save_checkpoint(
          arch, params,
          (out_root / "checkpoints" / "stage2" / "model.ckpt").string());
  } catch (const RuntimeError&) {
    rep.failed_stage = "stage2";
    finalize();
    return rep;
  }

  // Stage 3: quasi-Newton refinement on frozen weights and samples. Probe
  // points where the loss overflows report +inf so the line search
  // backtracks instead of aborting the run.
  t0 = std::chrono::steady_clock::now();
  try {
    const LossWeights w3 = weights;
    const Eigen::Index n_params = params.size();
    const LossFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      try {
        return assemble_loss_grad(problem, arch, x, set, w3, g).first;
      } catch (const RuntimeError&) {
        g = Eigen::VectorXd::Zero(n_params);
        return std::numeric_limits<double>::infinity();
      }
    };
    const long offset = plan.pretrain_iters + plan.stage2_iters;
    auto log_row = [&](long iter, const Eigen::VectorXd& x) {
      const NetworkModel net(arch, x);
      const auto [total, parts] = assemble_loss(problem, net, set, w3);
      rep.trace.push_back({offset + iter, "stage3", parts, total, w3});
    };
    log_row(0, params);
    const IterateFn on_iterate = [&](long iter, const Eigen::VectorXd& x,
                                     double) {
      if (iter % 100 == 0) log_row(iter, x);
    };
    LbfgsResult res =
        lbfgs_minimize(fn, params, plan.stage3_iters, 10, on_iterate);
    params = std::move(res.params);
    if (res.iters > 0 && (res.iters % 100 != 0 ||
                          res.status == LbfgsStatus::LineSearchFailed))
      log_row(res.iters, params);
    record("stage3", elapsed_seconds(t0));
    if (artifacts)
      save_checkpoint(
          arch, params,
          (out_root / "checkpoints" / "stage3" / "model.ckpt").string());
  } catch (const RuntimeError&) {
    rep.failed_stage = "stage3";
    finalize();
    return rep;
  }

  finalize();
  return rep;
}

}  // namespace autopinn
