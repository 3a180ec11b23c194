#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "autopinn/bayesopt.hpp"
#include "autopinn/checkpoint.hpp"
#include "autopinn/errors.hpp"
#include "autopinn/rng.hpp"

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

}  // namespace

double SearchSpace::snap(int d, double v) const {
  const SpaceDim& s = dims[static_cast<size_t>(d)];
  const double g = s.lo + s.step * std::round((v - s.lo) / s.step);
  return std::min(std::max(g, s.lo), s.hi);
}

Eigen::VectorXd SearchSpace::snap(Eigen::VectorXd v) const {
  if (v.size() != size())
    throw ValidationError("point dimension does not match search space");
  for (int d = 0; d < size(); ++d) v[d] = snap(d, v[d]);
  return v;
}

bool SearchSpace::on_grid(const Eigen::VectorXd& v, double tol) const {
  if (v.size() != size()) return false;
  for (int d = 0; d < size(); ++d) {
    const double g = snap(d, v[d]);
    if (std::abs(v[d] - g) > tol * std::max(1.0, std::abs(v[d]))) return false;
  }
  return true;
}

void SearchSpace::validate() const {
  if (dims.empty()) throw ValidationError("search space has no dimensions");
  for (const SpaceDim& s : dims) {
    if (s.name.empty()) throw ValidationError("search dimension without a name");
    if (!(s.step > 0.0))
      throw ValidationError("search dimension '" + s.name + "' needs a positive step");
    if (!(s.hi >= s.lo))
      throw ValidationError("search dimension '" + s.name + "' has hi < lo");
  }
  for (size_t i = 0; i < dims.size(); ++i)
    for (size_t j = i + 1; j < dims.size(); ++j)
      if (dims[i].name == dims[j].name)
        throw ValidationError("duplicate search dimension '" + dims[i].name + "'");
}

int SearchSpace::find(const std::string& name) const {
  for (int d = 0; d < size(); ++d)
    if (dims[static_cast<size_t>(d)].name == name) return d;
  return -1;
}

SearchSpace default_search_space(bool has_initial, NetKind kind) {
  SearchSpace sp;
  const double depth_lo = (kind == NetKind::ResNet) ? 1.0 : 2.0;
  const double depth_hi = (kind == NetKind::ResNet) ? 4.0 : 8.0;
  sp.dims.push_back({"layers", depth_lo, depth_hi, 1.0});
  sp.dims.push_back({"neurons", 20.0, 80.0, 1.0});
  sp.dims.push_back({"lr", 0.001, 0.01, 0.001});
  sp.dims.push_back({"n_domain", 500.0, 5000.0, 50.0});
  sp.dims.push_back({"n_boundary", 100.0, 3000.0, 50.0});
  if (has_initial) sp.dims.push_back({"n_initial", 100.0, 1200.0, 50.0});
  sp.dims.push_back({"w_R", 0.01, 0.10, 0.0001});
  sp.dims.push_back({"w_B", 0.01, 0.25, 0.0001});
  if (has_initial) sp.dims.push_back({"w_I", 0.01, 0.10, 0.0001});
  return sp;
}

HyperParams decode_point(const SearchSpace& space, const Eigen::VectorXd& v) {
  if (v.size() != space.size())
    throw ValidationError("point dimension does not match search space");
  HyperParams h;
  bool saw_layers = false, saw_neurons = false, saw_lr = false;
  bool saw_nd = false, saw_nb = false, saw_wr = false, saw_wb = false;
  for (int d = 0; d < space.size(); ++d) {
    const std::string& name = space.dims[static_cast<size_t>(d)].name;
    const double x = v[d];
    if (name == "layers") { h.layers = static_cast<int>(std::llround(x)); saw_layers = true; }
    else if (name == "neurons") { h.width = static_cast<int>(std::llround(x)); saw_neurons = true; }
    else if (name == "lr") { h.lr = x; saw_lr = true; }
    else if (name == "n_domain") { h.n_domain = static_cast<int>(std::llround(x)); saw_nd = true; }
    else if (name == "n_boundary") { h.n_boundary = static_cast<int>(std::llround(x)); saw_nb = true; }
    else if (name == "n_initial") h.n_initial = static_cast<int>(std::llround(x));
    else if (name == "w_R") { h.w_R = x; saw_wr = true; }
    else if (name == "w_B") { h.w_B = x; saw_wb = true; }
    else if (name == "w_I") h.w_I = x;
    else throw ValidationError("'" + name + "' is not a hyperparameter dimension");
  }
  if (!(saw_layers && saw_neurons && saw_lr && saw_nd && saw_nb && saw_wr && saw_wb))
    throw ValidationError("search space is missing required hyperparameter dimensions");
  if (h.n_initial.has_value() != h.w_I.has_value())
    throw ValidationError("initial-condition dimensions must appear together");
  return h;
}

Eigen::VectorXd encode_point(const SearchSpace& space, const HyperParams& h) {
  Eigen::VectorXd v(space.size());
  for (int d = 0; d < space.size(); ++d) {
    const std::string& name = space.dims[static_cast<size_t>(d)].name;
    if (name == "layers") v[d] = h.layers;
    else if (name == "neurons") v[d] = h.width;
    else if (name == "lr") v[d] = h.lr;
    else if (name == "n_domain") v[d] = h.n_domain;
    else if (name == "n_boundary") v[d] = h.n_boundary;
    else if (name == "n_initial") {
      if (!h.n_initial) throw ValidationError("hyperparameters lack n_initial required by the space");
      v[d] = *h.n_initial;
    } else if (name == "w_R") v[d] = h.w_R;
    else if (name == "w_B") v[d] = h.w_B;
    else if (name == "w_I") {
      if (!h.w_I) throw ValidationError("hyperparameters lack w_I required by the space");
      v[d] = *h.w_I;
    } else throw ValidationError("'" + name + "' is not a hyperparameter dimension");
  }
  return v;
}

LossWeights loss_weights(const HyperParams& h) {
  LossWeights w;
  w.w_R = h.w_R;
  w.w_B = h.w_B;
  w.w_I = h.w_I;
  return w;
}

Eigen::VectorXd propose_next(const GprModel& model, const SearchSpace& space,
                             double f_best, std::uint64_t seed) {
  space.validate();
  if (model.dim() != space.size())
    throw ValidationError("surrogate dimension does not match search space");
  const int D = space.size();
  constexpr int kCandidates = 10000;
  constexpr int kElite = 50;

  const Eigen::MatrixXd U = lhs(kCandidates, D, seed);
  std::vector<Eigen::VectorXd> cand;
  cand.reserve(kCandidates + 2 * kElite * D);
  Eigen::VectorXd v(D);
  for (int j = 0; j < kCandidates; ++j) {
    for (int d = 0; d < D; ++d) {
      const SpaceDim& s = space.dims[static_cast<size_t>(d)];
      v[d] = s.lo + U(d, j) * (s.hi - s.lo);
    }
    cand.push_back(space.snap(v));
  }
  std::vector<double> ei(cand.size());
  for (size_t i = 0; i < cand.size(); ++i) {
    const auto [mu, sigma] = gpr_predict(model, cand[i]);
    ei[i] = expected_improvement(mu, sigma, f_best);
  }

  std::vector<int> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  const size_t elite = std::min<size_t>(kElite, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(elite),
                    order.end(), [&](int a, int b) {
                      if (ei[static_cast<size_t>(a)] != ei[static_cast<size_t>(b)])
                        return ei[static_cast<size_t>(a)] > ei[static_cast<size_t>(b)];
                      return a < b;
                    });
  for (size_t k = 0; k < elite; ++k) {
    const Eigen::VectorXd base = cand[static_cast<size_t>(order[k])];
    for (int d = 0; d < D; ++d)
      for (const double dir : {-1.0, 1.0}) {
        Eigen::VectorXd p = base;
        p[d] = space.snap(d, base[d] + dir * space.dims[static_cast<size_t>(d)].step);
        const auto [mu, sigma] = gpr_predict(model, p);
        ei.push_back(expected_improvement(mu, sigma, f_best));
        cand.push_back(std::move(p));
      }
  }

  size_t best = 0;
  for (size_t i = 1; i < cand.size(); ++i)
    if (ei[i] > ei[best]) best = i;
  return cand[best];
}

TrialRecord evaluate_trial(const PdeProblem& problem, NetKind kind,
                           ActivationKind activation, const HyperParams& h,
                           std::uint64_t seed, long pretrain_iters) {
  if (h.layers < 1 || h.width < 1)
    throw ValidationError("trial needs at least one hidden layer and one neuron");
  if (!(h.lr > 0.0) || !std::isfinite(h.lr))
    throw ValidationError("trial learning rate must be positive and finite");
  if (h.n_domain < 1 || h.n_boundary < 1)
    throw ValidationError("trial needs domain and boundary points");
  if (h.n_initial.has_value() != problem.has_initial() ||
      h.w_I.has_value() != problem.has_initial())
    throw ValidationError("initial-condition settings must match the problem's time axis");
  if (h.n_initial && *h.n_initial < 1)
    throw ValidationError("trial needs initial points for a time-dependent problem");
  if (pretrain_iters < 0) throw ValidationError("pretrain iterations must be nonnegative");

  TrialRecord rec;
  rec.h = h;
  rec.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Architecture arch{kind, problem.input_dim(), problem.output_dim(),
                      h.layers, h.width, activation};
    Eigen::VectorXd params = init_params(arch, mix_seed(seed, 1));
    const SampleSet set =
        sample_problem(problem, h.n_domain, h.n_boundary, h.n_initial.value_or(0));
    if (pretrain_iters > 0) {
      AdamRunResult run = train_adam(problem, arch, std::move(params), set,
                                     loss_weights(h), pretrain_iters, h.lr);
      params = std::move(run.params);
    }
    const NetworkModel net(arch, params);
    const double err = l2_relative_error(problem, net);
    if (!std::isfinite(err)) throw RuntimeError("non-finite relative error");
    rec.objective = -err;
    rec.params = std::move(params);
  } catch (const RuntimeError&) {
    rec.failed = true;
    rec.objective = -10.0;
    rec.params.resize(0);
  }
  rec.wall_seconds = elapsed_seconds(t0);
  return rec;
}

void write_bo_log(const std::vector<TrialRecord>& log,
                  const SearchSpace& space, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError("cannot open search log for writing: " + path);
  out << "# hyperparameter search log v1\n";
  for (const TrialRecord& r : log) {
    if (r.point.size() != space.size())
      throw ValidationError("trial point dimension does not match search space");
    out << "trial " << r.index << "\n";
    out << "  status " << (r.failed ? "failed" : "ok") << "\n";
    out << "  seed " << r.seed << "\n";
    out << "  objective " << fmt17(r.objective) << "\n";
    out << "  wall_seconds " << fmt17(r.wall_seconds) << "\n";
    if (!r.checkpoint.empty()) out << "  checkpoint " << r.checkpoint << "\n";
    for (int d = 0; d < space.size(); ++d)
      out << "  " << space.dims[static_cast<size_t>(d)].name << " "
          << fmt17(r.point[d]) << "\n";
    out << "end\n";
  }
  if (!out) throw RuntimeError("failed writing search log: " + path);
}

std::vector<TrialRecord> read_bo_log(const std::string& path,
                                     const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open search log: " + path);
  std::vector<TrialRecord> log;
  std::string line;
  long line_no = 0;
  bool in_record = false;
  TrialRecord rec;
  std::vector<bool> have(static_cast<size_t>(space.size()), false);

  auto fail = [&](const std::string& what) {
    throw ValidationError(path + ": line " + std::to_string(line_no) + ": " + what);
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

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.empty() || key[0] == '#') continue;
    if (key == "trial") {
      if (in_record) fail("new trial before 'end'");
      in_record = true;
      rec = TrialRecord{};
      rec.from_log = true;
      rec.point = Eigen::VectorXd::Zero(space.size());
      std::fill(have.begin(), have.end(), false);
      std::string v;
      ls >> v;
      if (v.empty()) fail("trial line without an index");
      rec.index = static_cast<int>(parse_double(v));
      if (rec.index != static_cast<int>(log.size()))
        fail("trial index " + std::to_string(rec.index) + " out of order; expected " +
             std::to_string(log.size()));
      continue;
    }
    if (!in_record) fail("field outside a trial record");
    if (key == "end") {
      for (int d = 0; d < space.size(); ++d)
        if (!have[static_cast<size_t>(d)])
          fail("record missing dimension '" + space.dims[static_cast<size_t>(d)].name + "'");
      log.push_back(rec);
      in_record = false;
      continue;
    }
    std::string value;
    std::getline(ls, value);
    const size_t first = value.find_first_not_of(" \t");
    value = (first == std::string::npos) ? std::string() : value.substr(first);
    if (value.empty()) fail("field '" + key + "' without a value");
    if (key == "status") {
      if (value == "ok") rec.failed = false;
      else if (value == "failed") rec.failed = true;
      else fail("unknown status '" + value + "'");
    } else if (key == "seed") {
      try {
        rec.seed = std::stoull(value);
      } catch (const std::exception&) {
        fail("malformed seed '" + value + "'");
      }
    } else if (key == "objective") rec.objective = parse_double(value);
    else if (key == "wall_seconds") rec.wall_seconds = parse_double(value);
    else if (key == "checkpoint") rec.checkpoint = value;
    else {
      const int d = space.find(key);
      if (d < 0) fail("unknown field '" + key + "'");
      rec.point[d] = parse_double(value);
      have[static_cast<size_t>(d)] = true;
    }
  }
  if (in_record) fail("unterminated trial record");

  // Decode the hyperparameter view when the space uses the default roster.
  for (TrialRecord& r : log) {
    try {
      r.h = decode_point(space, r.point);
    } catch (const ValidationError&) {
      r.h = HyperParams{};
    }
  }
  return log;
}

BoResult bo_search(const SearchSpace& space, const TrialFn& fn,
                   const BoOptions& opt) {
  space.validate();
  if (opt.n_init < 1) throw ValidationError("search needs at least one initial trial");
  if (opt.n_iter < 0) throw ValidationError("search iteration count must be nonnegative");
  if (opt.jobs < 1) throw ValidationError("search needs at least one worker");
  const int D = space.size();
  const int total = opt.n_init + opt.n_iter;

  std::vector<TrialRecord> log;
  if (!opt.log_path.empty() && std::filesystem::exists(opt.log_path)) {
    log = read_bo_log(opt.log_path, space);
    if (static_cast<int>(log.size()) > total)
      throw ValidationError("existing search log holds " + std::to_string(log.size()) +
                            " trials, more than the budget of " + std::to_string(total));
  }
  const auto flush = [&]() {
    if (!opt.log_path.empty()) write_bo_log(log, space, opt.log_path);
  };

  const Eigen::MatrixXd U = lhs(opt.n_init, D, mix_seed(opt.seed, 1));
  const auto initial_point = [&](int i) {
    Eigen::VectorXd v(D);
    for (int d = 0; d < D; ++d) {
      const SpaceDim& s = space.dims[static_cast<size_t>(d)];
      v[d] = s.lo + U(d, i) * (s.hi - s.lo);
    }
    return space.snap(v);
  };
  const auto run_trial = [&](int i, const Eigen::VectorXd& point) {
    TrialRecord rec = fn(point, i, mix_seed(opt.seed, 100 + static_cast<std::uint64_t>(i)));
    rec.index = i;
    rec.point = point;
    return rec;
  };

  const int start = static_cast<int>(log.size());
  if (start < opt.n_init) {
    std::vector<Eigen::VectorXd> pts;
    for (int i = start; i < opt.n_init; ++i) pts.push_back(initial_point(i));
    if (opt.jobs > 1 && pts.size() > 1) {
      std::vector<TrialRecord> recs(pts.size());
      std::atomic<size_t> next{0};
      std::exception_ptr first_error;
      std::mutex error_mu;
      const size_t workers = std::min<size_t>(static_cast<size_t>(opt.jobs), pts.size());
      std::vector<std::thread> pool;
      for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (size_t j; (j = next.fetch_add(1)) < pts.size();) {
            try {
              recs[j] = run_trial(start + static_cast<int>(j), pts[j]);
            } catch (...) {
              std::lock_guard<std::mutex> lk(error_mu);
              if (!first_error) first_error = std::current_exception();
              return;
            }
          }
        });
      for (std::thread& t : pool) t.join();
      if (first_error) std::rethrow_exception(first_error);
      for (TrialRecord& r : recs) log.push_back(std::move(r));
      flush();
    } else {
      for (size_t j = 0; j < pts.size(); ++j) {
        log.push_back(run_trial(start + static_cast<int>(j), pts[j]));
        flush();
      }
    }
  }

  for (int i = std::max(start, opt.n_init); i < total; ++i) {
    Eigen::MatrixXd X(D, i);
    Eigen::VectorXd y(i);
    for (int j = 0; j < i; ++j) {
      X.col(j) = log[static_cast<size_t>(j)].point;
      y[j] = log[static_cast<size_t>(j)].objective;
    }
    const GprModel model = gpr_fit(X, y);
    const Eigen::VectorXd v = propose_next(
        model, space, y.maxCoeff(),
        mix_seed(opt.seed, 10000 + static_cast<std::uint64_t>(i - opt.n_init)));
    log.push_back(run_trial(i, v));
    flush();
  }

  int best = -1;
  for (int i = 0; i < total; ++i)
    if (!log[static_cast<size_t>(i)].failed &&
        (best < 0 || log[static_cast<size_t>(i)].objective > log[static_cast<size_t>(best)].objective))
      best = i;
  if (best < 0) throw RuntimeError("hyperparameter search failed: every trial diverged");

  BoResult out;
  out.log = log;
  out.best = log[static_cast<size_t>(best)];
  if (out.best.params.size() == 0 && out.best.from_log) {
    // Resumed from a log: rebuild the trained model deterministically.
    TrialRecord redo = run_trial(out.best.index, out.best.point);
    redo.from_log = false;
    out.best = std::move(redo);
  }
  return out;
}

BoResult bo_search(const PdeProblem& problem, NetKind kind,
                   ActivationKind activation, const SearchSpace& space,
                   const BoOptions& opt, long pretrain_iters,
                   const std::string& ckpt_dir) {
  if (!ckpt_dir.empty()) std::filesystem::create_directories(ckpt_dir);
  const TrialFn fn = [&](const Eigen::VectorXd& point, int index,
                         std::uint64_t trial_seed) {
    const HyperParams h = decode_point(space, point);
    std::string path;
    if (!ckpt_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "trial_%03d.ckpt", index);
      path = ckpt_dir + "/" + name;
    }
    if (!path.empty() && std::filesystem::exists(path)) {
      // Crash-recovery replay: reuse the stored weights instead of retraining.
      const Checkpoint ck = load_checkpoint(path);
      TrialRecord rec;
      rec.h = h;
      rec.seed = trial_seed;
      rec.checkpoint = path;
      rec.params = ck.params;
      rec.objective = -l2_relative_error(problem, NetworkModel(ck.arch, ck.params));
      return rec;
    }
    TrialRecord rec = evaluate_trial(problem, kind, activation, h, trial_seed,
                                     pretrain_iters);
    if (!path.empty() && !rec.failed) {
      const Architecture arch{kind, problem.input_dim(), problem.output_dim(),
                              h.layers, h.width, activation};
      save_checkpoint(arch, rec.params, path);
      rec.checkpoint = path;
    }
    return rec;
  };
  return bo_search(space, fn, opt);
}

}  // namespace autopinn
