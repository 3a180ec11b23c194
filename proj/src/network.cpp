#include "autopinn/network.hpp"

#include <cmath>
#include <sstream>

#include "autopinn/batcheval.hpp"
#include "autopinn/errors.hpp"
#include "autopinn/rng.hpp"

namespace autopinn {

std::string to_string(NetKind kind) {
  return kind == NetKind::FCNN ? "fcnn" : "resnet";
}

NetKind net_kind_from_string(const std::string& name) {
  if (name == "fcnn") return NetKind::FCNN;
  if (name == "resnet") return NetKind::ResNet;
  throw ValidationError("unknown network kind '" + name +
                        "' (expected fcnn|resnet)");
}

std::vector<LayerSpec> Architecture::layers() const {
  if (input_dim <= 0 || output_dim <= 0 || depth < 0 ||
      (depth > 0 && width <= 0)) {
    throw ValidationError("invalid architecture: dims must be positive (in=" +
                          std::to_string(input_dim) + ", out=" +
                          std::to_string(output_dim) + ", depth=" +
                          std::to_string(depth) + ", width=" +
                          std::to_string(width) + ")");
  }
  std::vector<LayerSpec> plan;
  if (kind == NetKind::FCNN) {
    int prev = input_dim;
    for (int l = 0; l < depth; ++l) {
      plan.push_back({prev, width, true, -1});
      prev = width;
    }
    plan.push_back({prev, output_dim, false, -1});
  } else {
    // Plain affine entry/exit projections; each block is two activated
    // layers of equal width with an identity skip around them.
    plan.push_back({input_dim, width, false, -1});
    for (int b = 0; b < depth; ++b) {
      const int first = static_cast<int>(plan.size());
      plan.push_back({width, width, true, -1});
      plan.push_back({width, width, true, first});
    }
    plan.push_back({width, output_dim, false, -1});
  }
  return plan;
}

long Architecture::param_count() const {
  long n = 0;
  for (const auto& l : layers()) n += static_cast<long>(l.in) * l.out + l.out;
  return n;
}

std::string Architecture::layout_string() const {
  std::ostringstream os;
  const auto plan = layers();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) os << ";";
    os << "L" << i << ":W(" << plan[i].out << "x" << plan[i].in
       << ",col-major)+b(" << plan[i].out << ")";
  }
  return os.str();
}

Eigen::VectorXd init_params(const Architecture& arch, std::uint64_t seed) {
  const auto plan = arch.layers();
  Eigen::VectorXd params(arch.param_count());
  Rng rng(seed);
  long off = 0;
  for (const auto& l : plan) {
    const double bound = std::sqrt(6.0 / (l.in + l.out));
    for (long i = 0; i < static_cast<long>(l.in) * l.out; ++i)
      params[off + i] = rng.uniform(-bound, bound);
    off += static_cast<long>(l.in) * l.out;
    params.segment(off, l.out).setZero();
    off += l.out;
  }
  return params;
}

Eigen::VectorXd forward(const Architecture& arch, const Eigen::VectorXd& params,
                        const Eigen::VectorXd& x) {
  BatchEvaluator eval(arch);
  Eigen::MatrixXd X = x;
  eval.forward_values(params, X, /*for_grad=*/false);
  eval.check_finite();
  return eval.value().col(0);
}

std::vector<Jet2> forward_jet(const Architecture& arch,
                              const Eigen::VectorXd& params,
                              const Eigen::VectorXd& x, int direction) {
  if (direction < 0 || direction >= arch.input_dim)
    throw ValidationError("jet direction " + std::to_string(direction) +
                          " out of range for input_dim " +
                          std::to_string(arch.input_dim));
  BatchEvaluator eval(arch);
  Eigen::MatrixXd X = x;
  eval.forward_jets(params, X, {direction}, /*for_grad=*/false);
  eval.check_finite();
  std::vector<Jet2> jets(arch.output_dim);
  for (int m = 0; m < arch.output_dim; ++m)
    jets[m] = {eval.value()(m, 0), eval.d1(0)(m, 0), eval.d2(0)(m, 0)};
  return jets;
}

}  // namespace autopinn
