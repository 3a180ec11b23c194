#include "autopinn/batcheval.hpp"

#include <string>

#include "autopinn/errors.hpp"

namespace autopinn {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using ConstMap = Eigen::Map<const MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using Map = Eigen::Map<MatrixXd>;
using VecMap = Eigen::Map<VectorXd>;

}  // namespace

BatchEvaluator::BatchEvaluator(const Architecture& arch)
    : arch_(arch), plan_(arch.layers()) {
  long off = 0;
  for (const auto& l : plan_) {
    w_offset_.push_back(off);
    off += static_cast<long>(l.in) * l.out;
    b_offset_.push_back(off);
    off += l.out;
  }
}

void BatchEvaluator::forward_values(const VectorXd& params, const MatrixXd& X,
                                    bool for_grad) {
  run(params, X, {}, for_grad);
}

void BatchEvaluator::forward_jets(const VectorXd& params, const MatrixXd& X,
                                  const std::vector<int>& dirs, bool for_grad) {
  for (int d : dirs) {
    if (d < 0 || d >= arch_.input_dim)
      throw ValidationError("jet direction " + std::to_string(d) +
                            " out of range for input_dim " +
                            std::to_string(arch_.input_dim));
  }
  run(params, X, dirs, for_grad);
}

void BatchEvaluator::run(const VectorXd& params, const MatrixXd& X,
                         const std::vector<int>& dirs, bool for_grad) {
  if (params.size() != arch_.param_count())
    throw ValidationError("parameter vector has " +
                          std::to_string(params.size()) + " entries, expected " +
                          std::to_string(arch_.param_count()));
  if (X.rows() != arch_.input_dim)
    throw ValidationError("input batch has " + std::to_string(X.rows()) +
                          " rows, expected " + std::to_string(arch_.input_dim));

  dirs_ = dirs;
  for_grad_ = for_grad;
  input_ = &X;
  const int K = static_cast<int>(dirs.size());
  const auto N = X.cols();
  const int L = static_cast<int>(plan_.size());
  layer_state_.resize(L);
  cache_.resize(L);

  // Derivative order needed at each activation: jets use f'' in the forward
  // rule; reverse accumulation needs one order more than the forward pass.
  const int order = K > 0 ? (for_grad ? 3 : 2) : (for_grad ? 1 : 0);

  MatrixXd Z;
  for (int l = 0; l < L; ++l) {
    const auto& spec = plan_[l];
    ConstMap W(params.data() + w_offset_[l], spec.out, spec.in);
    ConstVecMap b(params.data() + b_offset_[l], spec.out);
    State& s = layer_state_[l];
    Cache& c = cache_[l];
    s.d1.resize(K);
    s.d2.resize(K);
    c.z1.resize(K);
    c.z2.resize(K);

    if (l == 0) {
      Z.noalias() = W * X;
      Z.colwise() += b;
      for (int k = 0; k < K; ++k) {
        // Input jet seeds: d1 is the unit vector along dirs[k], d2 is zero,
        // so the pre-activation channels are a constant column and zero.
        c.z1[k] = W.col(dirs[k]).replicate(1, N);
        c.z2[k].resize(0, 0);  // structurally zero
      }
    } else {
      const State& p = layer_state_[l - 1];
      Z.noalias() = W * p.v;
      Z.colwise() += b;
      for (int k = 0; k < K; ++k) {
        c.z1[k].noalias() = W * p.d1[k];
        c.z2[k].noalias() = W * p.d2[k];
      }
    }

    if (spec.activated) {
      activation_eval_batch(arch_.activation, Z, order, &s.v,
                            order >= 1 ? &c.f1 : nullptr,
                            order >= 2 ? &c.f2 : nullptr,
                            order >= 3 ? &c.f3 : nullptr);
      for (int k = 0; k < K; ++k) {
        s.d1[k] = (c.f1.array() * c.z1[k].array()).matrix();
        if (c.z2[k].size() == 0)
          s.d2[k] = (c.f2.array() * c.z1[k].array().square()).matrix();
        else
          s.d2[k] = (c.f2.array() * c.z1[k].array().square() +
                     c.f1.array() * c.z2[k].array())
                        .matrix();
      }
      if (!for_grad) {
        for (int k = 0; k < K; ++k) c.z1[k].resize(0, 0);
        for (int k = 0; k < K; ++k) c.z2[k].resize(0, 0);
      }
    } else {
      s.v = std::move(Z);
      Z.resize(0, 0);
      for (int k = 0; k < K; ++k) {
        s.d1[k] = std::move(c.z1[k]);
        if (c.z2[k].size() == 0)
          s.d2[k] = MatrixXd::Zero(spec.out, N);
        else
          s.d2[k] = std::move(c.z2[k]);
        c.z1[k].resize(0, 0);
        c.z2[k].resize(0, 0);
      }
    }

    if (spec.skip_from >= 0) {
      const State& entry = layer_state_[spec.skip_from - 1];
      s.v += entry.v;
      for (int k = 0; k < K; ++k) {
        s.d1[k] += entry.d1[k];
        s.d2[k] += entry.d2[k];
      }
    }
  }
}

void BatchEvaluator::backward(const VectorXd& params, const MatrixXd& vbar,
                              const std::vector<MatrixXd>* d1bar,
                              const std::vector<MatrixXd>* d2bar,
                              VectorXd& grad) {
  if (!for_grad_ || input_ == nullptr)
    throw ValidationError("backward requires a preceding for_grad forward pass");
  if (grad.size() != arch_.param_count())
    throw ValidationError("gradient vector has " + std::to_string(grad.size()) +
                          " entries, expected " +
                          std::to_string(arch_.param_count()));
  const int K = static_cast<int>(dirs_.size());
  const int L = static_cast<int>(plan_.size());
  const auto N = input_->cols();
  if (vbar.rows() != arch_.output_dim || vbar.cols() != N)
    throw ValidationError("output adjoint shape mismatch");

  std::vector<State> abar(L);
  for (int l = 0; l < L; ++l) {
    abar[l].v.setZero(plan_[l].out, N);
    abar[l].d1.assign(K, MatrixXd::Zero(plan_[l].out, N));
    abar[l].d2.assign(K, MatrixXd::Zero(plan_[l].out, N));
  }
  abar[L - 1].v = vbar;
  for (int k = 0; k < K; ++k) {
    if (d1bar) abar[L - 1].d1[k] = (*d1bar)[k];
    if (d2bar) abar[L - 1].d2[k] = (*d2bar)[k];
  }

  MatrixXd zbar_v, zbar_j;
  for (int l = L - 1; l >= 0; --l) {
    const auto& spec = plan_[l];
    ConstMap W(params.data() + w_offset_[l], spec.out, spec.in);
    Map gW(grad.data() + w_offset_[l], spec.out, spec.in);
    VecMap gb(grad.data() + b_offset_[l], spec.out);
    State& sb = abar[l];
    const Cache& c = cache_[l];

    if (spec.skip_from >= 0) {
      // Identity branch of the residual block: the adjoint of this layer's
      // output also flows unchanged to the block entry state.
      State& entry = abar[spec.skip_from - 1];
      entry.v += sb.v;
      for (int k = 0; k < K; ++k) {
        entry.d1[k] += sb.d1[k];
        entry.d2[k] += sb.d2[k];
      }
    }

    // Pre-activation adjoints. Differentiating the jet forward rules gives
    //   zbar   = f' vbar + sum_k [ f'' z1 d1bar + (f''' z1^2 + f'' z2) d2bar ]
    //   z1bar  = f' d1bar + 2 f'' z1 d2bar
    //   z2bar  = f' d2bar
    const bool act = spec.activated;
    if (act) {
      zbar_v = (c.f1.array() * sb.v.array()).matrix();
      for (int k = 0; k < K; ++k) {
        zbar_v.array() += c.f2.array() * c.z1[k].array() * sb.d1[k].array() +
                          c.f3.array() * c.z1[k].array().square() *
                              sb.d2[k].array();
        if (c.z2[k].size() != 0)
          zbar_v.array() += c.f2.array() * c.z2[k].array() * sb.d2[k].array();
      }
    } else {
      zbar_v = std::move(sb.v);
    }

    gb += zbar_v.rowwise().sum();
    if (l == 0) {
      gW.noalias() += zbar_v * input_->transpose();
    } else {
      gW.noalias() += zbar_v * layer_state_[l - 1].v.transpose();
      abar[l - 1].v.noalias() += W.transpose() * zbar_v;
    }

    for (int k = 0; k < K; ++k) {
      // First derivative channel.
      if (act) {
        zbar_j = (c.f1.array() * sb.d1[k].array() +
                  2.0 * c.f2.array() * c.z1[k].array() * sb.d2[k].array())
                     .matrix();
      } else {
        zbar_j = std::move(sb.d1[k]);
      }
      if (l == 0) {
        // The d1 input channel is the constant unit vector along dirs[k].
        gW.col(dirs_[k]) += zbar_j.rowwise().sum();
      } else {
        gW.noalias() += zbar_j * layer_state_[l - 1].d1[k].transpose();
        abar[l - 1].d1[k].noalias() += W.transpose() * zbar_j;
      }
      // Second derivative channel; the d2 input channel of layer 0 is zero.
      if (act) {
        zbar_j = (c.f1.array() * sb.d2[k].array()).matrix();
      } else {
        zbar_j = std::move(sb.d2[k]);
      }
      if (l > 0) {
        gW.noalias() += zbar_j * layer_state_[l - 1].d2[k].transpose();
        abar[l - 1].d2[k].noalias() += W.transpose() * zbar_j;
      }
    }
  }
}

void BatchEvaluator::check_finite() const {
  for (std::size_t l = 0; l < layer_state_.size(); ++l) {
    const State& s = layer_state_[l];
    bool ok = s.v.allFinite();
    for (const auto& m : s.d1) ok = ok && m.allFinite();
    for (const auto& m : s.d2) ok = ok && m.allFinite();
    if (!ok)
      throw RuntimeError("non-finite values after layer " + std::to_string(l) +
                         " of " + std::to_string(layer_state_.size()) +
                         " (network " + arch_.layout_string() + ")");
  }
}

std::pair<double, VectorXd> param_gradient(const Architecture& arch,
                                           const VectorXd& params,
                                           const MatrixXd& X,
                                           const std::vector<int>& dirs,
                                           const LossGraphFn& fn) {
  BatchEvaluator eval(arch);
  const int K = static_cast<int>(dirs.size());
  if (K > 0)
    eval.forward_jets(params, X, dirs, /*for_grad=*/true);
  else
    eval.forward_values(params, X, /*for_grad=*/true);

  const auto N = X.cols();
  MatrixXd vbar = MatrixXd::Zero(arch.output_dim, N);
  std::vector<MatrixXd> d1bar(K, MatrixXd::Zero(arch.output_dim, N));
  std::vector<MatrixXd> d2bar(K, MatrixXd::Zero(arch.output_dim, N));
  std::vector<MatrixXd> d1(K), d2(K);
  for (int k = 0; k < K; ++k) {
    d1[k] = eval.d1(k);
    d2[k] = eval.d2(k);
  }
  const double loss = fn(eval.value(), d1, d2, vbar, d1bar, d2bar);

  VectorXd grad = VectorXd::Zero(arch.param_count());
  eval.backward(params, vbar, K > 0 ? &d1bar : nullptr,
                K > 0 ? &d2bar : nullptr, grad);
  return {loss, grad};
}

}  // namespace autopinn
