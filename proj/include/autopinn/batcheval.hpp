#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>
#include <vector>

#include "autopinn/network.hpp"

namespace autopinn {

/// Batched network evaluation over columns of X, optionally carrying
/// second-order Taylor jets along a set of seeded input coordinates, with
/// reverse accumulation over the whole (value + jet) computation for exact
/// parameter gradients.
///
/// The jet forward rule per activated layer, per seeded direction:
///   z  = W a + b,  z1 = W a1,  z2 = W a2
///   a' = f(z),     a1' = f'(z) z1,  a2' = f''(z) z1^2 + f'(z) z2
/// The reverse pass differentiates these rules with respect to parameters,
/// which is why f''' is required whenever second derivatives feed the loss.
class BatchEvaluator {
 public:
  explicit BatchEvaluator(const Architecture& arch);

  /// Value-only forward. X is input_dim x N.
  void forward_values(const Eigen::VectorXd& params, const Eigen::MatrixXd& X,
                      bool for_grad);

  /// Jet forward along input coordinates `dirs`.
  void forward_jets(const Eigen::VectorXd& params, const Eigen::MatrixXd& X,
                    const std::vector<int>& dirs, bool for_grad);

  const Eigen::MatrixXd& value() const { return layer_state_.back().v; }
  const Eigen::MatrixXd& d1(int k) const { return layer_state_.back().d1[k]; }
  const Eigen::MatrixXd& d2(int k) const { return layer_state_.back().d2[k]; }
  int n_dirs() const { return static_cast<int>(dirs_.size()); }

  /// Reverse accumulation over the last for_grad forward pass. Adds into
  /// `grad` (sized param_count). d1bar/d2bar must parallel the forward dirs;
  /// pass nullptr after forward_values.
  void backward(const Eigen::VectorXd& params, const Eigen::MatrixXd& vbar,
                const std::vector<Eigen::MatrixXd>* d1bar,
                const std::vector<Eigen::MatrixXd>* d2bar,
                Eigen::VectorXd& grad);

  /// Throws RuntimeError naming the first layer whose state is non-finite.
  void check_finite() const;

  const Architecture& arch() const { return arch_; }

 private:
  struct State {
    Eigen::MatrixXd v;
    std::vector<Eigen::MatrixXd> d1, d2;
  };
  struct Cache {
    std::vector<Eigen::MatrixXd> z1, z2;  // pre-activation jet channels
    Eigen::MatrixXd f1, f2, f3;           // activation derivatives at z
  };

  void run(const Eigen::VectorXd& params, const Eigen::MatrixXd& X,
           const std::vector<int>& dirs, bool for_grad);

  Architecture arch_;
  std::vector<LayerSpec> plan_;
  std::vector<long> w_offset_, b_offset_;
  std::vector<int> dirs_;
  bool for_grad_ = false;
  const Eigen::MatrixXd* input_ = nullptr;   // valid during backward only
  std::vector<State> layer_state_;           // post-activation, post-skip
  std::vector<Cache> cache_;
};

/// Loss-graph callback: reads the network outputs (value and jets over a
/// batch), returns the scalar loss, and fills the adjoints dL/d(outputs).
using LossGraphFn = std::function<double(
    const Eigen::MatrixXd& value, const std::vector<Eigen::MatrixXd>& d1,
    const std::vector<Eigen::MatrixXd>& d2, Eigen::MatrixXd& vbar,
    std::vector<Eigen::MatrixXd>& d1bar, std::vector<Eigen::MatrixXd>& d2bar)>;

/// Exact dL/dparams for a scalar loss composed of forward/jet outputs over a
/// batch. A graph with no parameter dependence yields a zero vector.
std::pair<double, Eigen::VectorXd> param_gradient(
    const Architecture& arch, const Eigen::VectorXd& params,
    const Eigen::MatrixXd& X, const std::vector<int>& dirs,
    const LossGraphFn& fn);

}  // namespace autopinn
