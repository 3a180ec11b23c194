#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "autopinn/network.hpp"

namespace autopinn {

/// Read-only view of a trained (or mock) model: values and second-order jets
/// along every input coordinate. Implementations must be pure and safe to
/// call concurrently.
class JetModel {
 public:
  virtual ~JetModel() = default;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;

  /// Values at the columns of X; output_dim x N.
  virtual Eigen::MatrixXd values(const Eigen::MatrixXd& X) const = 0;

  /// Values plus first/second derivatives along every input coordinate.
  virtual void jets(const Eigen::MatrixXd& X, Eigen::MatrixXd& value,
                    std::vector<Eigen::MatrixXd>& d1,
                    std::vector<Eigen::MatrixXd>& d2) const = 0;
};

/// Network-backed model; holds a parameter snapshot.
class NetworkModel : public JetModel {
 public:
  NetworkModel(Architecture arch, Eigen::VectorXd params);

  int input_dim() const override { return arch_.input_dim; }
  int output_dim() const override { return arch_.output_dim; }
  Eigen::MatrixXd values(const Eigen::MatrixXd& X) const override;
  void jets(const Eigen::MatrixXd& X, Eigen::MatrixXd& value,
            std::vector<Eigen::MatrixXd>& d1,
            std::vector<Eigen::MatrixXd>& d2) const override;

  const Architecture& arch() const { return arch_; }
  const Eigen::VectorXd& params() const { return params_; }

 private:
  Architecture arch_;
  Eigen::VectorXd params_;
};

/// Closed-form model for tests and truth injection. The callback fills value
/// and per-coordinate derivative channels for a batch.
class AnalyticModel : public JetModel {
 public:
  using JetFn = std::function<void(const Eigen::MatrixXd& X,
                                   Eigen::MatrixXd& value,
                                   std::vector<Eigen::MatrixXd>& d1,
                                   std::vector<Eigen::MatrixXd>& d2)>;

  AnalyticModel(int input_dim, int output_dim, JetFn fn);

  int input_dim() const override { return in_; }
  int output_dim() const override { return out_; }
  Eigen::MatrixXd values(const Eigen::MatrixXd& X) const override;
  void jets(const Eigen::MatrixXd& X, Eigen::MatrixXd& value,
            std::vector<Eigen::MatrixXd>& d1,
            std::vector<Eigen::MatrixXd>& d2) const override;

 private:
  int in_, out_;
  JetFn fn_;
};

/// Column-chunk size used for every batched network evaluation; fixed so
/// accumulation order (and thus floating-point results) never depends on
/// batch size.
inline constexpr int kEvalChunk = 2048;

}  // namespace autopinn
