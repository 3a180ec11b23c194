#include "autopinn/model.hpp"

#include <string>

#include "autopinn/batcheval.hpp"
#include "autopinn/errors.hpp"

namespace autopinn {

using Eigen::MatrixXd;

NetworkModel::NetworkModel(Architecture arch, Eigen::VectorXd params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  if (params_.size() != arch_.param_count())
    throw ValidationError("parameter vector has " +
                          std::to_string(params_.size()) +
                          " entries, expected " +
                          std::to_string(arch_.param_count()));
}

MatrixXd NetworkModel::values(const MatrixXd& X) const {
  MatrixXd out(arch_.output_dim, X.cols());
  BatchEvaluator eval(arch_);
  for (Eigen::Index c0 = 0; c0 < X.cols(); c0 += kEvalChunk) {
    const auto n = std::min<Eigen::Index>(kEvalChunk, X.cols() - c0);
    eval.forward_values(params_, X.middleCols(c0, n), false);
    eval.check_finite();
    out.middleCols(c0, n) = eval.value();
  }
  return out;
}

void NetworkModel::jets(const MatrixXd& X, MatrixXd& value,
                        std::vector<MatrixXd>& d1,
                        std::vector<MatrixXd>& d2) const {
  const int d = arch_.input_dim;
  std::vector<int> dirs(d);
  for (int k = 0; k < d; ++k) dirs[k] = k;
  value.resize(arch_.output_dim, X.cols());
  d1.assign(d, MatrixXd(arch_.output_dim, X.cols()));
  d2.assign(d, MatrixXd(arch_.output_dim, X.cols()));
  BatchEvaluator eval(arch_);
  for (Eigen::Index c0 = 0; c0 < X.cols(); c0 += kEvalChunk) {
    const auto n = std::min<Eigen::Index>(kEvalChunk, X.cols() - c0);
    eval.forward_jets(params_, X.middleCols(c0, n), dirs, false);
    eval.check_finite();
    value.middleCols(c0, n) = eval.value();
    for (int k = 0; k < d; ++k) {
      d1[k].middleCols(c0, n) = eval.d1(k);
      d2[k].middleCols(c0, n) = eval.d2(k);
    }
  }
}

AnalyticModel::AnalyticModel(int input_dim, int output_dim, JetFn fn)
    : in_(input_dim), out_(output_dim), fn_(std::move(fn)) {}

MatrixXd AnalyticModel::values(const MatrixXd& X) const {
  MatrixXd value;
  std::vector<MatrixXd> d1, d2;
  fn_(X, value, d1, d2);
  return value;
}

void AnalyticModel::jets(const MatrixXd& X, MatrixXd& value,
                         std::vector<MatrixXd>& d1,
                         std::vector<MatrixXd>& d2) const {
  fn_(X, value, d1, d2);
}

}  // namespace autopinn
