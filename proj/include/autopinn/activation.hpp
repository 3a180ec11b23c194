#pragma once

#include <Eigen/Core>
#include <string>

namespace autopinn {

/// Hidden-layer activation family. TG is tanh(x)*exp(-x^2/2): a tanh carrier
/// inside a Gaussian window, odd and rapidly decaying.
enum class ActivationKind { TG, Tanh, Sin, Gauss };

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

/// Value and first three derivatives at one point.
struct ActivationDerivs {
  double f0, f1, f2, f3;
};

ActivationDerivs activation_eval(ActivationKind kind, double x);

inline double activation_value(ActivationKind kind, double x) {
  return activation_eval(kind, x).f0;
}

/// Batched evaluation. Fills (and resizes) f0..f`order` elementwise over z.
/// order in [0,3]; outputs above the requested order may be nullptr. The
/// third derivative is what reverse-mode needs when the loss contains second
/// input derivatives.
void activation_eval_batch(ActivationKind kind, const Eigen::MatrixXd& z,
                           int order, Eigen::MatrixXd* f0, Eigen::MatrixXd* f1,
                           Eigen::MatrixXd* f2, Eigen::MatrixXd* f3);

}  // namespace autopinn
