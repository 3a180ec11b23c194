#include "autopinn/activation.hpp"

#include <cmath>

#include "autopinn/errors.hpp"

namespace autopinn {

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::TG: return "tg";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Sin: return "sin";
    case ActivationKind::Gauss: return "gauss";
  }
  return "?";
}

ActivationKind activation_from_string(const std::string& name) {
  if (name == "tg") return ActivationKind::TG;
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "sin") return ActivationKind::Sin;
  if (name == "gauss") return ActivationKind::Gauss;
  throw ValidationError("unknown activation '" + name +
                        "' (expected tg|tanh|sin|gauss)");
}

ActivationDerivs activation_eval(ActivationKind kind, double x) {
  ActivationDerivs d{};
  switch (kind) {
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      const double s = 1.0 - t * t;  // tanh' = sech^2
      d.f0 = t;
      d.f1 = s;
      d.f2 = -2.0 * t * s;
      d.f3 = s * (4.0 * t * t - 2.0 * s);
      break;
    }
    case ActivationKind::Sin: {
      d.f0 = std::sin(x);
      d.f1 = std::cos(x);
      d.f2 = -d.f0;
      d.f3 = -d.f1;
      break;
    }
    case ActivationKind::Gauss: {
      const double g = std::exp(-0.5 * x * x);
      d.f0 = g;
      d.f1 = -x * g;
      d.f2 = (x * x - 1.0) * g;
      d.f3 = (3.0 * x - x * x * x) * g;
      break;
    }
    case ActivationKind::TG: {
      // phi = t*g with t = tanh, g = exp(-x^2/2). Leibniz over the known
      // derivatives of both factors.
      const double t = std::tanh(x);
      const double s = 1.0 - t * t;
      const double g = std::exp(-0.5 * x * x);
      const double t1 = s, t2 = -2.0 * t * s, t3 = s * (4.0 * t * t - 2.0 * s);
      const double g1 = -x * g, g2 = (x * x - 1.0) * g,
                   g3 = (3.0 * x - x * x * x) * g;
      d.f0 = t * g;
      d.f1 = t1 * g + t * g1;
      d.f2 = t2 * g + 2.0 * t1 * g1 + t * g2;
      d.f3 = t3 * g + 3.0 * t2 * g1 + 3.0 * t1 * g2 + t * g3;
      break;
    }
  }
  return d;
}

void activation_eval_batch(ActivationKind kind, const Eigen::MatrixXd& z,
                           int order, Eigen::MatrixXd* f0, Eigen::MatrixXd* f1,
                           Eigen::MatrixXd* f2, Eigen::MatrixXd* f3) {
  const auto x = z.array();
  switch (kind) {
    case ActivationKind::Tanh: {
      Eigen::ArrayXXd t = x.tanh();
      if (f0) *f0 = t.matrix();
      if (order < 1) return;
      Eigen::ArrayXXd s = 1.0 - t.square();
      *f1 = s.matrix();
      if (order < 2) return;
      *f2 = (-2.0 * t * s).matrix();
      if (order < 3) return;
      *f3 = (s * (4.0 * t.square() - 2.0 * s)).matrix();
      return;
    }
    case ActivationKind::Sin: {
      if (f0) *f0 = x.sin().matrix();
      if (order < 1) return;
      *f1 = x.cos().matrix();
      if (order < 2) return;
      if (f0)
        *f2 = -(*f0);
      else
        *f2 = (-x.sin()).matrix();
      if (order < 3) return;
      *f3 = -(*f1);
      return;
    }
    case ActivationKind::Gauss: {
      Eigen::ArrayXXd g = (-0.5 * x.square()).exp();
      if (f0) *f0 = g.matrix();
      if (order < 1) return;
      *f1 = (-x * g).matrix();
      if (order < 2) return;
      *f2 = ((x.square() - 1.0) * g).matrix();
      if (order < 3) return;
      *f3 = ((3.0 * x - x.cube()) * g).matrix();
      return;
    }
    case ActivationKind::TG: {
      Eigen::ArrayXXd t = x.tanh();
      Eigen::ArrayXXd g = (-0.5 * x.square()).exp();
      if (f0) *f0 = (t * g).matrix();
      if (order < 1) return;
      Eigen::ArrayXXd s = 1.0 - t.square();
      Eigen::ArrayXXd g1 = -x * g;
      *f1 = (s * g + t * g1).matrix();
      if (order < 2) return;
      Eigen::ArrayXXd t2 = -2.0 * t * s;
      Eigen::ArrayXXd g2 = (x.square() - 1.0) * g;
      *f2 = (t2 * g + 2.0 * s * g1 + t * g2).matrix();
      if (order < 3) return;
      Eigen::ArrayXXd t3 = s * (4.0 * t.square() - 2.0 * s);
      Eigen::ArrayXXd g3 = (3.0 * x - x.cube()) * g;
      *f3 = (t3 * g + 3.0 * t2 * g1 + 3.0 * s * g2 + t * g3).matrix();
      return;
    }
  }
}

}  // namespace autopinn
