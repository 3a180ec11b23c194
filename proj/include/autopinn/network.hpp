#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "autopinn/activation.hpp"

namespace autopinn {

enum class NetKind { FCNN, ResNet };

std::string to_string(NetKind kind);
NetKind net_kind_from_string(const std::string& name);

/// One affine layer in the flattened execution plan. `skip_from` >= 0 marks
/// the residual-block exit: after activation, the activated output of layer
/// `skip_from`'s *input* (the block entry state) is added back in.
struct LayerSpec {
  int in = 0;
  int out = 0;
  bool activated = false;
  int skip_from = -1;  // index of the layer whose input feeds the skip
};

/// Network shape. `depth` counts hidden layers for FCNN and residual blocks
/// for ResNet; every hidden layer has `width` neurons.
struct Architecture {
  NetKind kind = NetKind::FCNN;
  int input_dim = 0;
  int output_dim = 0;
  int depth = 0;
  int width = 0;
  ActivationKind activation = ActivationKind::TG;

  /// Flattened affine-layer plan; throws ValidationError on bad dims.
  std::vector<LayerSpec> layers() const;

  /// Closed-form total of weights and biases over the layer plan.
  long param_count() const;

  /// Human-readable description of the flat parameter ordering; stored in
  /// checkpoints so the layout is auditable.
  std::string layout_string() const;

  bool operator==(const Architecture&) const = default;
};

/// Second-order directional Taylor value: (u, du/ds, d2u/ds2) along one
/// seeded input coordinate.
struct Jet2 {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
/// Element order matches layout_string(): per layer, W column-major, then b.
Eigen::VectorXd init_params(const Architecture& arch, std::uint64_t seed);

/// Single-point evaluation. Checks every layer for non-finite values and
/// reports the offending layer index.
Eigen::VectorXd forward(const Architecture& arch, const Eigen::VectorXd& params,
                        const Eigen::VectorXd& x);

/// Single-point jet along input coordinate `direction`; one Jet2 per output.
std::vector<Jet2> forward_jet(const Architecture& arch,
                              const Eigen::VectorXd& params,
                              const Eigen::VectorXd& x, int direction);

}  // namespace autopinn
