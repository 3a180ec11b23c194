#pragma once

#include <Eigen/Core>
#include <string>

#include "autopinn/network.hpp"

namespace autopinn {

struct Checkpoint {
  Architecture arch;
  Eigen::VectorXd params;
};

/// Text manifest (architecture fields and parameter count) followed by the
/// raw little-endian float64 parameter array. Round-trips bit-exactly.
void save_checkpoint(const Architecture& arch, const Eigen::VectorXd& params,
                     const std::string& path);

/// Throws ValidationError when the manifest is malformed or the payload does
/// not match the declared architecture.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace autopinn
