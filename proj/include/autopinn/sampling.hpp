#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "autopinn/model.hpp"
#include "autopinn/problems.hpp"

namespace autopinn {

enum class PointSource : std::uint8_t { Hammersley, RarD };

/// Collocation points for one training run. Domain points may grow through
/// adaptive refinement; boundary/initial sets are fixed at sampling time.
struct SampleSet {
  Eigen::MatrixXd domain_points;                // d x n_domain
  std::vector<PointSource> domain_provenance;   // one tag per domain point
  Eigen::MatrixXd boundary_points;              // d x n_boundary
  std::vector<Face> boundary_faces;             // face tag per boundary point
  Eigen::MatrixXd initial_points;               // d x n_initial (0 cols if none)

  int n_domain() const { return static_cast<int>(domain_points.cols()); }
  int n_boundary() const { return static_cast<int>(boundary_points.cols()); }
  int n_initial() const { return static_cast<int>(initial_points.cols()); }
  int added_by_refinement() const;
};

/// Hammersley low-discrepancy set in [0,1]^d: point i is
/// (i/n, phi_2(i), phi_3(i), ...) with radical inverses in the first d-1
/// primes. Columns are points.
Eigen::MatrixXd hammersley(int n, int d);

/// Latin hypercube sample in [0,1]^d: per dimension, one point per stratum
/// [j/n, (j+1)/n) with uniform jitter. Columns are points.
Eigen::MatrixXd lhs(int n, int d, std::uint64_t seed);

/// Deterministic collocation sets for a problem: Hammersley in the domain
/// box, an even face split (remainder to earliest faces) with Hammersley
/// within each face, and Hammersley on the t=0 slice when the problem has a
/// time axis.
SampleSet sample_problem(const PdeProblem& problem, int n_domain,
                         int n_boundary, int n_initial);

/// Normalized selection distribution over squared residual magnitudes:
/// r / max(r) rescaled to sum 1; all-zero input falls back to uniform.
Eigen::VectorXd rar_probabilities(const Eigen::VectorXd& r);

/// Residual-driven refinement: per round, draws n_candidates uniform domain
/// points, scores them by squared PDE residual magnitude under the model,
/// and appends n_new of them drawn without replacement with probabilities
/// proportional to the normalized residuals. Returns the enlarged set.
SampleSet rar_d(const PdeProblem& problem, const JetModel& model,
                const SampleSet& set, int n_rounds, int n_candidates,
                int n_new, std::uint64_t seed);

/// Audit export: one row per point, `x_1,...,x_d,kind` with kind one of
/// domain-hammersley | domain-rar_d | boundary-{dim}{lo|hi} | initial.
void write_samples_csv(const SampleSet& set, const std::string& path);

}  // namespace autopinn
