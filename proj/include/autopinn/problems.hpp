#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "autopinn/model.hpp"

namespace autopinn {

/// One axis-aligned boundary face of the spatial box.
struct Face {
  int dim = 0;
  int side = 0;  // 0 = lower bound, 1 = upper bound
  bool operator==(const Face&) const = default;
};

/// Axis-aligned input box, optionally with one coordinate acting as time. The
/// PDE boundary is the union of the spatial faces; the time axis contributes
/// the t=0 initial slice instead of faces.
struct Domain {
  std::vector<std::array<double, 2>> box;
  int time_axis = -1;

  int dims() const { return static_cast<int>(box.size()); }
  bool has_time() const { return time_axis >= 0; }
  int spatial_dims() const { return dims() - (has_time() ? 1 : 0); }
  std::vector<Face> boundary_faces() const;
  bool contains(const Eigen::VectorXd& x, double tol) const;
  void validate() const;
};

/// Point/value pairs from an external solver, used as truth where no closed
/// form exists.
struct ReferenceDataset {
  Eigen::MatrixXd points;  // input_dim x N
  Eigen::MatrixXd values;  // output_dim x N
  std::string source;
};

enum class ProblemKind { Helmholtz2D, Burgers1D, PoissonND };

/// A benchmark PDE: residual operator with hand-coded partials, boundary and
/// initial targets, domain, and truth oracle. Immutable after construction
/// (attach_reference completes a reference-truth problem before use).
class PdeProblem {
 public:
  const std::string& name() const { return name_; }
  ProblemKind kind() const { return kind_; }
  const Domain& domain() const { return domain_; }
  int input_dim() const { return domain_.dims(); }
  int output_dim() const { return 1; }

  /// PDE residual (output_dim x N) from model jets at the columns of X.
  /// d1/d2 hold derivatives along every input coordinate, in order.
  Eigen::MatrixXd residual(const Eigen::MatrixXd& X, const Eigen::MatrixXd& u,
                           const std::vector<Eigen::MatrixXd>& d1,
                           const std::vector<Eigen::MatrixXd>& d2) const;

  /// Adds the adjoints of sum_ij rbar_ij * r_ij into ubar/d1bar/d2bar
  /// (buffers must be pre-sized and zeroed or carrying prior terms).
  void residual_adjoint(const Eigen::MatrixXd& X, const Eigen::MatrixXd& u,
                        const std::vector<Eigen::MatrixXd>& d1,
                        const std::vector<Eigen::MatrixXd>& d2,
                        const Eigen::MatrixXd& rbar, Eigen::MatrixXd& ubar,
                        std::vector<Eigen::MatrixXd>& d1bar,
                        std::vector<Eigen::MatrixXd>& d2bar) const;

  /// Dirichlet target on a face, at full input points X lying on that face.
  Eigen::MatrixXd boundary_target(const Face& face,
                                  const Eigen::MatrixXd& X) const;

  bool has_initial() const { return domain_.has_time(); }
  /// Initial-condition target at full input points with t = 0.
  Eigen::MatrixXd initial_target(const Eigen::MatrixXd& X) const;

  bool has_analytic_truth() const { return kind_ != ProblemKind::Burgers1D; }
  bool has_truth() const { return has_analytic_truth() || reference_.has_value(); }
  /// Closed-form solution values; throws for reference-truth problems.
  Eigen::MatrixXd truth(const Eigen::MatrixXd& X) const;

  void attach_reference(ReferenceDataset ds);
  const ReferenceDataset* reference() const {
    return reference_ ? &*reference_ : nullptr;
  }

  /// Fixed evaluation set for the accuracy metric: 2D analytic problems use
  /// a 201x201 grid over the box; higher-dimensional ones use 10,000
  /// uniform-random points under a constant seed; reference-truth problems
  /// use the dataset points.
  Eigen::MatrixXd eval_points() const;
  Eigen::MatrixXd eval_truth() const;

  // Problem parameters (for config echo and reports).
  double a1() const { return a1_; }
  double a2() const { return a2_; }
  double k() const { return k_; }
  double nu() const { return nu_; }

  friend PdeProblem helmholtz2d(double a1, double a2, double k);
  friend PdeProblem burgers1d(double nu);
  friend PdeProblem poisson_nd(int n);

 private:
  PdeProblem() = default;

  std::string name_;
  ProblemKind kind_ = ProblemKind::Helmholtz2D;
  Domain domain_;
  double a1_ = 0, a2_ = 0, k_ = 0, nu_ = 0;
  std::optional<ReferenceDataset> reference_;
};

/// u_xx + u_yy + k^2 u = s(x,y) on [-1,1]^2, zero Dirichlet, truth
/// sin(a1 pi x) sin(a2 pi y).
PdeProblem helmholtz2d(double a1 = 1.0, double a2 = 4.0, double k = 1.0);

/// u_t + u u_x = nu u_xx on [-1,1]x[0,1], u(+-1,t)=0, u(x,0)=-sin(pi x),
/// truth from an attached reference dataset.
PdeProblem burgers1d(double nu = 0.01 / 3.14159265358979323846);

/// Laplacian u = sum_i exp(x_i) on [-1,1]^n with Dirichlet data equal to the
/// closed-form solution sum_i exp(x_i).
PdeProblem poisson_nd(int n);

/// CSV rows `x_1,...,x_d,u_1,...,u_m` after one header line. Validates arity
/// and that points lie in the domain closure (tolerance 1e-9).
ReferenceDataset load_reference(const std::string& path,
                                const PdeProblem& problem);

/// Full-precision CSV writer; load_reference on the output reproduces the
/// dataset exactly.
void save_reference(const ReferenceDataset& ds, const std::string& path);

/// ||pred - truth||_2 / ||truth||_2 per channel over columns, aggregated as
/// the root mean of squared channel errors. Throws when some ||truth_c|| = 0.
double l2_relative_error(const Eigen::MatrixXd& pred,
                         const Eigen::MatrixXd& truth,
                         Eigen::VectorXd* per_channel = nullptr);

/// Same metric with the model evaluated on the problem's evaluation set.
double l2_relative_error(const PdeProblem& problem, const JetModel& model,
                         Eigen::VectorXd* per_channel = nullptr);

}  // namespace autopinn
