#include "autopinn/problems.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "autopinn/errors.hpp"
#include "autopinn/rng.hpp"

namespace autopinn {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;

// Seed for the fixed random evaluation sets of >2D problems; a constant so
// the metric never depends on run seeds.
constexpr std::uint64_t kEvalSeed = 424243;

void check_jets(const PdeProblem& p, const MatrixXd& X, const MatrixXd& u,
                const std::vector<MatrixXd>& d1,
                const std::vector<MatrixXd>& d2) {
  const int d = p.input_dim();
  if (X.rows() != d)
    throw ValidationError("points have " + std::to_string(X.rows()) +
                          " rows, expected " + std::to_string(d));
  if (u.rows() != p.output_dim() || u.cols() != X.cols())
    throw ValidationError("value batch shape mismatch");
  if (static_cast<int>(d1.size()) != d || static_cast<int>(d2.size()) != d)
    throw ValidationError("jet bundle must cover every input coordinate");
}

}  // namespace

std::vector<Face> Domain::boundary_faces() const {
  std::vector<Face> faces;
  for (int i = 0; i < dims(); ++i) {
    if (i == time_axis) continue;
    faces.push_back({i, 0});
    faces.push_back({i, 1});
  }
  return faces;
}

bool Domain::contains(const VectorXd& x, double tol) const {
  if (x.size() != dims()) return false;
  for (int i = 0; i < dims(); ++i)
    if (x[i] < box[i][0] - tol || x[i] > box[i][1] + tol) return false;
  return true;
}

void Domain::validate() const {
  if (box.empty()) throw ValidationError("domain has no dimensions");
  for (const auto& b : box)
    if (!(b[0] < b[1]))
      throw ValidationError("domain bounds must satisfy lo < hi, got [" +
                            std::to_string(b[0]) + ", " + std::to_string(b[1]) +
                            "]");
  if (time_axis >= dims())
    throw ValidationError("time axis outside domain dimensions");
}

PdeProblem helmholtz2d(double a1, double a2, double k) {
  PdeProblem p;
  p.name_ = "helmholtz2d";
  p.kind_ = ProblemKind::Helmholtz2D;
  p.domain_ = {{{-1.0, 1.0}, {-1.0, 1.0}}, -1};
  p.a1_ = a1;
  p.a2_ = a2;
  p.k_ = k;
  return p;
}

PdeProblem burgers1d(double nu) {
  if (!(nu > 0.0))
    throw ValidationError("viscosity must be positive, got " +
                          std::to_string(nu));
  PdeProblem p;
  p.name_ = "burgers1d";
  p.kind_ = ProblemKind::Burgers1D;
  p.domain_ = {{{-1.0, 1.0}, {0.0, 1.0}}, 1};
  p.nu_ = nu;
  return p;
}

PdeProblem poisson_nd(int n) {
  if (n < 2 || n > 8)
    throw ValidationError("poisson dimension must be in [2, 8], got " +
                          std::to_string(n));
  PdeProblem p;
  p.name_ = "poisson" + std::to_string(n) + "d";
  p.kind_ = ProblemKind::PoissonND;
  p.domain_.box.assign(n, {-1.0, 1.0});
  p.domain_.time_axis = -1;
  return p;
}

MatrixXd PdeProblem::residual(const MatrixXd& X, const MatrixXd& u,
                              const std::vector<MatrixXd>& d1,
                              const std::vector<MatrixXd>& d2) const {
  check_jets(*this, X, u, d1, d2);
  switch (kind_) {
    case ProblemKind::Helmholtz2D: {
      const auto sx = (a1_ * kPi * X.row(0).array()).sin();
      const auto sy = (a2_ * kPi * X.row(1).array()).sin();
      const double c = k_ * k_ - a1_ * a1_ * kPi * kPi - a2_ * a2_ * kPi * kPi;
      return (d2[0].array() + d2[1].array() + k_ * k_ * u.array() -
              (c * sx * sy).replicate(u.rows(), 1))
          .matrix();
    }
    case ProblemKind::Burgers1D:
      return (d1[1].array() + u.array() * d1[0].array() -
              nu_ * d2[0].array())
          .matrix();
    case ProblemKind::PoissonND: {
      MatrixXd r = d2[0];
      for (int i = 1; i < input_dim(); ++i) r += d2[i];
      const auto src = X.array().exp().colwise().sum();
      return (r.array() - src.replicate(u.rows(), 1)).matrix();
    }
  }
  throw RuntimeError("unreachable problem kind");
}

void PdeProblem::residual_adjoint(const MatrixXd& X, const MatrixXd& u,
                                  const std::vector<MatrixXd>& d1,
                                  const std::vector<MatrixXd>& d2,
                                  const MatrixXd& rbar, MatrixXd& ubar,
                                  std::vector<MatrixXd>& d1bar,
                                  std::vector<MatrixXd>& d2bar) const {
  check_jets(*this, X, u, d1, d2);
  switch (kind_) {
    case ProblemKind::Helmholtz2D:
      ubar.array() += k_ * k_ * rbar.array();
      d2bar[0] += rbar;
      d2bar[1] += rbar;
      return;
    case ProblemKind::Burgers1D:
      ubar.array() += d1[0].array() * rbar.array();
      d1bar[0].array() += u.array() * rbar.array();
      d1bar[1] += rbar;
      d2bar[0] -= nu_ * rbar;
      return;
    case ProblemKind::PoissonND:
      for (int i = 0; i < input_dim(); ++i) d2bar[i] += rbar;
      return;
  }
}

MatrixXd PdeProblem::boundary_target(const Face& face, const MatrixXd& X) const {
  if (face.dim < 0 || face.dim >= input_dim() || face.dim == domain_.time_axis)
    throw ValidationError("not a boundary face of this domain");
  switch (kind_) {
    case ProblemKind::Helmholtz2D:
    case ProblemKind::Burgers1D:
      return MatrixXd::Zero(output_dim(), X.cols());
    case ProblemKind::PoissonND:
      // Dirichlet data equals the closed-form solution, which is nonzero on
      // the boundary.
      return truth(X);
  }
  throw RuntimeError("unreachable problem kind");
}

MatrixXd PdeProblem::initial_target(const MatrixXd& X) const {
  if (!has_initial())
    throw ValidationError(name_ + " has no time axis, hence no initial condition");
  return (-(kPi * X.row(0).array()).sin()).matrix();
}

MatrixXd PdeProblem::truth(const MatrixXd& X) const {
  switch (kind_) {
    case ProblemKind::Helmholtz2D:
      return ((a1_ * kPi * X.row(0).array()).sin() *
              (a2_ * kPi * X.row(1).array()).sin())
          .matrix();
    case ProblemKind::PoissonND:
      return X.array().exp().colwise().sum().matrix();
    case ProblemKind::Burgers1D:
      throw ValidationError(
          "burgers1d has no closed-form truth; attach reference data");
  }
  throw RuntimeError("unreachable problem kind");
}

void PdeProblem::attach_reference(ReferenceDataset ds) {
  if (ds.points.rows() != input_dim())
    throw ValidationError("reference points have " +
                          std::to_string(ds.points.rows()) +
                          " coordinates, expected " +
                          std::to_string(input_dim()));
  if (ds.values.rows() != output_dim())
    throw ValidationError("reference values have " +
                          std::to_string(ds.values.rows()) +
                          " channels, expected " +
                          std::to_string(output_dim()));
  if (ds.points.cols() != ds.values.cols())
    throw ValidationError("reference points/values lengths differ");
  if (ds.points.cols() == 0) throw ValidationError("reference dataset is empty");
  if (!ds.values.allFinite())
    throw ValidationError("reference values contain non-finite entries");
  for (Eigen::Index j = 0; j < ds.points.cols(); ++j)
    if (!domain_.contains(ds.points.col(j), 1e-9))
      throw ValidationError("reference point " + std::to_string(j) +
                            " lies outside the domain closure");
  reference_ = std::move(ds);
}

MatrixXd PdeProblem::eval_points() const {
  if (!has_analytic_truth()) {
    if (!reference_)
      throw ValidationError(name_ +
                            " needs a reference dataset for evaluation");
    return reference_->points;
  }
  const int d = input_dim();
  if (d == 2) {
    const int n = 201;
    MatrixXd X(2, n * n);
    for (int i = 0; i < n; ++i) {
      const double x =
          domain_.box[0][0] +
          (domain_.box[0][1] - domain_.box[0][0]) * i / double(n - 1);
      for (int j = 0; j < n; ++j) {
        const double y =
            domain_.box[1][0] +
            (domain_.box[1][1] - domain_.box[1][0]) * j / double(n - 1);
        X(0, i * n + j) = x;
        X(1, i * n + j) = y;
      }
    }
    return X;
  }
  const int n = 10000;
  Rng rng(mix_seed(kEvalSeed, static_cast<std::uint64_t>(d)));
  MatrixXd X(d, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < d; ++i)
      X(i, j) = rng.uniform(domain_.box[i][0], domain_.box[i][1]);
  return X;
}

MatrixXd PdeProblem::eval_truth() const {
  if (!has_analytic_truth()) {
    if (!reference_)
      throw ValidationError(name_ +
                            " needs a reference dataset for evaluation");
    return reference_->values;
  }
  return truth(eval_points());
}

ReferenceDataset load_reference(const std::string& path,
                                const PdeProblem& problem) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open reference file " + path);
  const int d = problem.input_dim(), m = problem.output_dim();

  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(path + ": empty file (expected a header line)");

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t comma = line.find(',', start);
      const std::string tok =
          line.substr(start, comma == std::string::npos ? std::string::npos
                                                        : comma - start);
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(tok, &used));
        while (used < tok.size() && std::isspace(tok[used])) ++used;
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ": malformed numeric field '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(fields.size()) != d + m)
      throw ValidationError(path + ": line " + std::to_string(line_no) +
                            ": expected " + std::to_string(d + m) +
                            " fields, got " + std::to_string(fields.size()));
    rows.push_back(std::move(fields));
  }
  if (rows.empty())
    throw ValidationError(path + ": no data rows after the header");

  ReferenceDataset ds;
  ds.points.resize(d, rows.size());
  ds.values.resize(m, rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (int i = 0; i < d; ++i) ds.points(i, j) = rows[j][i];
    for (int i = 0; i < m; ++i) ds.values(i, j) = rows[j][d + i];
  }
  for (Eigen::Index j = 0; j < ds.points.cols(); ++j)
    if (!problem.domain().contains(ds.points.col(j), 1e-9))
      throw ValidationError(path + ": point " + std::to_string(j) +
                            " lies outside the domain closure");
  ds.source = path;
  return ds;
}

void save_reference(const ReferenceDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write " + path);
  for (Eigen::Index i = 0; i < ds.points.rows(); ++i)
    out << "x_" << (i + 1) << ",";
  for (Eigen::Index i = 0; i < ds.values.rows(); ++i)
    out << "u_" << (i + 1) << (i + 1 < ds.values.rows() ? "," : "\n");
  char buf[32];
  for (Eigen::Index j = 0; j < ds.points.cols(); ++j) {
    for (Eigen::Index i = 0; i < ds.points.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.points(i, j));
      out << buf << ",";
    }
    for (Eigen::Index i = 0; i < ds.values.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.values(i, j));
      out << buf << (i + 1 < ds.values.rows() ? "," : "\n");
    }
  }
  if (!out) throw RuntimeError("write failed for " + path);
}

double l2_relative_error(const MatrixXd& pred, const MatrixXd& truth,
                         VectorXd* per_channel) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ValidationError("prediction/truth shape mismatch");
  if (pred.cols() == 0) throw ValidationError("empty evaluation set");
  VectorXd errs(pred.rows());
  for (Eigen::Index c = 0; c < pred.rows(); ++c) {
    const double den = truth.row(c).norm();
    if (den == 0.0)
      throw RuntimeError("L2 relative error undefined: channel " +
                         std::to_string(c) + " of the truth has zero norm");
    errs[c] = (pred.row(c) - truth.row(c)).norm() / den;
  }
  if (per_channel) *per_channel = errs;
  return std::sqrt(errs.squaredNorm() / static_cast<double>(errs.size()));
}

double l2_relative_error(const PdeProblem& problem, const JetModel& model,
                         VectorXd* per_channel) {
  if (model.input_dim() != problem.input_dim() ||
      model.output_dim() != problem.output_dim())
    throw ValidationError("model dimensions do not match problem");
  const MatrixXd X = problem.eval_points();
  return l2_relative_error(model.values(X), problem.eval_truth(), per_channel);
}

}  // namespace autopinn
