#include "autopinn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "autopinn/errors.hpp"
#include "autopinn/rng.hpp"

namespace autopinn {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(int base, long i) {
  double result = 0.0, frac = 1.0 / base;
  while (i > 0) {
    result += (i % base) * frac;
    i /= base;
    frac /= base;
  }
  return result;
}

// Affine map of unit-cube columns into the given bounds, dimension-wise.
void scale_into(MatrixXd& U, const std::vector<std::array<double, 2>>& box) {
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const double lo = box[i][0], hi = box[i][1];
    U.row(i) = (lo + (hi - lo) * U.row(i).array()).matrix();
  }
}

}  // namespace

int SampleSet::added_by_refinement() const {
  int n = 0;
  for (auto p : domain_provenance)
    if (p == PointSource::RarD) ++n;
  return n;
}

MatrixXd hammersley(int n, int d) {
  if (n < 1 || d < 1)
    throw ValidationError("hammersley requires n >= 1 and d >= 1");
  if (d - 1 > static_cast<int>(std::size(kPrimes)))
    throw ValidationError("hammersley dimension too large");
  MatrixXd X(d, n);
  for (int i = 0; i < n; ++i) {
    X(0, i) = static_cast<double>(i) / n;
    for (int j = 1; j < d; ++j) X(j, i) = radical_inverse(kPrimes[j - 1], i);
  }
  return X;
}

MatrixXd lhs(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ValidationError("lhs requires n >= 1 and d >= 1");
  Rng rng(seed);
  MatrixXd X(d, n);
  std::vector<int> perm(n);
  for (int i = 0; i < d; ++i) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int j = n - 1; j > 0; --j)
      std::swap(perm[j], perm[rng.below(static_cast<std::uint64_t>(j) + 1)]);
    for (int j = 0; j < n; ++j) X(i, j) = (perm[j] + rng.uniform()) / n;
  }
  return X;
}

SampleSet sample_problem(const PdeProblem& problem, int n_domain,
                         int n_boundary, int n_initial) {
  const Domain& dom = problem.domain();
  const int d = dom.dims();
  if (n_domain < 1) throw ValidationError("need at least one domain point");
  if (n_boundary < 1) throw ValidationError("need at least one boundary point");
  if (n_initial > 0 && !dom.has_time())
    throw ValidationError(problem.name() +
                          " has no time axis; initial points are invalid");
  if (n_initial < 1 && dom.has_time())
    throw ValidationError(problem.name() + " needs initial points");

  SampleSet set;
  set.domain_points = hammersley(n_domain, d);
  scale_into(set.domain_points, dom.box);
  set.domain_provenance.assign(n_domain, PointSource::Hammersley);

  const auto faces = dom.boundary_faces();
  const int n_faces = static_cast<int>(faces.size());
  set.boundary_points.resize(d, n_boundary);
  set.boundary_faces.resize(n_boundary);
  int col = 0;
  for (int f = 0; f < n_faces; ++f) {
    int count = n_boundary / n_faces + (f < n_boundary % n_faces ? 1 : 0);
    if (count == 0) continue;
    // Free coordinates of the face, in ascending dimension order.
    std::vector<int> free_dims;
    std::vector<std::array<double, 2>> free_box;
    for (int i = 0; i < d; ++i) {
      if (i == faces[f].dim) continue;
      free_dims.push_back(i);
      free_box.push_back(dom.box[i]);
    }
    const double fixed = dom.box[faces[f].dim][faces[f].side];
    if (free_dims.empty()) {
      for (int j = 0; j < count; ++j) {
        set.boundary_points(faces[f].dim, col) = fixed;
        set.boundary_faces[col++] = faces[f];
      }
      continue;
    }
    MatrixXd U = hammersley(count, static_cast<int>(free_dims.size()));
    scale_into(U, free_box);
    for (int j = 0; j < count; ++j) {
      for (std::size_t i = 0; i < free_dims.size(); ++i)
        set.boundary_points(free_dims[i], col) = U(i, j);
      set.boundary_points(faces[f].dim, col) = fixed;
      set.boundary_faces[col++] = faces[f];
    }
  }

  if (dom.has_time()) {
    std::vector<int> free_dims;
    std::vector<std::array<double, 2>> free_box;
    for (int i = 0; i < d; ++i) {
      if (i == dom.time_axis) continue;
      free_dims.push_back(i);
      free_box.push_back(dom.box[i]);
    }
    MatrixXd U = hammersley(n_initial, static_cast<int>(free_dims.size()));
    scale_into(U, free_box);
    set.initial_points.resize(d, n_initial);
    for (int j = 0; j < n_initial; ++j) {
      for (std::size_t i = 0; i < free_dims.size(); ++i)
        set.initial_points(free_dims[i], j) = U(i, j);
      set.initial_points(dom.time_axis, j) = dom.box[dom.time_axis][0];
    }
  } else {
    set.initial_points.resize(d, 0);
  }
  return set;
}

VectorXd rar_probabilities(const VectorXd& r) {
  if (r.size() == 0) throw ValidationError("empty residual vector");
  if (r.minCoeff() < 0.0)
    throw ValidationError("squared residual magnitudes must be nonnegative");
  const double rmax = r.maxCoeff();
  if (rmax == 0.0)
    return VectorXd::Constant(r.size(), 1.0 / static_cast<double>(r.size()));
  const VectorXd rhat = r / rmax;
  return rhat / rhat.sum();
}

SampleSet rar_d(const PdeProblem& problem, const JetModel& model,
                const SampleSet& set, int n_rounds, int n_candidates,
                int n_new, std::uint64_t seed) {
  if (n_rounds < 1) throw ValidationError("refinement needs n_rounds >= 1");
  if (n_new < 1 || n_new > n_candidates)
    throw ValidationError("need 1 <= n_new <= n_candidates");
  const Domain& dom = problem.domain();
  const int d = dom.dims();

  SampleSet out = set;
  MatrixXd added(d, n_rounds * n_new);
  int added_n = 0;
  Rng rng(seed);
  MatrixXd value;
  std::vector<MatrixXd> d1, d2;
  for (int round = 0; round < n_rounds; ++round) {
    MatrixXd C(d, n_candidates);
    for (int j = 0; j < n_candidates; ++j)
      for (int i = 0; i < d; ++i)
        C(i, j) = rng.uniform(dom.box[i][0], dom.box[i][1]);

    model.jets(C, value, d1, d2);
    const MatrixXd res = problem.residual(C, value, d1, d2);
    const VectorXd r = res.colwise().squaredNorm().transpose();
    const VectorXd P = rar_probabilities(r);

    // Weighted sampling without replacement: order candidates by the key
    // log(u)/p (larger is better) and keep the top n_new.
    std::vector<std::pair<double, int>> keys(n_candidates);
    for (int j = 0; j < n_candidates; ++j) {
      const double u = rng.uniform();
      keys[j] = {P[j] > 0.0 ? std::log(u) / P[j]
                            : -std::numeric_limits<double>::infinity(),
                 j};
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (int j = 0; j < n_new; ++j)
      added.col(added_n++) = C.col(keys[j].second);
  }
  out.domain_points.conservativeResize(Eigen::NoChange,
                                       set.n_domain() + added_n);
  out.domain_points.rightCols(added_n) = added;
  out.domain_provenance.insert(out.domain_provenance.end(), added_n,
                               PointSource::RarD);
  return out;
}

void write_samples_csv(const SampleSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeError("cannot write " + path);
  const auto d = set.domain_points.rows();
  for (Eigen::Index i = 0; i < d; ++i) out << "x_" << (i + 1) << ",";
  out << "kind\n";
  char buf[32];
  const auto row = [&](const MatrixXd& pts, Eigen::Index j,
                       const std::string& kind) {
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", pts(i, j));
      out << buf << ",";
    }
    out << kind << "\n";
  };
  for (int j = 0; j < set.n_domain(); ++j)
    row(set.domain_points, j,
        set.domain_provenance[j] == PointSource::RarD ? "domain-rar_d"
                                                      : "domain-hammersley");
  for (int j = 0; j < set.n_boundary(); ++j)
    row(set.boundary_points, j,
        "boundary-" + std::to_string(set.boundary_faces[j].dim) +
            (set.boundary_faces[j].side == 0 ? "lo" : "hi"));
  for (int j = 0; j < set.n_initial(); ++j)
    row(set.initial_points, j, "initial");
  if (!out) throw RuntimeError("write failed for " + path);
}

}  // namespace autopinn
