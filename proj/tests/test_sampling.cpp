#include "autopinn/sampling.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "autopinn/errors.hpp"
#include "autopinn/problems.hpp"
#include "doctest.h"

using namespace autopinn;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Count points of X falling in the quadrant selected by the bit mask over
// coordinates (bit i set means coordinate i >= 0.5).
int quadrant_count(const MatrixXd& X, unsigned mask) {
  int count = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    bool in = true;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const bool hi = X(i, j) >= 0.5;
      if (hi != (((mask >> i) & 1u) != 0)) in = false;
    }
    if (in) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("hammersley sequence") {
  SUBCASE("first points in two dimensions") {
    const MatrixXd X = hammersley(4, 2);
    REQUIRE(X.rows() == 2);
    REQUIRE(X.cols() == 4);
    // First coordinate is i/n; second is the base-2 radical inverse.
    const double want[4][2] = {{0.0, 0.0}, {0.25, 0.5}, {0.5, 0.25}, {0.75, 0.75}};
    for (int j = 0; j < 4; ++j) {
      CHECK(X(0, j) == want[j][0]);
      CHECK(X(1, j) == want[j][1]);
    }
  }
  SUBCASE("single point") {
    const MatrixXd X = hammersley(1, 1);
    CHECK(X(0, 0) == 0.0);
  }
  SUBCASE("base-3 radical inverse") {
    // Point 5 in base 3: 5 = 12_3 reversed gives 0.21_3 = 2/3 + 1/9.
    const MatrixXd X = hammersley(6, 3);
    CHECK(X(2, 5) == doctest::Approx(7.0 / 9.0).epsilon(1e-15));
  }
  SUBCASE("range and balance") {
    const MatrixXd X = hammersley(256, 2);
    CHECK(X.minCoeff() >= 0.0);
    CHECK(X.maxCoeff() < 1.0);
    for (unsigned mask = 0; mask < 4; ++mask) {
      const int c = quadrant_count(X, mask);
      CHECK(c >= 56);
      CHECK(c <= 72);
    }
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(hammersley(0, 2), ValidationError);
    CHECK_THROWS_AS(hammersley(4, 0), ValidationError);
    CHECK_THROWS_AS(hammersley(4, 14), ValidationError);
  }
}

TEST_CASE("latin hypercube") {
  const int n = 64;
  const MatrixXd X = lhs(n, 3, 99);
  REQUIRE(X.rows() == 3);
  REQUIRE(X.cols() == n);
  SUBCASE("one point per stratum in every dimension") {
    for (int i = 0; i < 3; ++i) {
      std::set<int> bins;
      for (int j = 0; j < n; ++j) {
        const double v = X(i, j);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        bins.insert(static_cast<int>(std::floor(v * n)));
      }
      CHECK(bins.size() == static_cast<std::size_t>(n));
    }
  }
  SUBCASE("seed determinism") {
    CHECK(lhs(n, 3, 99) == X);
    CHECK(lhs(n, 3, 100) != X);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(lhs(0, 3, 1), ValidationError);
    CHECK_THROWS_AS(lhs(4, 0, 1), ValidationError);
  }
}

TEST_CASE("problem sampling") {
  SUBCASE("stationary problem") {
    const auto p = helmholtz2d();
    const SampleSet s = sample_problem(p, 1350, 1650, 0);
    CHECK(s.n_domain() == 1350);
    CHECK(s.n_boundary() == 1650);
    CHECK(s.n_initial() == 0);
    CHECK(s.added_by_refinement() == 0);
    CHECK(s.domain_provenance.size() == 1350);
    CHECK(s.boundary_faces.size() == 1650);
    for (int j = 0; j < s.n_domain(); ++j) {
      CHECK(s.domain_points.col(j).minCoeff() >= -1.0);
      CHECK(s.domain_points.col(j).maxCoeff() <= 1.0);
      CHECK(s.domain_provenance[j] == PointSource::Hammersley);
    }
    // Boundary points sit exactly on their face.
    for (int j = 0; j < s.n_boundary(); ++j) {
      const Face f = s.boundary_faces[j];
      const double want = f.side ? p.domain().box[f.dim][1] : p.domain().box[f.dim][0];
      CHECK(s.boundary_points(f.dim, j) == want);
    }
  }
  SUBCASE("boundary count splits across faces") {
    const auto p = helmholtz2d();
    const SampleSet s = sample_problem(p, 4, 8, 0);
    int per_face[2][2] = {};
    for (const Face& f : s.boundary_faces) ++per_face[f.dim][f.side];
    for (int d = 0; d < 2; ++d)
      for (int side = 0; side < 2; ++side) CHECK(per_face[d][side] == 2);
  }
  SUBCASE("remainder goes to the earliest faces") {
    const auto p = poisson_nd(5);  // 10 faces
    const SampleSet s = sample_problem(p, 4, 11, 0);
    std::vector<int> per_face(10, 0);
    for (const Face& f : s.boundary_faces) ++per_face[2 * f.dim + f.side];
    CHECK(per_face[0] == 2);
    for (int i = 1; i < 10; ++i) CHECK(per_face[i] == 1);
  }
  SUBCASE("time axis gets initial points instead of faces") {
    const auto p = burgers1d();
    const SampleSet s = sample_problem(p, 100, 40, 5);
    CHECK(s.n_initial() == 5);
    for (int j = 0; j < 5; ++j) {
      CHECK(s.initial_points(1, j) == 0.0);  // t
      CHECK(std::abs(s.initial_points(0, j)) <= 1.0);
    }
    for (const Face& f : s.boundary_faces) CHECK(f.dim == 0);
  }
  SUBCASE("initial count validation") {
    CHECK_THROWS_AS(sample_problem(burgers1d(), 10, 10, 0), ValidationError);
    CHECK_THROWS_AS(sample_problem(helmholtz2d(), 10, 10, 5), ValidationError);
    CHECK_THROWS_AS(sample_problem(helmholtz2d(), 0, 10, 0), ValidationError);
    CHECK_THROWS_AS(sample_problem(helmholtz2d(), 10, 0, 0), ValidationError);
  }
}

TEST_CASE("residual-weighted probabilities") {
  SUBCASE("worked example") {
    VectorXd r(2);
    r << 3.0, 1.0;
    const VectorXd p = rar_probabilities(r);
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("normalization") {
    VectorXd r(5);
    r << 0.3, 2.0, 0.01, 5.0, 1.1;
    const VectorXd p = rar_probabilities(r);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.minCoeff() > 0.0);
    // Order preserved: bigger residual, bigger probability.
    CHECK(p[3] > p[1]);
    CHECK(p[1] > p[0]);
  }
  SUBCASE("all-zero residuals fall back to uniform") {
    const VectorXd p = rar_probabilities(VectorXd::Zero(4));
    for (int i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.25));
  }
  SUBCASE("negative residuals are rejected") {
    VectorXd r(2);
    r << 1.0, -0.5;
    CHECK_THROWS_AS(rar_probabilities(r), ValidationError);
  }
}

TEST_CASE("adaptive refinement") {
  const auto p = poisson_nd(2);
  // Truth-jet model with an extra residual bump on the left half: residual is
  // exactly `big` where x < 0 and `small` elsewhere.
  const double big = 10.0, small = 1.0;
  AnalyticModel model(
      2, 1,
      [&](const MatrixXd& X, MatrixXd& v, std::vector<MatrixXd>& d1,
          std::vector<MatrixXd>& d2) {
        v = X.array().exp().colwise().sum().matrix();
        d1.assign(2, MatrixXd());
        d2.assign(2, MatrixXd());
        for (int i = 0; i < 2; ++i) {
          d1[i] = X.row(i).array().exp().matrix();
          d2[i] = d1[i];
        }
        for (Eigen::Index j = 0; j < X.cols(); ++j)
          d2[0](0, j) += (X(0, j) < 0.0) ? big : small;
      });
  const SampleSet base = sample_problem(p, 100, 40, 0);

  SUBCASE("adds the requested points with provenance") {
    const SampleSet out = rar_d(p, model, base, 10, 200, 50, 7);
    CHECK(out.n_domain() == 600);
    CHECK(out.added_by_refinement() == 500);
    CHECK(out.n_boundary() == base.n_boundary());
    for (int j = 0; j < 100; ++j)
      CHECK(out.domain_points.col(j) == base.domain_points.col(j));
    for (int j = 100; j < 600; ++j) {
      CHECK(out.domain_provenance[j] == PointSource::RarD);
      CHECK(out.domain_points.col(j).minCoeff() >= -1.0);
      CHECK(out.domain_points.col(j).maxCoeff() <= 1.0);
    }
  }
  SUBCASE("focuses on the high-residual region") {
    const SampleSet out = rar_d(p, model, base, 10, 200, 50, 7);
    int left = 0;
    for (int j = 100; j < 600; ++j)
      if (out.domain_points(0, j) < 0.0) ++left;
    // Selection weight ratio is 100:1, so the high-residual half dominates.
    CHECK(left >= 400);
  }
  SUBCASE("deterministic under the seed") {
    const SampleSet a = rar_d(p, model, base, 3, 100, 10, 42);
    const SampleSet b = rar_d(p, model, base, 3, 100, 10, 42);
    CHECK(a.domain_points == b.domain_points);
    const SampleSet c = rar_d(p, model, base, 3, 100, 10, 43);
    CHECK(a.domain_points != c.domain_points);
  }
  SUBCASE("no duplicates within a round") {
    // With n_new == n_candidates every candidate is taken exactly once.
    const SampleSet out = rar_d(p, model, base, 1, 25, 25, 3);
    std::set<std::pair<double, double>> seen;
    for (int j = 100; j < 125; ++j)
      seen.insert({out.domain_points(0, j), out.domain_points(1, j)});
    CHECK(seen.size() == 25);
  }
  SUBCASE("argument validation") {
    CHECK_THROWS_AS(rar_d(p, model, base, 0, 100, 10, 1), ValidationError);
    CHECK_THROWS_AS(rar_d(p, model, base, 1, 100, 0, 1), ValidationError);
    CHECK_THROWS_AS(rar_d(p, model, base, 1, 10, 20, 1), ValidationError);
  }
}

TEST_CASE("sample export") {
  const auto p = burgers1d();
  SampleSet s = sample_problem(p, 6, 4, 3);
  s.domain_points.conservativeResize(2, 7);
  s.domain_points.col(6) << 0.125, 0.375;
  s.domain_provenance.push_back(PointSource::RarD);

  const auto path =
      (std::filesystem::temp_directory_path() / "samples_out.csv").string();
  write_samples_csv(s, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "x_1,x_2,kind");
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 14);
  const auto kind_of = [](const std::string& r) {
    return r.substr(r.rfind(',') + 1);
  };
  CHECK(kind_of(rows[0]) == "domain-hammersley");
  CHECK(rows[6] == "0.125,0.375,domain-rar_d");
  int b_lo = 0, b_hi = 0, ini = 0;
  for (const auto& r : rows) {
    if (kind_of(r) == "boundary-0lo") ++b_lo;
    if (kind_of(r) == "boundary-0hi") ++b_hi;
    if (kind_of(r) == "initial") ++ini;
  }
  CHECK(b_lo == 2);
  CHECK(b_hi == 2);
  CHECK(ini == 3);
}
