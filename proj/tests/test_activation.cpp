#include "autopinn/activation.hpp"

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "autopinn/errors.hpp"
#include "autopinn/rng.hpp"
#include "doctest.h"

using namespace autopinn;

namespace {

// Central finite differences of the value function, for checking the
// analytic derivative chain independently.
double fd1(ActivationKind k, double x, double h) {
  return (activation_value(k, x + h) - activation_value(k, x - h)) / (2 * h);
}
double fd2(ActivationKind k, double x, double h) {
  return (activation_value(k, x + h) - 2 * activation_value(k, x) +
          activation_value(k, x - h)) /
         (h * h);
}
double fd3(ActivationKind k, double x, double h) {
  return (activation_value(k, x + 2 * h) - 2 * activation_value(k, x + h) +
          2 * activation_value(k, x - h) - activation_value(k, x - 2 * h)) /
         (2 * h * h * h);
}

const std::vector<ActivationKind> kAll = {ActivationKind::TG,
                                          ActivationKind::Tanh,
                                          ActivationKind::Sin,
                                          ActivationKind::Gauss};

}  // namespace

TEST_CASE("name round trip") {
  for (auto k : kAll) CHECK(activation_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(activation_from_string("relu"), ValidationError);
}

TEST_CASE("fixed high-precision values") {
  // Reference values computed with 40-digit arithmetic and numerical
  // differentiation, so they do not share this file's derivative formulas.
  struct Row {
    ActivationKind k;
    double x, f0, f1, f2, f3;
  };
  const std::vector<Row> rows = {
      {ActivationKind::TG, 1.0, 0.4619302058451363, -0.20720289136360219,
       -0.89745229710595353, 2.4648890569021174},
      {ActivationKind::TG, 0.3, 0.27849412392994265, 0.7913203938596684,
       -1.2880713643190715, -2.9907907147992043},
      {ActivationKind::TG, -2.2, -0.086764657347280989, -0.18662064704077417,
       -0.30610879593637859, -0.23142016208751364},
      {ActivationKind::Tanh, 0.7, 0.6043677771171635, 0.63473958998245859,
       -0.76723231009191655, 0.1215922773832365},
      {ActivationKind::Gauss, 1.3, 0.42955735821073915, -0.55842456567396089,
       0.29639457716541001, 0.73153618103288877},
      {ActivationKind::Sin, 0.9, 0.78332690962748339, 0.62160996827066446,
       -0.78332690962748339, -0.62160996827066446},
  };
  for (const auto& r : rows) {
    const auto d = activation_eval(r.k, r.x);
    CHECK(d.f0 == doctest::Approx(r.f0).epsilon(1e-14));
    CHECK(d.f1 == doctest::Approx(r.f1).epsilon(1e-14));
    CHECK(d.f2 == doctest::Approx(r.f2).epsilon(1e-14));
    CHECK(d.f3 == doctest::Approx(r.f3).epsilon(1e-14));
  }
}

TEST_CASE("derivatives match finite differences") {
  const double h = 1e-5;
  for (auto k : kAll) {
    for (double x = -3.0; x <= 3.0; x += 0.37) {
      const auto d = activation_eval(k, x);
      CHECK(d.f1 == doctest::Approx(fd1(k, x, h)).epsilon(1e-7));
      CHECK(d.f2 == doctest::Approx(fd2(k, x, h)).epsilon(1e-4).scale(1.0));
      CHECK(d.f3 ==
            doctest::Approx(fd3(k, x, 3e-4)).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("derivative chain at random points") {
  // f' against differences of f, f'' against differences of the analytic
  // f', each at step 1e-5 on [-5, 5].
  Rng rng(2024);
  const double h = 1e-5;
  for (auto k : kAll) {
    for (int i = 0; i < 100; ++i) {
      const double x = rng.uniform(-5.0, 5.0);
      const auto d = activation_eval(k, x);
      const double fd_f1 = fd1(k, x, h);
      CHECK(std::abs(d.f1 - fd_f1) <= 1e-8 * (1.0 + std::abs(d.f1)));
      const double fd_f2 = (activation_eval(k, x + h).f1 -
                            activation_eval(k, x - h).f1) /
                           (2 * h);
      CHECK(std::abs(d.f2 - fd_f2) <= 1e-6 * (1.0 + std::abs(d.f2)));
      const double fd_f3 = (activation_eval(k, x + h).f2 -
                            activation_eval(k, x - h).f2) /
                           (2 * h);
      CHECK(std::abs(d.f3 - fd_f3) <= 1e-6 * (1.0 + std::abs(d.f3)));
    }
  }
}

TEST_CASE("tg is not polynomial-like on a difference stencil") {
  // A 10th-order difference annihilates any degree-9 polynomial but not tg.
  const double x0 = 0.3, h = 0.5;
  const double binom[11] = {1, 10, 45, 120, 210, 252, 210, 120, 45, 10, 1};
  double d_tg = 0.0, d_poly = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const double x = x0 + k * h;
    d_tg += sign * binom[k] * activation_value(ActivationKind::TG, x);
    const double y = x / 6.0;  // keep stencil values near 1
    const double p = std::pow(y, 9) - 3 * std::pow(y, 7) + 2 * y * y * y - y;
    d_poly += sign * binom[k] * p;
  }
  CHECK(std::abs(d_tg) > 1e-2);
  CHECK(std::abs(d_poly) <= 1e-9);
}

TEST_CASE("symmetry and decay") {
  for (double x = 0.1; x < 4.0; x += 0.53) {
    // tg and sin are odd; gauss is even.
    CHECK(activation_value(ActivationKind::TG, -x) ==
          doctest::Approx(-activation_value(ActivationKind::TG, x)));
    CHECK(activation_value(ActivationKind::Sin, -x) ==
          doctest::Approx(-activation_value(ActivationKind::Sin, x)));
    CHECK(activation_value(ActivationKind::Gauss, -x) ==
          doctest::Approx(activation_value(ActivationKind::Gauss, x)));
    // The Gaussian window dominates tg's magnitude.
    CHECK(std::abs(activation_value(ActivationKind::TG, x)) <=
          std::exp(-0.5 * x * x));
  }
  CHECK(activation_value(ActivationKind::TG, 0.0) == 0.0);
  CHECK(activation_value(ActivationKind::TG, 9.0) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("batched evaluation agrees with scalar") {
  Eigen::MatrixXd z(3, 5);
  double v = -2.4;
  for (int j = 0; j < z.cols(); ++j)
    for (int i = 0; i < z.rows(); ++i) {
      z(i, j) = v;
      v += 0.33;
    }
  for (auto k : kAll) {
    Eigen::MatrixXd f0, f1, f2, f3;
    activation_eval_batch(k, z, 3, &f0, &f1, &f2, &f3);
    REQUIRE(f0.rows() == z.rows());
    REQUIRE(f3.cols() == z.cols());
    for (int j = 0; j < z.cols(); ++j)
      for (int i = 0; i < z.rows(); ++i) {
        const auto d = activation_eval(k, z(i, j));
        CHECK(f0(i, j) == doctest::Approx(d.f0).epsilon(1e-12));
        CHECK(f1(i, j) == doctest::Approx(d.f1).epsilon(1e-12));
        CHECK(f2(i, j) == doctest::Approx(d.f2).epsilon(1e-12).scale(1.0));
        CHECK(f3(i, j) == doctest::Approx(d.f3).epsilon(1e-12).scale(1.0));
      }
  }
}

TEST_CASE("batched evaluation low orders") {
  Eigen::MatrixXd z(2, 2);
  z << -0.5, 0.25, 1.5, -2.0;
  Eigen::MatrixXd f0, f1;
  activation_eval_batch(ActivationKind::TG, z, 0, &f0, nullptr, nullptr,
                        nullptr);
  CHECK(f0(1, 0) ==
        doctest::Approx(activation_value(ActivationKind::TG, 1.5)));
  activation_eval_batch(ActivationKind::Sin, z, 1, &f0, &f1, nullptr, nullptr);
  CHECK(f1(0, 1) == doctest::Approx(std::cos(0.25)));
}
