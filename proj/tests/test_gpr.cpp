#include <cmath>

#include "autopinn/bayesopt.hpp"
#include "autopinn/errors.hpp"
#include "autopinn/rng.hpp"
#include "doctest.h"

using namespace autopinn;

namespace {

Eigen::MatrixXd row_points(std::initializer_list<double> xs) {
  Eigen::MatrixXd X(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index j = 0;
  for (double x : xs) X(0, j++) = x;
  return X;
}

Eigen::VectorXd vec(std::initializer_list<double> ys) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ys.size()));
  Eigen::Index j = 0;
  for (double v : ys) y[j++] = v;
  return y;
}

/// sin(2 pi x) sampled at i/9, i = 0..9.
void sine_data(Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  X.resize(1, 10);
  y.resize(10);
  for (int i = 0; i < 10; ++i) {
    X(0, i) = i / 9.0;
    y[i] = std::sin(2.0 * M_PI * X(0, i));
  }
}

}  // namespace

TEST_CASE("two-point posterior matches the hand-solved system") {
  // x = {0, 1}, y = {1, 2}, unit lengthscale/signal, zero noise. Frozen
  // reference values from a 40-digit dense solve of the 2x2 system.
  const GprModel m = gpr_build(row_points({0.0, 1.0}), vec({1.0, 2.0}),
                               vec({1.0}), 1.0, 0.0);
  auto [mu0, sig0] = gpr_predict(m, vec({0.0}));
  auto [mu1, sig1] = gpr_predict(m, vec({1.0}));
  CHECK(mu0 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mu1 == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(sig0 <= 1e-6);
  CHECK(sig1 <= 1e-6);

  auto [mu, sig] = gpr_predict(m, vec({0.25}));
  CHECK(mu == doctest::Approx(1.2275599258499323).epsilon(1e-12));
  CHECK(sig == doctest::Approx(0.06419321687327813).epsilon(1e-9));
}

TEST_CASE("fit interpolates two observations at low noise") {
  const GprModel m = gpr_fit(row_points({0.0, 1.0}), vec({0.0, 1.0}));
  auto [mu0, sig0] = gpr_predict(m, vec({0.0}));
  auto [mu1, sig1] = gpr_predict(m, vec({1.0}));
  CHECK(std::abs(mu0 - 0.0) <= 1e-6);
  CHECK(std::abs(mu1 - 1.0) <= 1e-6);
  CHECK(sig0 >= 0.0);
}

TEST_CASE("posterior matches a dense direct solve on fixed kernel") {
  // Reference (mu, sigma) from an independent 40-digit dense implementation
  // with lengthscale 0.3, unit signal, noise 1e-8.
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  sine_data(X, y);
  const GprModel m = gpr_build(X, y, vec({0.3}), 1.0, 1e-8);

  auto [mu_a, sig_a] = gpr_predict(m, vec({0.05}));
  CHECK(mu_a == doctest::Approx(0.30914463294256729).epsilon(1e-10));
  CHECK(sig_a == doctest::Approx(3.0685519989140406e-4).epsilon(1e-6));

  auto [mu_b, sig_b] = gpr_predict(m, vec({0.37}));
  CHECK(mu_b == doctest::Approx(0.72896627409476297).epsilon(1e-10));
  CHECK(sig_b == doctest::Approx(6.2502758216725868e-5).epsilon(1e-6));

  auto [mu_c, sig_c] = gpr_predict(m, vec({0.81}));
  CHECK(mu_c == doctest::Approx(-0.92976116682711985).epsilon(1e-10));
  CHECK(sig_c == doctest::Approx(9.2611554098430389e-5).epsilon(1e-6));
}

TEST_CASE("fitted surrogate tracks a smooth 1D function") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  sine_data(X, y);
  const GprModel m = gpr_fit(X, y);

  // Interpolation of the noiseless targets and near-zero variance at data.
  const double out_sf2 = m.sigma_f2 * m.y_std * m.y_std;
  for (int i = 0; i < 10; ++i) {
    auto [mu, sig] = gpr_predict(m, X.col(i));
    CHECK(std::abs(mu - y[i]) <= 1e-6);
    CHECK(sig * sig <= 1e-6 * out_sf2);
  }

  // Held-out accuracy on 50 midpoints.
  double sq = 0.0;
  for (int j = 0; j < 50; ++j) {
    const double x = (2.0 * j + 1.0) / 100.0;
    auto [mu, sig] = gpr_predict(m, vec({x}));
    const double diff = mu - std::sin(2.0 * M_PI * x);
    sq += diff * diff;
  }
  CHECK(std::sqrt(sq / 50.0) < 0.1);

  // Far from every observation the posterior reverts to the prior.
  auto [mu_far, sig_far] = gpr_predict(m, vec({60.0}));
  CHECK(std::abs(mu_far - y.mean()) <= 1e-8 * std::max(1.0, std::abs(y.mean())) + 1e-12);
  CHECK(sig_far * sig_far == doctest::Approx(out_sf2).epsilon(1e-8));
}

TEST_CASE("variance shrinks near data and never goes negative") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  sine_data(X, y);
  const GprModel m = gpr_build(X, y, vec({0.3}), 1.0, 1e-8);
  auto [mu_at, sig_at] = gpr_predict(m, X.col(4));
  auto [mu_far, sig_far] = gpr_predict(m, vec({25.0}));
  CHECK(sig_at <= sig_far);
  CHECK(sig_at >= 0.0);
}

TEST_CASE("zero-signal surrogate predicts the target mean exactly") {
  const GprModel m = gpr_build(row_points({0.0, 1.0}), vec({3.0, 5.0}),
                               vec({1.0}), 0.0, 1.0);
  auto [mu, sig] = gpr_predict(m, vec({0.3}));
  CHECK(mu == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(sig == 0.0);
}

TEST_CASE("fit rejects degenerate trial sets") {
  CHECK_THROWS_AS(gpr_fit(row_points({0.5}), vec({1.0})), ValidationError);
  CHECK_THROWS_AS(gpr_fit(row_points({0.5, 0.5, 0.5}), vec({1.0, 2.0, 3.0})),
                  ValidationError);
  CHECK_THROWS_AS(gpr_fit(row_points({0.0, 1.0}), vec({1.0})), ValidationError);
  CHECK_THROWS_AS(
      gpr_build(row_points({0.0, 1.0}), vec({1.0, 2.0}), vec({-1.0}), 1.0, 0.0),
      ValidationError);
}

TEST_CASE("predict validates the query") {
  const GprModel m = gpr_build(row_points({0.0, 1.0}), vec({1.0, 2.0}),
                               vec({1.0}), 1.0, 1e-8);
  CHECK_THROWS_AS(gpr_predict(m, vec({0.0, 1.0})), ValidationError);
}

TEST_CASE("improvement acquisition matches its closed form") {
  // At mu = f_best with unit sigma the value is the standard normal density
  // at zero.
  CHECK(expected_improvement(2.0, 1.0, 2.0) ==
        doctest::Approx(0.3989422804014327).epsilon(1e-9));
  CHECK(std::abs(expected_improvement(0.0, 1.0, 0.0) - 0.3989423) < 1e-6);

  // Degenerate sigma reduces to the hard improvement.
  CHECK(expected_improvement(1.0, 0.0, 2.0) == 0.0);
  CHECK(expected_improvement(2.0, 0.0, 2.0) == 0.0);
  CHECK(expected_improvement(3.5, 0.0, 2.0) == 1.5);
}

TEST_CASE("improvement acquisition is nonnegative and monotone in sigma") {
  Rng rng(91823);
  for (int i = 0; i < 1000; ++i) {
    const double mu = rng.uniform(-5.0, 5.0);
    const double sigma = rng.uniform(0.0, 3.0);
    const double f_best = rng.uniform(-5.0, 5.0);
    CHECK(expected_improvement(mu, sigma, f_best) >= 0.0);
  }
  for (const double mu : {-1.0, 0.0, 0.7}) {
    const double f_best = 0.2;
    double prev = expected_improvement(mu, 0.0, f_best);
    for (int k = 1; k <= 200; ++k) {
      const double cur = expected_improvement(mu, 0.01 * k, f_best);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
}
