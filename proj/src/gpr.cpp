#include <Eigen/Cholesky>
#include <cmath>
#include <utility>
#include <vector>

#include "autopinn/bayesopt.hpp"
#include "autopinn/errors.hpp"
#include "autopinn/rng.hpp"

namespace autopinn {
namespace {

constexpr double kNoiseFloor = 1e-8;
constexpr double kMaxJitter = 1e-6;
constexpr std::uint64_t kFitStartSeed = 0xA11CE0F5EEDull;

struct DataStats {
  Eigen::MatrixXd Xn;  // D x n in the unit cube
  Eigen::VectorXd yn;  // standardized
  Eigen::VectorXd x_lo, x_span;
  double y_mean = 0.0, y_std = 1.0;
};

DataStats normalize_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.cols() != y.size())
    throw ValidationError("trial inputs and objectives disagree in count");
  if (X.cols() < 1) throw ValidationError("cannot fit a surrogate to zero trials");
  DataStats s;
  const Eigen::Index D = X.rows(), n = X.cols();
  s.x_lo = X.rowwise().minCoeff();
  s.x_span = X.rowwise().maxCoeff() - s.x_lo;
  for (Eigen::Index d = 0; d < D; ++d)
    if (!(s.x_span[d] > 0.0)) s.x_span[d] = 1.0;  // constant dimension
  s.Xn = (X.colwise() - s.x_lo).array().colwise() / s.x_span.array();
  s.y_mean = y.mean();
  s.y_std = std::sqrt((y.array() - s.y_mean).square().sum() / static_cast<double>(n));
  if (!(s.y_std > 0.0)) s.y_std = 1.0;  // constant targets
  s.yn = (y.array() - s.y_mean) / s.y_std;
  return s;
}

/// Correlation matrix exp(-0.5 sum_d (dx_d/ell_d)^2) over normalized columns.
Eigen::MatrixXd correlation(const Eigen::MatrixXd& Xn,
                            const Eigen::VectorXd& ell) {
  const Eigen::Index D = Xn.rows(), n = Xn.cols();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index d = 0; d < D; ++d) {
    const double inv2 = 1.0 / (ell[d] * ell[d]);
    const auto row = Xn.row(d);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = row[i] - row[j];
        M(i, j) += dx * dx * inv2;
      }
  }
  return (-0.5 * M.array()).exp();
}

/// Cholesky with escalating diagonal jitter (1e-10, 1e-9, ..., 1e-6).
std::pair<Eigen::LLT<Eigen::MatrixXd>, double> chol_jitter(
    const Eigen::MatrixXd& Kn) {
  double jit = 0.0;
  while (true) {
    Eigen::MatrixXd A = Kn;
    if (jit > 0.0) A.diagonal().array() += jit;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return {std::move(llt), jit};
    if (jit >= kMaxJitter)
      throw RuntimeError("covariance matrix is not positive definite even with maximum jitter");
    jit = (jit == 0.0) ? 1e-10 : jit * 10.0;
  }
}

GprModel finish_model(const DataStats& s, const Eigen::VectorXd& ell,
                      double sigma_f2, double sigma_n2) {
  GprModel m;
  m.X = s.Xn;
  m.y = s.yn;
  m.x_lo = s.x_lo;
  m.x_span = s.x_span;
  m.y_mean = s.y_mean;
  m.y_std = s.y_std;
  m.ell = ell;
  m.sigma_f2 = sigma_f2;
  m.sigma_n2 = sigma_n2;

  Eigen::MatrixXd Kn = sigma_f2 * correlation(s.Xn, ell);
  Kn.diagonal().array() += sigma_n2;
  auto [llt, jit] = chol_jitter(Kn);
  m.jitter = jit;
  m.chol = llt.matrixL();
  m.alpha = llt.solve(s.yn);

  const double logdet = 2.0 * m.chol.diagonal().array().log().sum();
  const double n = static_cast<double>(s.yn.size());
  m.log_marginal =
      -0.5 * s.yn.dot(m.alpha) - 0.5 * logdet - 0.5 * n * std::log(2.0 * M_PI);
  return m;
}

}  // namespace

GprModel gpr_build(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& ell, double sigma_f2,
                   double sigma_n2) {
  if (ell.size() != X.rows())
    throw ValidationError("lengthscale count does not match input dimension");
  if ((ell.array() <= 0.0).any())
    throw ValidationError("lengthscales must be positive");
  if (!(sigma_f2 >= 0.0) || !(sigma_n2 >= 0.0))
    throw ValidationError("kernel variances must be nonnegative");
  return finish_model(normalize_data(X, y), ell, sigma_f2, sigma_n2);
}

GprModel gpr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index D = X.rows(), n = X.cols();
  if (n < 2) throw ValidationError("surrogate fit needs at least two trials");
  bool distinct = false;
  for (Eigen::Index j = 1; j < n && !distinct; ++j)
    distinct = (X.col(j) - X.col(0)).norm() > 0.0;
  if (!distinct)
    throw ValidationError("surrogate fit needs at least two distinct trial points; all inputs coincide");

  const DataStats s = normalize_data(X, y);

  // Pairwise squared differences per dimension, reused by every LML call.
  std::vector<Eigen::MatrixXd> Dsq(static_cast<size_t>(D));
  for (Eigen::Index d = 0; d < D; ++d) {
    Dsq[static_cast<size_t>(d)].resize(n, n);
    const auto row = s.Xn.row(d);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = row[i] - row[j];
        Dsq[static_cast<size_t>(d)](i, j) = dx * dx;
      }
  }

  // theta = (log ell_1..D, log sigma_f, rho) with sigma_n^2 = floor + e^{2 rho}.
  const double kBad = 1e10;
  const LossFn neg_lml = [&](const Eigen::VectorXd& th,
                             Eigen::VectorXd& grad) -> double {
    grad = Eigen::VectorXd::Zero(D + 2);
    const Eigen::ArrayXd ell = th.head(D).array().exp();
    const double sf2 = std::exp(2.0 * th[D]);
    const double noise_free = std::exp(2.0 * th[D + 1]);
    const double sn2 = kNoiseFloor + noise_free;
    if (!std::isfinite(sf2) || !std::isfinite(sn2)) return kBad;

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index d = 0; d < D; ++d)
      M += Dsq[static_cast<size_t>(d)] / (ell[d] * ell[d]);
    const Eigen::MatrixXd K = sf2 * (-0.5 * M.array()).exp().matrix();
    if (!K.allFinite()) return kBad;
    Eigen::MatrixXd Kn = K;
    Kn.diagonal().array() += sn2;

    Eigen::LLT<Eigen::MatrixXd> llt;
    try {
      auto [f, jit] = chol_jitter(Kn);
      llt = std::move(f);
    } catch (const RuntimeError&) {
      return kBad;
    }
    const Eigen::VectorXd a = llt.solve(s.yn);
    const double logdet =
        2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    const double nll = 0.5 * s.yn.dot(a) + 0.5 * logdet +
                       0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
    if (!std::isfinite(nll)) return kBad;

    // d(nll)/d(theta_j) = 0.5 tr((Kn^-1 - a a^T) dK/dtheta_j)
    const Eigen::MatrixXd A =
        llt.solve(Eigen::MatrixXd::Identity(n, n)) - a * a.transpose();
    for (Eigen::Index d = 0; d < D; ++d) {
      const Eigen::MatrixXd dK =
          (K.array() * Dsq[static_cast<size_t>(d)].array() / (ell[d] * ell[d]))
              .matrix();
      grad[d] = 0.5 * (A.array() * dK.array()).sum();
    }
    grad[D] = 0.5 * (A.array() * (2.0 * K.array())).sum();
    grad[D + 1] = 0.5 * A.trace() * 2.0 * noise_free;
    if (!grad.allFinite()) {
      grad.setZero();
      return kBad;
    }
    return nll;
  };

  Rng rng(kFitStartSeed);
  Eigen::VectorXd best_theta;
  double best_nll = std::numeric_limits<double>::infinity();
  const auto consider = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd g;
    const double val = neg_lml(th, g);
    if (val >= kBad) return;
    // Signal and noise trade off on a flat likelihood ridge for consistent
    // data; near-ties resolve toward interpolation (smaller noise).
    const double tol = 1e-6 * std::max(1.0, std::abs(best_nll));
    const bool better =
        val < best_nll - tol ||
        (val < best_nll + tol && best_theta.size() && th[D + 1] < best_theta[D + 1]);
    if (best_theta.size() == 0 || better) {
      best_nll = std::min(val, best_nll);
      best_theta = th;
    }
  };
  for (int start = 0; start < 8; ++start) {
    Eigen::VectorXd th(D + 2);
    if (start == 0) {
      th.head(D).setConstant(std::log(0.5));
      th[D] = 0.0;
      th[D + 1] = std::log(1e-3);
    } else {
      for (Eigen::Index d = 0; d < D; ++d)
        th[d] = rng.uniform(std::log(0.1), std::log(2.0));
      th[D] = rng.uniform(std::log(0.3), std::log(3.0));
      th[D + 1] = rng.uniform(std::log(1e-4), std::log(0.3));
    }
    LbfgsResult res;
    try {
      res = lbfgs_minimize(neg_lml, th, 100);
    } catch (const RuntimeError&) {
      continue;  // start diverged; other starts remain
    }
    consider(res.params);
    // The noise gradient decays exponentially as it shrinks, so descent can
    // stall above the floor; test the floored variant of this optimum too.
    Eigen::VectorXd floored = res.params;
    floored[D + 1] = std::log(1e-12);
    consider(floored);
  }
  if (!best_theta.size())
    throw RuntimeError("marginal-likelihood optimization failed from every start");

  const Eigen::VectorXd ell = best_theta.head(D).array().exp();
  const double sf2 = std::exp(2.0 * best_theta[D]);
  // The floor keeps the likelihood well posed during the search; an optimum
  // resting on it means the data are consistent, so the stored predictor
  // interpolates exactly (the factorization jitters itself only if needed).
  const double extra = std::exp(2.0 * best_theta[D + 1]);
  const double sn2 = (extra <= kNoiseFloor) ? 0.0 : kNoiseFloor + extra;
  return finish_model(s, ell, sf2, sn2);
}

std::pair<double, double> gpr_predict(const GprModel& model,
                                      const Eigen::VectorXd& x) {
  if (model.n() < 1) throw ValidationError("surrogate is not fitted");
  if (x.size() != model.dim())
    throw ValidationError("query dimension does not match surrogate");
  const Eigen::VectorXd xn =
      (x - model.x_lo).array() / model.x_span.array();
  const Eigen::Index n = model.n();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q =
        ((xn - model.X.col(i)).array() / model.ell.array()).square().sum();
    k[i] = model.sigma_f2 * std::exp(-0.5 * q);
  }
  const double mu_n = k.dot(model.alpha);
  const Eigen::VectorXd v =
      model.chol.triangularView<Eigen::Lower>().solve(k);
  const double var_n = std::max(model.sigma_f2 - v.squaredNorm(), 0.0);
  return {model.y_mean + model.y_std * mu_n, model.y_std * std::sqrt(var_n)};
}

double expected_improvement(double mu, double sigma, double f_best) {
  const double delta = mu - f_best;
  if (!(sigma > 0.0)) return std::max(delta, 0.0);
  const double z = delta / sigma;
  const double Phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return std::max(delta * Phi + sigma * phi, 0.0);
}

}  // namespace autopinn
