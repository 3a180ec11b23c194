#include <cmath>
#include <deque>
#include <limits>

#include "autopinn/errors.hpp"
#include "autopinn/training.hpp"

namespace autopinn {

namespace {

using Eigen::VectorXd;

constexpr double kC1 = 1e-4;        // sufficient-decrease constant
constexpr double kC2 = 0.9;         // curvature constant
constexpr double kGradTol = 1e-9;   // stationarity threshold
constexpr double kCurvTol = 1e-10;  // minimum s.y to keep a pair
constexpr int kMaxLineEvals = 60;

struct Pair {
  VectorXd s, y;
  double rho;  // 1 / s.y
};

/// Two-loop recursion; the initial Hessian guess is gamma*I with gamma from
/// the most recent pair.
VectorXd search_direction(const VectorXd& g, const std::deque<Pair>& hist) {
  VectorXd q = -g;
  if (hist.empty()) return q;
  std::vector<double> alpha(hist.size());
  for (int i = static_cast<int>(hist.size()) - 1; i >= 0; --i) {
    alpha[i] = hist[i].rho * hist[i].s.dot(q);
    q -= alpha[i] * hist[i].y;
  }
  const Pair& last = hist.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double beta = hist[i].rho * hist[i].y.dot(q);
    q += (alpha[i] - beta) * hist[i].s;
  }
  return q;
}

struct LinePoint {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
};

/// Minimizer of the cubic fitting (phi, dphi) at two points; falls back to
/// bisection when the fit degenerates or leaves the bracket interior.
double cubic_step(const LinePoint& a, const LinePoint& b) {
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  const double mid = 0.5 * (a.alpha + b.alpha);
  if (!(disc >= 0.0)) return mid;
  const double d2 = std::sqrt(disc) * (b.alpha > a.alpha ? 1.0 : -1.0);
  const double denom = b.dphi - a.dphi + 2.0 * d2;
  if (denom == 0.0 || !std::isfinite(denom)) return mid;
  double t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
  const double lo = std::min(a.alpha, b.alpha), hi = std::max(a.alpha, b.alpha);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) return mid;
  return t;
}

/// Strong-Wolfe line search (bracket then zoom). Returns true with the
/// accepted point's state filled in, false when no acceptable step was found
/// within the evaluation budget.
bool wolfe_search(const LossFn& fn, const VectorXd& x, const VectorXd& d,
                  double phi0, double dphi0, VectorXd& x_out, double& f_out,
                  VectorXd& g_out, int& evals_left) {
  VectorXd g(x.size());
  LinePoint lo{0.0, phi0, dphi0};
  VectorXd g_lo;  // empty while lo is still the origin
  LinePoint cur, hi;
  bool bracketed = false;
  double alpha = 1.0;
  while (evals_left > 0) {
    --evals_left;
    x_out = x + alpha * d;
    cur.alpha = alpha;
    cur.phi = fn(x_out, g);
    cur.dphi = std::isfinite(cur.phi)
                   ? g.dot(d)
                   : std::numeric_limits<double>::infinity();
    const bool armijo =
        std::isfinite(cur.phi) && cur.phi <= phi0 + kC1 * alpha * dphi0;
    if (armijo && std::abs(cur.dphi) <= -kC2 * dphi0) {
      f_out = cur.phi;
      g_out = g;
      return true;  // x_out already holds x + alpha d
    }
    if (!bracketed) {
      if (!armijo || (g_lo.size() > 0 && cur.phi >= lo.phi)) {
        hi = cur;  // overshoot: a minimizer lies between lo and cur
        bracketed = true;
      } else if (cur.dphi >= 0.0) {
        hi = lo;  // slope turned positive: bracket in reverse order
        lo = cur;
        g_lo = g;
        bracketed = true;
      } else {
        lo = cur;  // still descending: expand
        g_lo = g;
        alpha *= 2.0;
        if (alpha > 1e20) return false;
        continue;
      }
    } else {
      if (!armijo || cur.phi >= lo.phi) {
        hi = cur;
      } else {
        if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
        g_lo = g;
      }
    }
    if (std::abs(hi.alpha - lo.alpha) <=
        1e-14 * std::max(1.0, std::abs(lo.alpha))) {
      // Bracket collapsed. Fall back to the best Armijo point seen, even
      // though the curvature condition was never met; the caller's s.y guard
      // keeps such steps out of the history.
      if (g_lo.size() > 0 && lo.phi < phi0) {
        x_out = x + lo.alpha * d;
        f_out = lo.phi;
        g_out = g_lo;
        return true;
      }
      return false;
    }
    alpha = cubic_step(lo, hi);
  }
  return false;
}

}  // namespace

LbfgsResult lbfgs_minimize(const LossFn& fn, VectorXd params, long max_iters,
                           int m_hist, const IterateFn& on_iterate) {
  if (m_hist < 1) throw ValidationError("history size must be at least 1");
  if (max_iters < 0) throw ValidationError("iteration count must be nonnegative");
  if (params.size() < 1) throw ValidationError("empty parameter vector");

  LbfgsResult res;
  res.params = params;
  if (max_iters == 0) return res;

  VectorXd g(params.size());
  double f = fn(params, g);
  if (!std::isfinite(f) || !g.allFinite())
    throw RuntimeError("objective is non-finite at the starting point");

  std::deque<Pair> hist;
  VectorXd x_new(params.size()), g_new(params.size());
  for (long it = 0; it < max_iters; ++it) {
    if (g.norm() <= kGradTol) {
      res.status = LbfgsStatus::Converged;
      break;
    }
    VectorXd d = search_direction(g, hist);
    double dphi0 = g.dot(d);
    if (!(dphi0 < 0.0)) {
      // Stale curvature produced a non-descent direction; restart.
      hist.clear();
      d = -g;
      dphi0 = g.dot(d);
    }
    int evals_left = kMaxLineEvals;
    double f_new = 0.0;
    if (!wolfe_search(fn, params, d, f, dphi0, x_new, f_new, g_new,
                      evals_left)) {
      res.status = LbfgsStatus::LineSearchFailed;
      break;
    }
    const VectorXd s = x_new - params;
    const VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > kCurvTol) {
      hist.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(hist.size()) > m_hist) hist.pop_front();
    }
    params = x_new;
    f = f_new;
    g = g_new;
    res.trace.push_back(f);
    res.iters = it + 1;
    if (on_iterate) on_iterate(res.iters, params, f);
    if (g.norm() <= kGradTol) {
      res.status = LbfgsStatus::Converged;
      break;
    }
  }
  res.params = params;
  return res;
}

}  // namespace autopinn
