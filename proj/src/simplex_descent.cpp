#include "adfa/simplex_descent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adfa/error.hpp"

namespace adfa {

double kl_divergence(std::span<const double> p, std::span<const double> q, double floor) {
  if (p.size() != q.size()) throw InvalidArgument("kl_divergence: size mismatch");
  // Summed as p (u - log1p(u)) + (q - p) per term, u = q/p - 1.  Equal to the
  // usual sum when both sides are normalized, but every term is nonnegative
  // and accurate near p = q, which the tight solver tolerances rely on.
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double qi = std::max(q[i], floor);
    if (p[i] <= 0.0) {
      d += qi;
      continue;
    }
    const double u = qi / p[i] - 1.0;
    d += p[i] * (u - std::log1p(u));
  }
  return d;
}

namespace {

double simplex_gap(std::span<const double> x, std::span<const double> g) {
  double inner = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    inner += x[i] * g[i];
    lo = std::min(lo, g[i]);
  }
  return inner - lo;
}

// y_i proportional to x_i exp(-eta (g_i - min g)); shifting by min g keeps the
// exponent nonpositive.
void eg_step(std::span<const double> x, std::span<const double> g, double eta, std::vector<double>& y) {
  const double lo = *std::min_element(g.begin(), g.end());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] * std::exp(-eta * (g[i] - lo));
    z += y[i];
  }
  for (double& v : y) v /= z;
}

}  // namespace

SimplexResult minimize_on_simplex(const SimplexObjective& objective, std::vector<double> x0,
                                  const SimplexOptions& options) {
  const std::size_t d = x0.size();
  if (d == 0) throw InvalidArgument("minimize_on_simplex: empty variable");
  double sum = 0.0;
  for (double v : x0) {
    if (!(v >= 0.0)) throw InvalidArgument("minimize_on_simplex: start must be nonnegative");
    sum += v;
  }
  if (!(sum > 0.0)) throw InvalidArgument("minimize_on_simplex: start has zero mass");
  for (double& v : x0) v /= sum;

  SimplexResult res;
  res.x = std::move(x0);
  std::vector<double> g(d), y(d), gy(d);
  double fx = objective(res.x, g);
  double eta = options.initial_step;

  for (res.iterations = 0; res.iterations < options.max_iters; ++res.iterations) {
    res.gap = simplex_gap(res.x, g);
    if (res.gap <= options.gap_tol) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    double fy = 0.0;
    for (int attempt = 0; attempt < 80; ++attempt) {
      eg_step(res.x, g, eta, y);
      fy = objective(y, gy);
      // Gradient shifted by its mean under x: the rounding in sum(y) - 1 would
      // otherwise swamp the linear term near the optimum.
      double mean_g = 0.0;
      for (std::size_t i = 0; i < d; ++i) mean_g += res.x[i] * g[i];
      double lin = 0.0;
      for (std::size_t i = 0; i < d; ++i) lin += (g[i] - mean_g) * (y[i] - res.x[i]);
      const double bound = fx + lin + kl_divergence(y, res.x, 1e-300) / eta;
      if (std::isfinite(fy) && fy <= bound + 1e-12 * std::abs(fx)) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;  // step collapsed; report the current point
    // Never move uphill, even within the rounding slack above.
    if (fy > fx) break;
    res.x.swap(y);
    g.swap(gy);
    fx = fy;
    eta *= 2.0;
  }
  res.objective = fx;
  if (!res.converged) {
    res.gap = simplex_gap(res.x, g);
    res.converged = res.gap <= options.gap_tol;
  }
  return res;
}

}  // namespace adfa
