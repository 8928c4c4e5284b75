#ifndef ADFA_SIMPLEX_DESCENT_HPP_
#define ADFA_SIMPLEX_DESCENT_HPP_

#include <functional>
#include <span>
#include <vector>

namespace adfa {

// Objective callback: returns f(x) and writes the gradient into grad.
using SimplexObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct SimplexOptions {
  std::size_t max_iters = 20000;
  // Stop once <x, g> - min_i g_i falls below this.
  double gap_tol = 1e-12;
  double initial_step = 1.0;
};

struct SimplexResult {
  std::vector<double> x;
  double objective = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Exponentiated-gradient descent on the probability simplex with backtracking
// on the entropic smoothness condition
//   f(y) <= f(x) + <g, y - x> + KL(y || x) / eta.
// x0 is renormalized; coordinates that start at zero stay at zero.
SimplexResult minimize_on_simplex(const SimplexObjective& objective, std::vector<double> x0,
                                  const SimplexOptions& options = {});

// Generalized KL: sum p log(p / q) - p + q with q floored at `floor` and
// 0 log 0 = 0.  Reduces to the ordinary KL when p and q both sum to 1.
double kl_divergence(std::span<const double> p, std::span<const double> q, double floor);

}  // namespace adfa

#endif  // ADFA_SIMPLEX_DESCENT_HPP_
