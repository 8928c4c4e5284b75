#ifndef ADFA_LINEAR_PROGRAM_HPP_
#define ADFA_LINEAR_PROGRAM_HPP_

#include <vector>

namespace adfa {

// minimize c.x  subject to  A x = b,  x >= 0.  A is dense, row-major.
struct LinearProgram {
  std::size_t n_vars = 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  std::vector<double> cost;
};

struct LpSolution {
  std::vector<double> x;
  double value = 0.0;
  std::size_t pivots = 0;
};

// Two-phase dense tableau simplex.  Dantzig pricing, switching to Bland's rule
// after a run of degenerate pivots so cycling cannot occur.  Infeasible or
// unbounded programs throw InternalError: callers only pose programs that are
// feasible and bounded by construction.
LpSolution solve_lp(const LinearProgram& lp);

}  // namespace adfa

#endif  // ADFA_LINEAR_PROGRAM_HPP_
