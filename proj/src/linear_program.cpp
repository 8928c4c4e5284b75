#include "adfa/linear_program.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adfa/error.hpp"

namespace adfa {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-10;
constexpr std::size_t kDegenerateRun = 50;
constexpr std::size_t kMaxPivots = 200000;

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * (cols + 1), 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a_[i * (cols_ + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return a_[i * (cols_ + 1) + j]; }
  double& rhs(std::size_t i) { return at(i, cols_); }
  double rhs(std::size_t i) const { return at(i, cols_); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  void pivot(std::size_t r, std::size_t c, std::vector<double>& reduced, double& obj) {
    const double p = at(r, c);
    for (std::size_t j = 0; j <= cols_; ++j) at(r, j) /= p;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double factor = at(i, c);
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) at(i, j) -= factor * at(r, j);
      at(i, c) = 0.0;
    }
    const double factor = reduced[c];
    if (factor != 0.0) {
      for (std::size_t j = 0; j < cols_; ++j) reduced[j] -= factor * at(r, j);
      obj -= factor * rhs(r);
      reduced[c] = 0.0;
    }
  }

  void drop_row(std::size_t r) {
    a_.erase(a_.begin() + static_cast<std::ptrdiff_t>(r * (cols_ + 1)),
             a_.begin() + static_cast<std::ptrdiff_t>((r + 1) * (cols_ + 1)));
    --rows_;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_;
};

// Runs simplex iterations on columns [0, allowed) until no reduced cost is
// negative.  obj tracks -(current objective value).
std::size_t run_simplex(Tableau& t, std::vector<std::size_t>& basis, std::vector<double>& reduced, double& obj,
                        std::size_t allowed) {
  std::size_t pivots = 0;
  std::size_t degenerate = 0;
  while (true) {
    const bool bland = degenerate >= kDegenerateRun;
    std::size_t enter = allowed;
    double best = -kCostTol;
    for (std::size_t j = 0; j < allowed; ++j) {
      if (reduced[j] < best) {
        enter = j;
        if (bland) break;
        best = reduced[j];
      }
    }
    if (enter == allowed) return pivots;

    std::size_t leave = t.rows();
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows(); ++i) {
      const double a = t.at(i, enter);
      if (a <= kPivotTol) continue;
      const double r = std::max(0.0, t.rhs(i)) / a;
      if (r < ratio - 1e-12 || (r <= ratio + 1e-12 && leave < t.rows() && basis[i] < basis[leave])) {
        ratio = std::min(ratio, r);
        leave = i;
      }
    }
    if (leave == t.rows()) throw InternalError("linear program is unbounded");
    degenerate = ratio <= 1e-12 ? degenerate + 1 : 0;
    t.pivot(leave, enter, reduced, obj);
    basis[leave] = enter;
    if (++pivots > kMaxPivots) throw InternalError("simplex pivot limit exceeded");
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const std::size_t n = lp.n_vars;
  const std::size_t m = lp.rows.size();
  if (lp.rhs.size() != m || lp.cost.size() != n) throw InvalidArgument("linear program has inconsistent shapes");
  for (const auto& row : lp.rows)
    if (row.size() != n) throw InvalidArgument("linear program row has wrong length");

  // Columns: n structural variables then m artificials.
  Tableau t(m, n + m);
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double sign = lp.rhs[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = sign * lp.rows[i][j];
    t.at(i, n + i) = 1.0;
    t.rhs(i) = sign * lp.rhs[i];
    basis[i] = n + i;
  }

  // Phase 1: minimize the sum of artificials.
  std::vector<double> reduced(n + m, 0.0);
  double obj = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) reduced[j] -= t.at(i, j);
    obj -= t.rhs(i);
  }
  LpSolution sol;
  sol.pivots = run_simplex(t, basis, reduced, obj, n + m);
  double scale = 1.0;
  for (double b : lp.rhs) scale = std::max(scale, std::abs(b));
  if (-obj > 1e-8 * scale) throw InternalError("linear program is infeasible");

  // Drive remaining artificials out of the basis; rows where that is
  // impossible are linear combinations of the others.
  for (std::size_t i = 0; i < t.rows();) {
    if (basis[i] < n) {
      ++i;
      continue;
    }
    std::size_t enter = n;
    double best = kPivotTol;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(t.at(i, j)) > best) {
        best = std::abs(t.at(i, j));
        enter = j;
      }
    }
    if (enter == n) {
      t.drop_row(i);
      basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(i));
      continue;
    }
    t.pivot(i, enter, reduced, obj);
    basis[i] = enter;
    ++sol.pivots;
    ++i;
  }

  // Phase 2 on structural columns only.
  std::fill(reduced.begin(), reduced.end(), 0.0);
  for (std::size_t j = 0; j < n; ++j) reduced[j] = lp.cost[j];
  obj = 0.0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const double cb = lp.cost[basis[i]];
    if (cb == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) reduced[j] -= cb * t.at(i, j);
    obj -= cb * t.rhs(i);
  }
  sol.pivots += run_simplex(t, basis, reduced, obj, n);

  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < t.rows(); ++i) sol.x[basis[i]] = std::max(0.0, t.rhs(i));
  sol.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) sol.value += lp.cost[j] * sol.x[j];
  return sol;
}

}  // namespace adfa
