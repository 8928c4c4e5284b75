#include "adfa/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adfa/error.hpp"
#include "adfa/inference.hpp"
#include "adfa/linear_program.hpp"
#include "adfa/simplex_descent.hpp"

namespace adfa {

// ------------------------------------------------------------ empirical tables

SubsetMoment empirical_moment(const BinaryDataset& data, std::span<const VarId> ids) {
  if (data.rows() == 0) throw InvalidArgument("empirical moments need a non-empty dataset");
  for (VarId id : ids)
    if (id >= data.n_observed()) throw InvalidArgument("empirical moment id " + std::to_string(id) + " is not observed");
  std::vector<double> counts(std::size_t{1} << ids.size(), 0.0);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.observed(r);
    std::size_t idx = 0;
    for (std::size_t t = 0; t < ids.size(); ++t)
      if (x[ids[t]]) idx |= std::size_t{1} << t;
    counts[idx] += 1.0;
  }
  const double n = static_cast<double>(data.rows());
  for (double& c : counts) c /= n;
  return SubsetMoment(std::vector<VarId>(ids.begin(), ids.end()), std::move(counts));
}

std::vector<SubsetMoment> empirical_moments(const BinaryDataset& data, std::span<const std::vector<VarId>> subsets) {
  std::vector<SubsetMoment> out;
  out.reserve(subsets.size());
  for (const auto& s : subsets) out.push_back(empirical_moment(data, s));
  return out;
}

MomentSet empirical_moment_set(const BinaryDataset& data, LayoutPtr layout) {
  if (data.rows() == 0) throw InvalidArgument("empirical moments need a non-empty dataset");
  for (VarId id : layout->vars())
    if (id >= data.n_observed()) throw InvalidArgument("empirical moment id " + std::to_string(id) + " is not observed");
  std::vector<double> values(layout->dimension(), 0.0);
  std::vector<std::uint8_t> y(layout->vars().size());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.observed(r);
    for (std::size_t p = 0; p < y.size(); ++p) y[p] = x[layout->vars()[p]];
    for (std::size_t k = 0; k < layout->subset_count(); ++k) values[layout->offset(k) + subset_index(*layout, k, y)] += 1.0;
  }
  const double n = static_cast<double>(data.rows());
  for (double& v : values) v /= n;
  return MomentSet(std::move(layout), std::move(values));
}

MomentSet population_moment_set(const ExactOracle& oracle, LayoutPtr layout) {
  // One enumeration over the full layout, then marginalize per subset.
  const SubsetMoment joint = oracle.marginal(layout->vars());
  std::vector<double> values(layout->dimension(), 0.0);
  std::vector<std::uint8_t> y(layout->vars().size());
  for (std::size_t code = 0; code < joint.size(); ++code) {
    const double p = joint[code];
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = static_cast<std::uint8_t>(code >> t & 1U);
    for (std::size_t k = 0; k < layout->subset_count(); ++k) values[layout->offset(k) + subset_index(*layout, k, y)] += p;
  }
  return MomentSet(std::move(layout), std::move(values));
}

// --------------------------------------------------------------- MixingMatrix

MixingMatrix::MixingMatrix(std::vector<VarId> ids, std::vector<VarId> sources,
                           std::vector<AnchorConditional> conditionals)
    : ids_(std::move(ids)), sources_(std::move(sources)), conds_(std::move(conditionals)) {
  if (ids_.empty()) throw InvalidArgument("mixing matrix needs at least one variable");
  if (sources_.size() != ids_.size() || conds_.size() != ids_.size()) {
    throw InvalidArgument("mixing matrix: one source and conditional per variable");
  }
  std::vector<VarId> s(sources_);
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw InvalidArgument("mixing matrix sources must be distinct");
}

double MixingMatrix::entry(std::size_t a, std::size_t z) const {
  double p = 1.0;
  for (std::size_t t = 0; t < conds_.size(); ++t)
    p *= conds_[t].prob(static_cast<int>(a >> t & 1U), static_cast<int>(z >> t & 1U));
  return p;
}

std::vector<double> MixingMatrix::apply(std::span<const double> mu) const {
  if (mu.size() != dimension()) throw InvalidArgument("mixing matrix applied to a vector of the wrong size");
  std::vector<double> v(mu.begin(), mu.end());
  for (std::size_t t = 0; t < conds_.size(); ++t) {
    const std::size_t bit = std::size_t{1} << t;
    const auto& c = conds_[t];
    const double c00 = c.prob(0, 0), c01 = c.prob(0, 1), c10 = c.prob(1, 0), c11 = c.prob(1, 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i & bit) continue;
      const double v0 = v[i], v1 = v[i | bit];
      v[i] = c00 * v0 + c01 * v1;
      v[i | bit] = c10 * v0 + c11 * v1;
    }
  }
  return v;
}

std::vector<double> MixingMatrix::apply_transpose(std::span<const double> w) const {
  if (w.size() != dimension()) throw InvalidArgument("mixing matrix applied to a vector of the wrong size");
  std::vector<double> v(w.begin(), w.end());
  for (std::size_t t = 0; t < conds_.size(); ++t) {
    const std::size_t bit = std::size_t{1} << t;
    const auto& c = conds_[t];
    const double c00 = c.prob(0, 0), c01 = c.prob(0, 1), c10 = c.prob(1, 0), c11 = c.prob(1, 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i & bit) continue;
      const double v0 = v[i], v1 = v[i | bit];
      v[i] = c00 * v0 + c10 * v1;
      v[i | bit] = c01 * v0 + c11 * v1;
    }
  }
  return v;
}

double MixingMatrix::determinant() const {
  const double power = static_cast<double>(dimension() / 2);
  double det = 1.0;
  for (const auto& c : conds_) det *= std::pow(c.p1_given_1 - c.p1_given_0, power);
  return det;
}

std::vector<std::vector<double>> MixingMatrix::dense() const {
  const std::size_t d = dimension();
  std::vector<std::vector<double>> out(d, std::vector<double>(d));
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t z = 0; z < d; ++z) out[a][z] = entry(a, z);
  return out;
}

MixingMatrix build_mixing(const AnchorMap& anchors, const VariableSpace& space, std::span<const VarId> ids) {
  std::vector<VarId> sources;
  std::vector<AnchorConditional> conds;
  for (VarId id : ids) {
    if (space.is_latent(id)) {
      const std::size_t i = space.latent_index(id);
      if (i >= anchors.size()) throw InvalidArgument("latent " + space.name_of(id) + " has no anchor");
      const auto& c = anchors.conditional(i);
      if (std::abs(c.p1_given_1 - c.p1_given_0) < 1e-12) {
        throw ConditioningError("anchor conditional for latent " + space.name_of(id) + " is degenerate");
      }
      sources.push_back(static_cast<VarId>(anchors.anchor_of(i)));
      conds.push_back(c);
    } else if (space.is_observed(id)) {
      sources.push_back(id);
      conds.push_back(AnchorConditional{1.0, 0.0});
    } else {
      throw InvalidArgument("variable id " + std::to_string(id) + " out of range");
    }
  }
  if (!std::is_sorted(ids.begin(), ids.end()) || std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw InvalidArgument("mixing matrix ids must be sorted and unique");
  }
  return MixingMatrix(std::vector<VarId>(ids.begin(), ids.end()), std::move(sources), std::move(conds));
}

std::vector<VarId> source_ids(const AnchorMap& anchors, const VariableSpace& space, std::span<const VarId> targets) {
  std::vector<VarId> out;
  for (VarId id : targets) {
    if (space.is_latent(id)) {
      out.push_back(static_cast<VarId>(anchors.anchor_of(space.latent_index(id))));
    } else if (space.is_observed(id)) {
      out.push_back(id);
    } else {
      throw InvalidArgument("variable id " + std::to_string(id) + " out of range");
    }
  }
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw InvalidArgument("targets share a source column");
  return out;
}

std::vector<double> aligned_source_table(const SubsetMoment& source_moment, const MixingMatrix& R) {
  return source_moment.reordered(R.sources());
}

// ------------------------------------------------------------------ config

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::kSimplex: return "simplex";
    case Constraint::kLocal: return "local";
    case Constraint::kMarginal: return "marginal";
  }
  return "?";
}

Constraint constraint_from_string(const std::string& s) {
  if (s == "simplex") return Constraint::kSimplex;
  if (s == "local") return Constraint::kLocal;
  if (s == "marginal") return Constraint::kMarginal;
  throw InvalidArgument("unknown constraint family '" + s + "'");
}

std::string to_string(StepRule r) { return r == StepRule::kLineSearch ? "line-search" : "harmonic"; }

StepRule step_rule_from_string(const std::string& s) {
  if (s == "line-search") return StepRule::kLineSearch;
  if (s == "harmonic") return StepRule::kHarmonic;
  throw InvalidArgument("unknown step rule '" + s + "'");
}

void RecoveryConfig::validate() const {
  if (!(gap_tol > 0.0)) throw InvalidArgument("gap_tol must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be nonnegative");
  if (!(epsilon_clamp > 0.0)) throw InvalidArgument("epsilon_clamp must be positive");
  if (max_iters == 0) throw InvalidArgument("max_iters must be positive");
}

// ------------------------------------------------------------ simplex recovery

SimplexRecovery recover_simplex(const SubsetMoment& source_moment, const MixingMatrix& R,
                                const RecoveryConfig& config, std::span<const double> indep) {
  config.validate();
  const std::size_t d = R.dimension();
  if (source_moment.size() != d) throw InvalidArgument("anchor moment and mixing matrix dimensions differ");
  if (config.lambda > 0.0 && indep.size() != d) throw InvalidArgument("lambda > 0 needs an independence table");
  const std::vector<double> a = aligned_source_table(source_moment, R);
  const double eps = config.epsilon_clamp;
  const double lambda = config.lambda;

  auto objective = [&](std::span<const double> mu, std::span<double> grad) {
    const std::vector<double> rm = R.apply(mu);
    std::vector<double> ratio(d);
    for (std::size_t i = 0; i < d; ++i) ratio[i] = a[i] / std::max(rm[i], eps);
    const std::vector<double> back = R.apply_transpose(ratio);
    double f = kl_divergence(a, rm, eps);
    for (std::size_t i = 0; i < d; ++i) grad[i] = -back[i];
    if (lambda > 0.0) {
      f += lambda * kl_divergence(indep, mu, eps);
      for (std::size_t i = 0; i < d; ++i) grad[i] -= lambda * indep[i] / std::max(mu[i], eps);
    }
    return f;
  };
  SimplexOptions opts;
  opts.gap_tol = config.simplex_gap_tol;
  opts.max_iters = config.simplex_max_iters;
  SimplexResult res = minimize_on_simplex(objective, std::vector<double>(d, 1.0 / static_cast<double>(d)), opts);
  return SimplexRecovery{SubsetMoment(R.ids(), std::move(res.x)), res.objective, res.iterations, res.converged};
}

SubsetMoment independent_marginal_vector(std::span<const SubsetMoment> singletons, std::span<const VarId> ids) {
  std::vector<double> p1;
  for (VarId id : ids) {
    auto it = std::find_if(singletons.begin(), singletons.end(),
                           [&](const SubsetMoment& s) { return s.arity() == 1 && s.ids()[0] == id; });
    if (it == singletons.end()) throw InvalidArgument("missing singleton moment for id " + std::to_string(id));
    const double total = (*it)[0] + (*it)[1];
    p1.push_back(total > 0.0 ? (*it)[1] / total : 0.5);
  }
  std::vector<double> table(std::size_t{1} << ids.size(), 1.0);
  for (std::size_t idx = 0; idx < table.size(); ++idx)
    for (std::size_t t = 0; t < p1.size(); ++t) table[idx] *= (idx >> t & 1U) ? p1[t] : 1.0 - p1[t];
  return SubsetMoment(std::vector<VarId>(ids.begin(), ids.end()), std::move(table));
}

// ------------------------------------------------------------ linear oracles

std::vector<double> indicator_point(const MomentLayout& layout, std::span<const std::uint8_t> y) {
  std::vector<double> point(layout.dimension(), 0.0);
  for (std::size_t k = 0; k < layout.subset_count(); ++k) point[layout.offset(k) + subset_index(layout, k, y)] = 1.0;
  return point;
}

std::vector<double> uniform_point(const MomentLayout& layout) {
  std::vector<double> point(layout.dimension());
  for (std::size_t k = 0; k < layout.subset_count(); ++k) {
    const double v = 1.0 / static_cast<double>(layout.table_size(k));
    std::fill_n(point.begin() + static_cast<std::ptrdiff_t>(layout.offset(k)), layout.table_size(k), v);
  }
  return point;
}

OracleResult linear_oracle_marginal(const MomentLayout& layout, std::span<const double> gradient) {
  const std::size_t m = layout.vars().size();
  if (m > kMaxEnumeratedLatents) throw CapacityError("marginal oracle enumerates at most 22 variables");
  if (gradient.size() != layout.dimension()) throw InvalidArgument("gradient does not match the moment layout");
  std::vector<std::uint8_t> y(m), best_y(m);
  double best = std::numeric_limits<double>::infinity();
  const std::size_t total = std::size_t{1} << m;
  for (std::size_t code = 0; code < total; ++code) {
    // y_0 is the most significant digit, so codes run in lexicographic order.
    for (std::size_t p = 0; p < m; ++p) y[p] = static_cast<std::uint8_t>(code >> (m - 1 - p) & 1U);
    double score = 0.0;
    for (std::size_t k = 0; k < layout.subset_count(); ++k) score += gradient[layout.offset(k) + subset_index(layout, k, y)];
    if (score < best) {
      best = score;
      best_y = y;
    }
  }
  OracleResult out;
  out.point = indicator_point(layout, best_y);
  out.value = best;
  out.assignment = std::move(best_y);
  return out;
}

LinearProgram local_polytope_program(const MomentLayout& layout) {
  LinearProgram lp;
  lp.n_vars = layout.dimension();
  for (std::size_t k = 0; k < layout.subset_count(); ++k) {
    const auto& ids = layout.subset(k);
    const std::size_t off = layout.offset(k);
    if (ids.size() == 1) {
      std::vector<double> row(lp.n_vars, 0.0);
      row[off] = row[off + 1] = 1.0;
      lp.rows.push_back(std::move(row));
      lp.rhs.push_back(1.0);
      continue;
    }
    for (std::size_t drop = 0; drop < ids.size(); ++drop) {
      std::vector<VarId> sub;
      for (std::size_t t = 0; t < ids.size(); ++t)
        if (t != drop) sub.push_back(ids[t]);
      const std::size_t sub_off = layout.offset(layout.index_of(sub));
      for (std::size_t u = 0; u < (std::size_t{1} << sub.size()); ++u) {
        std::vector<double> row(lp.n_vars, 0.0);
        // Insert both values of the dropped bit into u.
        const std::size_t low = u & ((std::size_t{1} << drop) - 1);
        const std::size_t high = (u >> drop) << (drop + 1);
        row[off + (high | low)] = 1.0;
        row[off + (high | low | (std::size_t{1} << drop))] = 1.0;
        row[sub_off + u] = -1.0;
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(0.0);
      }
    }
  }
  return lp;
}

OracleResult linear_oracle_local(const MomentLayout& layout, std::span<const double> gradient) {
  if (gradient.size() != layout.dimension()) throw InvalidArgument("gradient does not match the moment layout");
  LinearProgram lp = local_polytope_program(layout);
  lp.cost.assign(gradient.begin(), gradient.end());
  LpSolution sol = solve_lp(lp);
  OracleResult out;
  out.point = std::move(sol.x);
  out.value = 0.0;
  for (std::size_t i = 0; i < out.point.size(); ++i) out.value += gradient[i] * out.point[i];
  return out;
}

}  // namespace adfa
