#ifndef ADFA_MOMENTS_HPP_
#define ADFA_MOMENTS_HPP_

#include <span>
#include <string>
#include <vector>

#include "adfa/model.hpp"
#include "adfa/moment.hpp"

namespace adfa {

class ExactOracle;

// Frequency tables of the given observed-id subsets (each sorted).
std::vector<SubsetMoment> empirical_moments(const BinaryDataset& data, std::span<const std::vector<VarId>> subsets);
SubsetMoment empirical_moment(const BinaryDataset& data, std::span<const VarId> ids);
// Every table of `layout` (observed ids only) from counts.
MomentSet empirical_moment_set(const BinaryDataset& data, LayoutPtr layout);
// Every table of `layout` from exact enumeration; ids may be latent or observed.
MomentSet population_moment_set(const ExactOracle& oracle, LayoutPtr layout);

// R_Z = kron of per-variable 2x2 conditionals C_t[a][z] = P(source_t = a | target_t = z).
// Latent targets are measured through their anchor; observed targets measure
// themselves with the identity conditional.
class MixingMatrix {
 public:
  MixingMatrix(std::vector<VarId> ids, std::vector<VarId> sources, std::vector<AnchorConditional> conditionals);

  const std::vector<VarId>& ids() const { return ids_; }
  // Observed column measured for each target, in target order.
  const std::vector<VarId>& sources() const { return sources_; }
  const std::vector<AnchorConditional>& conditionals() const { return conds_; }
  std::size_t dimension() const { return std::size_t{1} << ids_.size(); }

  double entry(std::size_t a, std::size_t z) const;
  std::vector<double> apply(std::span<const double> mu) const;
  std::vector<double> apply_transpose(std::span<const double> v) const;
  // det(A (x) B) = det(A)^dim(B) det(B)^dim(A), applied factor by factor.
  double determinant() const;
  std::vector<std::vector<double>> dense() const;

 private:
  std::vector<VarId> ids_;
  std::vector<VarId> sources_;
  std::vector<AnchorConditional> conds_;
};

MixingMatrix build_mixing(const AnchorMap& anchors, const VariableSpace& space, std::span<const VarId> ids);

// The source table over sources(R), re-indexed so bit t carries source t.
std::vector<double> aligned_source_table(const SubsetMoment& source_moment, const MixingMatrix& R);

enum class Constraint { kSimplex, kLocal, kMarginal };
enum class StepRule { kLineSearch, kHarmonic };

std::string to_string(Constraint c);
Constraint constraint_from_string(const std::string& s);
std::string to_string(StepRule r);
StepRule step_rule_from_string(const std::string& s);

struct RecoveryConfig {
  Constraint constraint = Constraint::kMarginal;
  double lambda = 0.0;
  double gap_tol = 1e-4;
  std::size_t max_iters = 2000;
  StepRule step_rule = StepRule::kLineSearch;
  double epsilon_clamp = 1e-12;
  // Inner exponentiated-gradient solver used by simplex recovery.
  double simplex_gap_tol = 1e-12;
  std::size_t simplex_max_iters = 20000;
  // Fully-corrective weight re-optimization.
  std::size_t corrective_iters = 200;

  void validate() const;
};

struct SimplexRecovery {
  SubsetMoment moment;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// argmin over the simplex of KL(mu_A || R mu) + lambda KL(mu_indep || mu).
// source_moment is the observed table over R.sources() (any id order);
// indep is required when lambda > 0 and is indexed like the output.
SimplexRecovery recover_simplex(const SubsetMoment& source_moment, const MixingMatrix& R,
                                const RecoveryConfig& config, std::span<const double> indep = {});

// Product of the singleton marginals over ids.
SubsetMoment independent_marginal_vector(std::span<const SubsetMoment> singletons, std::span<const VarId> ids);

// Vertex of the marginal polytope minimizing <gradient, indicator(y)>; ties go
// to the lexicographically smallest y (y over layout vars in order).
struct OracleResult {
  std::vector<double> point;
  double value = 0.0;
  Assignment assignment;  // marginal oracle only
};
OracleResult linear_oracle_marginal(const MomentLayout& layout, std::span<const double> gradient);
// Minimizer over the local consistency polytope of the same layout.
OracleResult linear_oracle_local(const MomentLayout& layout, std::span<const double> gradient);
// Equality system of the local polytope: singleton tables sum to one and every
// table of size >= 2 marginalizes onto each sub-table one smaller.  Costs left
// empty.
struct LinearProgram;
LinearProgram local_polytope_program(const MomentLayout& layout);
// Indicator vector of one joint assignment over the layout's vars.
std::vector<double> indicator_point(const MomentLayout& layout, std::span<const std::uint8_t> y);
// Every table uniform.
std::vector<double> uniform_point(const MomentLayout& layout);

struct PolytopeRecovery {
  MomentSet moments;
  std::vector<double> objective_trace;
  double gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Fully-corrective conditional gradient for
//   sum_Z KL(mu_{A_Z} || R_Z mu_Z) + lambda sum_Z KL(mu_indep,Z || mu_Z)
// over the local or marginal polytope.  target_layout lists target ids (latent
// or observed); source_moments must contain the table over sources(Z) for
// every Z.  indep (flat over target_layout) is required when lambda > 0.
PolytopeRecovery recover_polytope(const MomentSet& source_moments, LayoutPtr target_layout, const AnchorMap& anchors,
                                  const VariableSpace& space, const RecoveryConfig& config,
                                  std::span<const double> indep = {});

struct RecoveredMoments {
  MomentSet moments;
  bool converged = true;
  std::vector<double> objective_trace;  // polytope constraints only
};

// Recovers latent moments of every subset of size <= K of `targets` from
// observed source moments, using the configured constraint.  Singletons are
// recovered first by simplex with lambda = 0 and supply mu_indep.
RecoveredMoments recover_moments(const MomentSet& source_moments, std::span<const VarId> targets, std::size_t order,
                                 const AnchorMap& anchors, const VariableSpace& space, const RecoveryConfig& config,
                                 std::size_t threads = 1);

// Observed ids measured for `targets`, sorted.
std::vector<VarId> source_ids(const AnchorMap& anchors, const VariableSpace& space, std::span<const VarId> targets);

}  // namespace adfa

#endif  // ADFA_MOMENTS_HPP_
