#ifndef ADFA_STRUCTURE_HPP_
#define ADFA_STRUCTURE_HPP_

#include <span>
#include <string>
#include <vector>

#include "adfa/model.hpp"
#include "adfa/moment.hpp"

namespace adfa {

// Parent sets are positions into the moment set's vars (for latent moment sets
// over all latents, positions coincide with latent indices).
using ParentSets = std::vector<std::vector<std::size_t>>;

struct ScoredStructure {
  ParentSets parents;
  double score = 0.0;
  std::vector<double> family_scores;

  bool operator==(const ScoredStructure&) const = default;
};

// -sum p log p, 0 log 0 = 0, nats.  Negative entries count as zero.
double entropy(std::span<const double> table);
double entropy(const SubsetMoment& moment);

// I(var; rest) = H(var) + H(rest) - H(var, rest) within one joint table.
double mutual_information(const SubsetMoment& joint, VarId var);

// N I(Y_i; Y_Pa) - N H(Y_i) - log(N) 2^|Pa|.  I comes from the family table,
// H from the singleton table.
double family_score(const MomentSet& moments, std::size_t i, std::span<const std::size_t> parents, double n_samples);

ScoredStructure bic_score(const MomentSet& moments, const ParentSets& parents, double n_samples);

enum class ChowLiuMode {
  kSpanningTree,  // maximum-MI spanning tree over all latents
  kBicForest,     // keep only edges whose BIC gain N I - log N is positive
};

// Kruskal on pairwise MI with ties broken by (weight desc, smaller id pair);
// weights below 1e-12 are snapped to zero.  Each component is rooted at its
// lowest position and oriented away from the root.
ScoredStructure chow_liu(const MomentSet& moments, double n_samples, ChowLiuMode mode = ChowLiuMode::kSpanningTree);

inline constexpr std::size_t kMaxExactSearchVars = 16;

// Globally BIC-optimal DAG with at most max_indegree parents per node.
ScoredStructure exact_search(const MomentSet& moments, double n_samples, std::size_t max_indegree);

// CPTs P(y_i | y_Pa) = mu_family / mu_Pa after clamping negatives to zero.
LatentNetwork fit_cpts(const MomentSet& moments, const ParentSets& parents);

bool is_acyclic(const ParentSets& parents);
// Same skeleton and same v-structures.
bool markov_equivalent(const ParentSets& a, const ParentSets& b);
// Undirected edges {min, max}, sorted.
std::vector<std::pair<std::size_t, std::size_t>> skeleton(const ParentSets& parents);

// One line per edge: parent, child, mutual information, and the sign of the
// pairwise covariance, tab separated.
std::string export_edges(const ScoredStructure& structure, const MomentSet& moments,
                         std::span<const std::string> names);

}  // namespace adfa

#endif  // ADFA_STRUCTURE_HPP_
