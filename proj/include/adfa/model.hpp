#ifndef ADFA_MODEL_HPP_
#define ADFA_MODEL_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adfa {

// Global variable ids.  Observed variable j has id j and latent variable i has
// id n_observed + i, so observed ids always sort before latent ids.  Every
// probability table over a variable subset Z is indexed with bit t (least
// significant first) holding the value of the t-th smallest id in Z.
using VarId = std::uint32_t;

// A binary assignment, one byte (0 or 1) per variable.
using Assignment = std::vector<std::uint8_t>;

// Partially specified latent assignment: nullopt marks a free variable.
using PartialAssignment = std::vector<std::optional<bool>>;

class VariableSpace {
 public:
  VariableSpace(std::size_t n_observed, std::size_t m_latent);
  VariableSpace(std::vector<std::string> observed_names,
                std::vector<std::string> latent_names);

  std::size_t n_observed() const { return observed_names_.size(); }
  std::size_t m_latent() const { return latent_names_.size(); }
  std::size_t total() const { return n_observed() + m_latent(); }

  VarId observed_id(std::size_t j) const;
  VarId latent_id(std::size_t i) const;
  bool is_observed(VarId id) const { return id < n_observed(); }
  bool is_latent(VarId id) const { return id >= n_observed() && id < total(); }
  std::size_t observed_index(VarId id) const;
  std::size_t latent_index(VarId id) const;

  const std::vector<std::string>& observed_names() const { return observed_names_; }
  const std::vector<std::string>& latent_names() const { return latent_names_; }
  std::optional<std::size_t> find_latent(const std::string& name) const;
  std::string name_of(VarId id) const;

  bool operator==(const VariableSpace&) const = default;

 private:
  void validate() const;

  std::vector<std::string> observed_names_;
  std::vector<std::string> latent_names_;
};

// Bayesian network over the m binary latents.  Parents are stored as sorted
// latent indices; cpt(i)[c] = {P(y_i=0|pa=c), P(y_i=1|pa=c)} where bit t of c
// carries the value of the t-th parent.
class LatentNetwork {
 public:
  using CptRow = std::array<double, 2>;

  LatentNetwork(std::vector<std::vector<std::size_t>> parents,
                std::vector<std::vector<CptRow>> cpts);

  // Latents with no parents and the given P(y_i = 1).
  static LatentNetwork independent(std::span<const double> p_one);

  std::size_t size() const { return parents_.size(); }
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_[i]; }
  const std::vector<std::vector<std::size_t>>& all_parents() const { return parents_; }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_[i]; }
  const std::vector<CptRow>& cpt(std::size_t i) const { return cpts_[i]; }
  const std::vector<std::vector<CptRow>>& cpts() const { return cpts_; }

  // Parents come before children.
  const std::vector<std::size_t>& topological_order() const { return order_; }

  std::size_t parent_config(std::size_t i, std::span<const std::uint8_t> y) const;
  double conditional(std::size_t i, std::span<const std::uint8_t> y) const;
  double prob(std::span<const std::uint8_t> y) const;
  double log_prob(std::span<const std::uint8_t> y, double floor = 0.0) const;

  bool has_edges() const;
  // Every node has at most one parent, so the skeleton is a forest and the
  // network has no v-structures.
  bool is_forest() const;
  std::size_t max_indegree() const;

  bool operator==(const LatentNetwork& other) const {
    return parents_ == other.parents_ && cpts_ == other.cpts_;
  }

 private:
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<CptRow>> cpts_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> order_;
};

// Noisy-or link from latents to observations:
//   P(x_j = 0 | y) = (1 - l_j) * prod_i f_{i,j}^{y_i}.
// An edge i -> j exists exactly when f_{i,j} < 1.
class NoisyOrLoadings {
 public:
  // No edges, no leak.
  NoisyOrLoadings(std::size_t m_latent, std::size_t n_observed);
  // failures is row-major m x n.
  NoisyOrLoadings(std::size_t m_latent, std::size_t n_observed,
                  std::vector<double> failures, std::vector<double> leaks);

  std::size_t m_latent() const { return m_; }
  std::size_t n_observed() const { return n_; }

  double failure(std::size_t i, std::size_t j) const { return failures_[i * n_ + j]; }
  double leak(std::size_t j) const { return leaks_[j]; }
  bool has_edge(std::size_t i, std::size_t j) const { return failure(i, j) < 1.0; }
  void set_failure(std::size_t i, std::size_t j, double f);
  void set_leak(std::size_t j, double l);

  std::vector<double> failure_column(std::size_t j) const;
  std::vector<std::size_t> parents_of(std::size_t j) const;
  std::vector<std::vector<bool>> edge_mask() const;

  // (1 - l_j) * prod_i f_{i,j}^{y_i}
  double negative_prob(std::size_t j, std::span<const std::uint8_t> y) const;

  const std::vector<double>& failures() const { return failures_; }
  const std::vector<double>& leaks() const { return leaks_; }

  bool operator==(const NoisyOrLoadings&) const = default;

 private:
  std::size_t m_;
  std::size_t n_;
  std::vector<double> failures_;
  std::vector<double> leaks_;
};

// P(A = a | Y = y) for a binary anchor.
struct AnchorConditional {
  double p1_given_1 = 1.0;  // P(A=1 | Y=1)
  double p1_given_0 = 0.0;  // P(A=1 | Y=0)

  double prob(int a, int y) const {
    const double p1 = y ? p1_given_1 : p1_given_0;
    return a ? p1 : 1.0 - p1;
  }
  bool operator==(const AnchorConditional&) const = default;
};

// Anchors are ordinary noisy-or children with a single latent parent, so the
// conditional implied by column j of the loadings is
//   P(A=0|Y=1) = (1-l_j) f,   P(A=0|Y=0) = 1 - l_j.
AnchorConditional anchor_conditional_from_loadings(double failure, double leak);

class AnchorMap {
 public:
  AnchorMap(std::vector<std::size_t> anchor_of,
            std::vector<AnchorConditional> conditionals);

  // Derives each conditional from the anchor's loadings column.
  static AnchorMap from_loadings(const NoisyOrLoadings& loadings,
                                 std::vector<std::size_t> anchor_of);

  std::size_t size() const { return anchor_of_.size(); }
  std::size_t anchor_of(std::size_t i) const { return anchor_of_[i]; }
  const std::vector<std::size_t>& anchors() const { return anchor_of_; }
  const AnchorConditional& conditional(std::size_t i) const { return conditionals_[i]; }
  const std::vector<AnchorConditional>& conditionals() const { return conditionals_; }
  std::optional<std::size_t> latent_of_observed(std::size_t j) const;

  bool operator==(const AnchorMap&) const = default;

 private:
  std::vector<std::size_t> anchor_of_;
  std::vector<AnchorConditional> conditionals_;
};

// Latent Bayesian network plus noisy-or loadings plus anchors; defines the
// full joint P(X, Y).
class AdfaModel {
 public:
  AdfaModel(VariableSpace space, LatentNetwork latent, NoisyOrLoadings loadings,
            AnchorMap anchors);

  const VariableSpace& space() const { return space_; }
  const LatentNetwork& latent() const { return latent_; }
  const NoisyOrLoadings& loadings() const { return loadings_; }
  const AnchorMap& anchors() const { return anchors_; }

  std::size_t n_observed() const { return space_.n_observed(); }
  std::size_t m_latent() const { return space_.m_latent(); }

  bool operator==(const AdfaModel&) const = default;

 private:
  VariableSpace space_;
  LatentNetwork latent_;
  NoisyOrLoadings loadings_;
  AnchorMap anchors_;
};

// N rows of binary observations, optionally paired with latent rows.  Latent
// entries are 0, 1 or kUnlabeled (partially labeled data).
class BinaryDataset {
 public:
  static constexpr std::int8_t kUnlabeled = -1;

  BinaryDataset(std::size_t n_observed, std::vector<std::uint8_t> observed);
  BinaryDataset(std::size_t n_observed, std::vector<std::uint8_t> observed,
                std::size_t m_latent, std::vector<std::int8_t> latent);

  std::size_t rows() const { return rows_; }
  std::size_t n_observed() const { return n_; }
  std::size_t m_latent() const { return m_; }
  bool has_latent() const { return m_ > 0; }

  std::span<const std::uint8_t> observed(std::size_t r) const {
    return {observed_.data() + r * n_, n_};
  }
  std::span<const std::int8_t> latent(std::size_t r) const {
    return {latent_.data() + r * m_, m_};
  }
  // Row r's latent labels as an assignment; throws if any is unlabeled.
  Assignment latent_assignment(std::size_t r) const;
  bool fully_labeled() const;

  // Rows [begin, end).
  BinaryDataset slice(std::size_t begin, std::size_t end) const;

  const std::vector<std::uint8_t>& observed_data() const { return observed_; }
  const std::vector<std::int8_t>& latent_data() const { return latent_; }

  bool operator==(const BinaryDataset&) const = default;

 private:
  std::size_t n_;
  std::size_t m_ = 0;
  std::size_t rows_ = 0;
  std::vector<std::uint8_t> observed_;
  std::vector<std::int8_t> latent_;
};

}  // namespace adfa

#endif  // ADFA_MODEL_HPP_
