#ifndef ADFA_INFERENCE_HPP_
#define ADFA_INFERENCE_HPP_

#include <span>
#include <vector>

#include "adfa/model.hpp"
#include "adfa/moment.hpp"

namespace adfa {

// Largest latent count handled by brute-force enumeration.
inline constexpr std::size_t kMaxEnumeratedLatents = 22;

// P(y) * prod_j P(x_j | y).
double joint_prob(const AdfaModel& model, std::span<const std::uint8_t> y, std::span<const std::uint8_t> x);

// Enumerates the 2^m latent states once and answers exact marginal queries
// over any mix of latent and observed variables.  This is the ground-truth
// oracle that the rest of the test suite is checked against.
class ExactOracle {
 public:
  explicit ExactOracle(const AdfaModel& model);

  SubsetMoment marginal(std::span<const VarId> ids) const;
  // P(y) for the latent state whose bit i is y_i.
  double latent_prob(std::size_t code) const { return prior_[code]; }

  const AdfaModel& model() const { return model_; }

 private:
  const AdfaModel& model_;
  std::vector<double> prior_;
};

SubsetMoment exact_marginal(const AdfaModel& model, std::span<const VarId> ids);

// Decodes latent state `code` (bit i = y_i) into an assignment.
Assignment decode_latents(std::size_t code, std::size_t m);

// Quickscore: prod_i (P(y_i=0) + P(y_i=1) f_{i,j}), times (1 - l_j) if requested.
// Valid only for networks without edges.
double quickscore_negative(const LatentNetwork& latent, std::span<const double> failures, double leak,
                           bool include_leak);
double quickscore_negative(const AdfaModel& model, std::size_t j, bool include_leak);

// P(x_j = 0 | conditioning) by one upward message pass over a forest-shaped
// latent network.  failures holds f_{i,j} for every latent i.
double tree_negative_prob(const LatentNetwork& latent, std::span<const double> failures, double leak,
                          const PartialAssignment& conditioning);
double tree_negative_prob(const AdfaModel& model, std::size_t j, const PartialAssignment& conditioning);

// Probability of the partial assignment under a forest-shaped network.
double tree_evidence_prob(const LatentNetwork& latent, const PartialAssignment& conditioning);

}  // namespace adfa

#endif  // ADFA_INFERENCE_HPP_
