#ifndef ADFA_EVALEM_HPP_
#define ADFA_EVALEM_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adfa/model.hpp"

namespace adfa {

// Enumerates latent states once per model and scores observation rows
// against every state, using cached log P(y) and log P(x_j=0|y) tables.
class PosteriorEngine {
 public:
  explicit PosteriorEngine(const AdfaModel& model);

  // P(y_i = 1 | x, evidence) for every latent.  evidence clamps latents.
  std::vector<double> posterior(std::span<const std::uint8_t> x, const PartialAssignment& evidence = {}) const;
  // log P(x, evidence).
  double log_evidence(std::span<const std::uint8_t> x, const PartialAssignment& evidence = {}) const;

 private:
  std::vector<double> state_scores(std::span<const std::uint8_t> x, const PartialAssignment& evidence,
                                   double& log_norm) const;

  std::size_t m_, n_;
  std::vector<double> log_prior_;
  std::vector<double> log_neg_;  // [code * n + j] = log P(x_j=0|y)
  std::vector<double> log_pos_;  // log P(x_j=1|y)
};

std::vector<double> posterior_exact(const AdfaModel& model, std::span<const std::uint8_t> x);

// Single-site Gibbs over the latents given x.  `sweeps` counts every full
// pass including burn-in; marginals average the post-burn-in passes.
std::vector<double> gibbs_posterior(const AdfaModel& model, std::span<const std::uint8_t> x, std::size_t sweeps,
                                    std::size_t burn_in, std::uint64_t seed);

// Runs a chain and returns `keep` states spread evenly over the post-burn-in sweeps.
std::vector<Assignment> gibbs_samples(const AdfaModel& model, std::span<const std::uint8_t> x, std::size_t burn_in,
                                      std::size_t sweeps, std::size_t keep, std::uint64_t seed);

inline constexpr double kLogLikFloor = 1e-12;

// Mean over rows of log P(y) with each factor floored at 1e-12.
double heldout_latent_loglik(const LatentNetwork& latent, const BinaryDataset& labels);

// Candidates (latents not revealed) ranked by P(y_c = 1 | revealed = 1, x),
// descending, ties by latent index.
std::vector<std::size_t> last_tag_rank(const PosteriorEngine& engine, std::size_t m, std::span<const std::uint8_t> x,
                                       std::span<const std::size_t> revealed);

struct LastTagReport {
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  double accuracy() const { return evaluated ? static_cast<double>(correct) / static_cast<double>(evaluated) : 0.0; }
};

// Over the rows with at least two positive tags, withholds one positive tag
// chosen by a seeded draw, reveals the rest, and checks whether the withheld
// tag ranks first.
LastTagReport last_tag_accuracy(const AdfaModel& model, const BinaryDataset& data, std::uint64_t seed,
                                std::size_t threads = 1);

// Auxiliary-variable view of one noisy-or column: slot k < m is latent k,
// slot m the always-on leak, slot m + 1 "nothing fired".
// P(A = k | y) = prod_{active i < k} f_i * (1 - f_k) over active slots, and
// P(A = m + 1 | y) = P(x = 0 | y).
std::vector<double> aux_distribution(std::span<const double> failures, double leak, std::span<const std::uint8_t> y);

// Per observed variable: expected firings and expected trials of each slot.
struct AuxCounts {
  std::size_t m = 0, n = 0;
  std::vector<double> fired;  // [j * (m + 2) + k]
  std::vector<double> tried;  // [j * (m + 1) + k]: slot k active and reached

  AuxCounts(std::size_t m_latent, std::size_t n_observed);
  double& fired_at(std::size_t j, std::size_t k) { return fired[j * (m + 2) + k]; }
  double& tried_at(std::size_t j, std::size_t k) { return tried[j * (m + 1) + k]; }
  double fired_at(std::size_t j, std::size_t k) const { return fired[j * (m + 2) + k]; }
  double tried_at(std::size_t j, std::size_t k) const { return tried[j * (m + 1) + k]; }
};

// Inner E-step: responsibilities of each slot for every (x, y-sample) pair.
AuxCounts accumulate_aux_counts(const NoisyOrLoadings& loadings, const BinaryDataset& data,
                                const std::vector<std::vector<Assignment>>& samples);

// 1 - fired / tried.
double failure_from_counts(double fired, double tried);

// Inner M-step; (k, j) pairs with no trials keep their value.
NoisyOrLoadings apply_aux_counts(const NoisyOrLoadings& loadings, const AuxCounts& counts);

// sum over rows and samples of log P(x | y).
double complete_data_loglik(const NoisyOrLoadings& loadings, const BinaryDataset& data,
                            const std::vector<std::vector<Assignment>>& samples);

struct EmOptions {
  std::size_t outer_steps = 5;
  std::size_t burn_in = 10;
  std::size_t sweeps = 20;
  std::size_t samples = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct EmStep {
  double loglik_before = 0.0;  // complete-data log-likelihood on this step's samples
  double loglik_after = 0.0;
  double max_change = 0.0;     // largest parameter move
};

struct EmResult {
  AdfaModel model;
  std::vector<EmStep> trace;
};

// Monte-Carlo EM on failures and leaks with P(Y) held fixed.  Throws
// InternalError if an inner step lowers the complete-data log-likelihood.
// on_step, if given, is called after each outer step with the new model.
EmResult em_refine(const AdfaModel& model, const BinaryDataset& data, const EmOptions& options,
                   const std::function<void(std::size_t, const AdfaModel&)>& on_step = {});

}  // namespace adfa

#endif  // ADFA_EVALEM_HPP_
