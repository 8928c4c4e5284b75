#ifndef ADFA_SAMPLING_HPP_
#define ADFA_SAMPLING_HPP_

#include <cstdint>
#include <random>
#include <string_view>

#include "adfa/model.hpp"

namespace adfa {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0, bound).
std::size_t uniform_index(Rng& rng, std::size_t bound);

// Seed of a named substream of `root`.  All randomness in a pipeline run flows
// from one root seed through these.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0);

// Draws the latent state in topological order.
Assignment sample_latents(const LatentNetwork& latent, Rng& rng);

// Forward-samples N rows of (x, y).  The loadings need not satisfy the anchor
// invariant, which lets tests generate deliberately misspecified data.
BinaryDataset forward_sample(const LatentNetwork& latent, const NoisyOrLoadings& loadings, std::size_t rows,
                             std::uint64_t seed);

BinaryDataset sample_dataset(const AdfaModel& model, std::size_t rows, std::uint64_t seed);

enum class StructureKind { kIndependent, kTree, kIndegree };

struct ModelShape {
  StructureKind kind = StructureKind::kTree;
  std::size_t max_indegree = 2;  // used by kIndegree
};

// Ranges for random_model.  Defaults keep mixing matrices well conditioned and
// the tree correction factors defined.
struct ParamRanges {
  double prior_lo = 0.1, prior_hi = 0.9;          // P(y=1 | pa)
  double failure_lo = 0.1, failure_hi = 0.9;      // present non-anchor edges
  double leak_lo = 0.01, leak_hi = 0.1;
  double anchor_failure_lo = 0.1, anchor_failure_hi = 0.5;
  double edge_probability = 0.3;                  // latent -> non-anchor observed
  // Flipping any single parent changes P(y=1|pa) by at least this much.
  double min_cpt_gap = 0.0;

  void validate() const;
};

// Random ADFA model.  Latent i is anchored by observed i.  Tree structures
// attach each latent (in a random order) to a uniformly chosen earlier one;
// indegree-K structures give the node at position t exactly min(K, t)
// parents drawn from the earlier nodes.
AdfaModel random_model(std::size_t m_latent, std::size_t n_observed, ModelShape shape, std::uint64_t seed,
                       const ParamRanges& ranges = {});

}  // namespace adfa

#endif  // ADFA_SAMPLING_HPP_
