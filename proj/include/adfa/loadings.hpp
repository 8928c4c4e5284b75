#ifndef ADFA_LOADINGS_HPP_
#define ADFA_LOADINGS_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adfa/model.hpp"
#include "adfa/moment.hpp"
#include "adfa/moments.hpp"
#include "adfa/structure.hpp"

namespace adfa {

class ExactOracle;

// Failures are kept in [kMinFailure, 1]; estimates at or above kPruneFailure
// are treated as "no edge".
inline constexpr double kMinFailure = 1e-6;
inline constexpr double kPruneFailure = 0.98;

// Joint table over a sorted list of ids mixing observed and latent variables.
using JointOracle = std::function<SubsetMoment(std::span<const VarId>)>;

// P(x_target = 0 | z) for every assignment z of the conditioning ids (bit t
// carries conditioning[t]); mass[z] = mu(z).
struct ConditionalMoment {
  VarId target = 0;
  std::vector<VarId> conditioning;
  std::vector<double> table;
  std::vector<double> mass;
};

ConditionalMoment conditional_from_joint(const SubsetMoment& joint, VarId target);

// P(x=0|y_i=1) / P(x=0|y_i=0) on a table conditioned on {Y_i} alone.
double f_direct(const ConditionalMoment& cond);

enum class BlanketChoice {
  kMostProbable,      // the single configuration with the largest mu(b)
  kAverageByMass,     // average over b weighted by P(b)
  kAverageGivenAbsent // average over b weighted by P(b | y_i = 0)
};

// Ratio at a fixed blanket configuration b (bit t carries the t-th blanket id).
double f_blanket_at(const ConditionalMoment& cond, VarId latent, std::size_t blanket_config);
// Ratio at the configuration(s) chosen by `choice`.
double f_blanket(const ConditionalMoment& cond, VarId latent, BlanketChoice choice = BlanketChoice::kMostProbable);

// Markov blanket of node i: parents, children, and the children's other parents.
std::vector<std::size_t> markov_blanket(const ParentSets& parents, std::size_t i);

// Tree-corrected estimate of f_{i,j}: the direct ratio divided by one
// correction factor per neighbor k of Y_i,
//   c_k = sum_{y_k} P(y_k|y_i=1) P(x_j=0|y_i=0,y_k) / P(x_j=0|y_i=0).
// Queries only joints over X_j and at most two latents.
double f_tree(const JointOracle& oracle, const LatentNetwork& latent, const VariableSpace& space, std::size_t i,
              std::size_t j);

enum class LeakMethod { kAuto, kQuickscore, kTreeBp, kSampling };
std::string to_string(LeakMethod m);
LeakMethod leak_method_from_string(const std::string& s);

inline constexpr std::size_t kLeakSamples = 100000;

// P(x_j = 0) with the leak removed, by the chosen method.
double negative_prob_without_leak(const LatentNetwork& latent, std::span<const double> failures, LeakMethod method,
                                  std::uint64_t seed);

// l = 1 - P(x_j=0) / P_{-l}(x_j=0), clamped to [0, 1).
double estimate_leak(const LatentNetwork& latent, std::span<const double> failures, double data_negative,
                     LeakMethod method, std::uint64_t seed = 0);

enum class FailureMethod { kAuto, kDirect, kTree, kBlanket };
std::string to_string(FailureMethod m);
FailureMethod failure_method_from_string(const std::string& s);

struct LoadingsOptions {
  FailureMethod failure_method = FailureMethod::kAuto;
  BlanketChoice blanket_choice = BlanketChoice::kMostProbable;
  LeakMethod leak_method = LeakMethod::kAuto;
  bool prune = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

// Step 3 of the pipeline.  Anchor columns come straight from the anchor
// conditionals (l = P(A=1|Y=0), f = P(A=0|Y=1) / P(A=0|Y=0)); every other
// column is estimated from the oracle's joints.
NoisyOrLoadings estimate_loadings(const JointOracle& oracle, const LatentNetwork& latent, const AnchorMap& anchors,
                                  const VariableSpace& space, const LoadingsOptions& options = {});

// Oracle answering from exact enumeration.
JointOracle exact_joint_oracle(const ExactOracle& oracle);

// Oracle recovering each requested joint from data: observed ids are measured
// directly, latents through their anchors, by simplex recovery with
// config.lambda towards the product of singletons.  Results are cached; the
// oracle is safe to call from several threads.
JointOracle recovered_joint_oracle(const BinaryDataset& data, const AnchorMap& anchors, const VariableSpace& space,
                                   const RecoveryConfig& config);

// Per observed variable, its edges ranked by weight log(1/f), tab separated:
//   observed  rank  latent  f  weight
std::string export_loadings(const NoisyOrLoadings& loadings, const VariableSpace& space);

}  // namespace adfa

#endif  // ADFA_LOADINGS_HPP_
