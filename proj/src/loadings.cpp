#include "adfa/loadings.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "adfa/error.hpp"
#include "adfa/inference.hpp"
#include "adfa/parallel.hpp"
#include "adfa/sampling.hpp"

namespace adfa {

namespace {

constexpr double kMinMass = 1e-9;

double clamp_failure(double f) { return std::clamp(f, kMinFailure, 1.0); }

std::string config_string(std::span<const VarId> ids, std::size_t z) {
  std::string s = "{";
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (t) s += ",";
    s += std::to_string(ids[t]) + "=" + std::to_string(z >> t & 1U);
  }
  return s + "}";
}

}  // namespace

ConditionalMoment conditional_from_joint(const SubsetMoment& joint, VarId target) {
  const std::size_t tp = joint.position(target);
  ConditionalMoment out;
  out.target = target;
  std::vector<std::size_t> cond_pos;
  for (std::size_t t = 0; t < joint.arity(); ++t) {
    if (t == tp) continue;
    out.conditioning.push_back(joint.ids()[t]);
    cond_pos.push_back(t);
  }
  const std::size_t nz = std::size_t{1} << cond_pos.size();
  out.table.resize(nz);
  out.mass.resize(nz);
  for (std::size_t z = 0; z < nz; ++z) {
    std::size_t idx = 0;
    for (std::size_t t = 0; t < cond_pos.size(); ++t)
      if (z >> t & 1U) idx |= std::size_t{1} << cond_pos[t];
    const double m0 = std::max(0.0, joint[idx]);
    const double m1 = std::max(0.0, joint[idx | (std::size_t{1} << tp)]);
    const double mass = m0 + m1;
    if (mass < kMinMass) {
      throw ConditioningError("conditioning event " + config_string(out.conditioning, z) + " has probability below 1e-9");
    }
    out.mass[z] = mass;
    out.table[z] = std::clamp(m0 / mass, 0.0, 1.0);
  }
  return out;
}

double f_direct(const ConditionalMoment& cond) {
  if (cond.conditioning.size() != 1) throw InvalidArgument("f_direct needs a table conditioned on one latent");
  if (cond.table[0] < kMinMass) {
    throw ConditioningError("P(x=0 | y=0) is below 1e-9 for observed " + std::to_string(cond.target));
  }
  return clamp_failure(cond.table[1] / cond.table[0]);
}

double f_blanket_at(const ConditionalMoment& cond, VarId latent, std::size_t b) {
  const auto it = std::find(cond.conditioning.begin(), cond.conditioning.end(), latent);
  if (it == cond.conditioning.end()) throw InvalidArgument("f_blanket: latent not in the conditioning set");
  const std::size_t p = static_cast<std::size_t>(it - cond.conditioning.begin());
  if (b >= (std::size_t{1} << (cond.conditioning.size() - 1))) throw InvalidArgument("blanket configuration out of range");
  const std::size_t low = b & ((std::size_t{1} << p) - 1);
  const std::size_t z0 = ((b >> p) << (p + 1)) | low;
  const std::size_t z1 = z0 | (std::size_t{1} << p);
  if (cond.table[z0] < kMinMass) {
    throw ConditioningError("P(x=0 | " + config_string(cond.conditioning, z0) + ") is below 1e-9");
  }
  return clamp_failure(cond.table[z1] / cond.table[z0]);
}

double f_blanket(const ConditionalMoment& cond, VarId latent, BlanketChoice choice) {
  const auto it = std::find(cond.conditioning.begin(), cond.conditioning.end(), latent);
  if (it == cond.conditioning.end()) throw InvalidArgument("f_blanket: latent not in the conditioning set");
  const std::size_t p = static_cast<std::size_t>(it - cond.conditioning.begin());
  const std::size_t nb = std::size_t{1} << (cond.conditioning.size() - 1);
  auto z_of = [&](std::size_t b, std::size_t yi) {
    const std::size_t low = b & ((std::size_t{1} << p) - 1);
    return ((b >> p) << (p + 1)) | low | (yi << p);
  };
  if (choice == BlanketChoice::kMostProbable) {
    std::size_t best = 0;
    double best_mass = -1.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const double m = cond.mass[z_of(b, 0)] + cond.mass[z_of(b, 1)];
      if (m > best_mass) {
        best_mass = m;
        best = b;
      }
    }
    return f_blanket_at(cond, latent, best);
  }
  double total = 0.0, acc = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const double w = choice == BlanketChoice::kAverageByMass ? cond.mass[z_of(b, 0)] + cond.mass[z_of(b, 1)]
                                                             : cond.mass[z_of(b, 0)];
    total += w;
    acc += w * f_blanket_at(cond, latent, b);
  }
  return clamp_failure(acc / total);
}

std::vector<std::size_t> markov_blanket(const ParentSets& parents, std::size_t i) {
  std::vector<std::size_t> out(parents.at(i).begin(), parents.at(i).end());
  for (std::size_t c = 0; c < parents.size(); ++c) {
    if (std::find(parents[c].begin(), parents[c].end(), i) == parents[c].end()) continue;
    out.push_back(c);
    for (std::size_t q : parents[c])
      if (q != i) out.push_back(q);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double f_tree(const JointOracle& oracle, const LatentNetwork& latent, const VariableSpace& space, std::size_t i,
              std::size_t j) {
  if (!latent.is_forest()) throw PreconditionError("tree-corrected failure estimate needs a tree-shaped network");
  const VarId xj = space.observed_id(j);
  const VarId yi = space.latent_id(i);
  const VarId pair_ids[] = {xj, yi};
  const ConditionalMoment direct = conditional_from_joint(oracle(pair_ids), xj);
  if (direct.table[0] < kMinMass) throw ConditioningError("P(x=0 | y=0) is below 1e-9 for " + space.name_of(xj));
  double f = direct.table[1] / direct.table[0];

  std::vector<std::size_t> neighbors(latent.parents(i).begin(), latent.parents(i).end());
  neighbors.insert(neighbors.end(), latent.children(i).begin(), latent.children(i).end());
  for (std::size_t k : neighbors) {
    const VarId yk = space.latent_id(k);
    const VarId lat_ids[] = {std::min(yi, yk), std::max(yi, yk)};
    const SubsetMoment lat = oracle(lat_ids);
    const std::size_t bi = lat.position(yi), bk = lat.position(yk);
    auto mu = [&](std::size_t vi, std::size_t vk) { return std::max(0.0, lat[(vi << bi) | (vk << bk)]); };
    if (mu(0, 0) < kMinMass || mu(0, 1) < kMinMass || mu(1, 0) + mu(1, 1) < kMinMass) {
      throw ConditioningError("correction undefined for latents (" + space.name_of(yi) + ", " + space.name_of(yk) +
                              "): P(Y_k | Y_i) is degenerate");
    }
    const double p1 = mu(1, 1) / (mu(1, 0) + mu(1, 1));  // P(y_k=1 | y_i=1)

    const VarId tri_ids[] = {xj, std::min(yi, yk), std::max(yi, yk)};
    const ConditionalMoment tri = conditional_from_joint(oracle(tri_ids), xj);
    const std::size_t ci = static_cast<std::size_t>(std::find(tri.conditioning.begin(), tri.conditioning.end(), yi) -
                                                    tri.conditioning.begin());
    const std::size_t ck = 1 - ci;
    auto cond0 = [&](std::size_t vk) { return tri.table[vk << ck]; };  // y_i = 0
    const double c = ((1.0 - p1) * cond0(0) + p1 * cond0(1)) / direct.table[0];
    if (!(c > 0.0)) {
      throw ConditioningError("correction factor vanished for latents (" + space.name_of(yi) + ", " +
                              space.name_of(yk) + ")");
    }
    f /= c;
  }
  return clamp_failure(f);
}

std::string to_string(LeakMethod m) {
  switch (m) {
    case LeakMethod::kAuto: return "auto";
    case LeakMethod::kQuickscore: return "quickscore";
    case LeakMethod::kTreeBp: return "tree-bp";
    case LeakMethod::kSampling: return "sampling";
  }
  return "?";
}

LeakMethod leak_method_from_string(const std::string& s) {
  if (s == "auto") return LeakMethod::kAuto;
  if (s == "quickscore") return LeakMethod::kQuickscore;
  if (s == "tree-bp") return LeakMethod::kTreeBp;
  if (s == "sampling") return LeakMethod::kSampling;
  throw InvalidArgument("unknown leak method '" + s + "'");
}

std::string to_string(FailureMethod m) {
  switch (m) {
    case FailureMethod::kAuto: return "auto";
    case FailureMethod::kDirect: return "direct";
    case FailureMethod::kTree: return "tree";
    case FailureMethod::kBlanket: return "blanket";
  }
  return "?";
}

FailureMethod failure_method_from_string(const std::string& s) {
  if (s == "auto") return FailureMethod::kAuto;
  if (s == "direct") return FailureMethod::kDirect;
  if (s == "tree") return FailureMethod::kTree;
  if (s == "blanket") return FailureMethod::kBlanket;
  throw InvalidArgument("unknown failure method '" + s + "'");
}

double negative_prob_without_leak(const LatentNetwork& latent, std::span<const double> failures, LeakMethod method,
                                  std::uint64_t seed) {
  if (method == LeakMethod::kAuto) {
    method = !latent.has_edges() ? LeakMethod::kQuickscore
             : latent.is_forest() ? LeakMethod::kTreeBp
                                  : LeakMethod::kSampling;
  }
  switch (method) {
    case LeakMethod::kQuickscore:
      return quickscore_negative(latent, failures, 0.0, false);
    case LeakMethod::kTreeBp:
      return tree_negative_prob(latent, failures, 0.0, PartialAssignment(latent.size()));
    case LeakMethod::kSampling: {
      if (failures.size() != latent.size()) throw InvalidArgument("one failure per latent required");
      Rng rng(seed);
      double acc = 0.0;
      for (std::size_t s = 0; s < kLeakSamples; ++s) {
        const Assignment y = sample_latents(latent, rng);
        double q = 1.0;
        for (std::size_t i = 0; i < y.size(); ++i)
          if (y[i]) q *= failures[i];
        acc += q;
      }
      return acc / static_cast<double>(kLeakSamples);
    }
    case LeakMethod::kAuto:
      break;
  }
  throw InternalError("unhandled leak method");
}

double estimate_leak(const LatentNetwork& latent, std::span<const double> failures, double data_negative,
                     LeakMethod method, std::uint64_t seed) {
  const double base = negative_prob_without_leak(latent, failures, method, seed);
  if (base < kMinMass) throw ConditioningError("leak-free negative probability is below 1e-9");
  return std::clamp(1.0 - data_negative / base, 0.0, 1.0 - 1e-12);
}

NoisyOrLoadings estimate_loadings(const JointOracle& oracle, const LatentNetwork& latent, const AnchorMap& anchors,
                                  const VariableSpace& space, const LoadingsOptions& options) {
  const std::size_t m = space.m_latent();
  const std::size_t n = space.n_observed();
  if (latent.size() != m || anchors.size() != m) throw InvalidArgument("network and anchors must cover every latent");

  FailureMethod method = options.failure_method;
  if (method == FailureMethod::kAuto) {
    method = !latent.has_edges() ? FailureMethod::kDirect
             : latent.is_forest() ? FailureMethod::kTree
                                  : FailureMethod::kBlanket;
  }
  std::vector<std::vector<std::size_t>> blankets(m);
  for (std::size_t i = 0; i < m; ++i) blankets[i] = markov_blanket(latent.all_parents(), i);

  std::vector<double> failures(m * n, 1.0);
  std::vector<double> leaks(n, 0.0);
  parallel_for(n, options.threads, [&](std::size_t j) {
    const VarId xj = space.observed_id(j);
    try {
      if (const auto owner = anchors.latent_of_observed(j)) {
        const auto& c = anchors.conditional(*owner);
        if (!(c.p1_given_1 > c.p1_given_0) || !(c.p1_given_0 < 1.0)) {
          throw PreconditionError("anchor conditional of " + space.latent_names()[*owner] +
                                  " is not a noisy-or link (needs P(A=1|Y=1) > P(A=1|Y=0))");
        }
        failures[*owner * n + j] = clamp_failure((1.0 - c.p1_given_1) / (1.0 - c.p1_given_0));
        leaks[j] = c.p1_given_0;
        return;
      }
      for (std::size_t i = 0; i < m; ++i) {
        const VarId yi = space.latent_id(i);
        double f = 1.0;
        switch (method) {
          case FailureMethod::kDirect: {
            const VarId ids[] = {xj, yi};
            f = f_direct(conditional_from_joint(oracle(ids), xj));
            break;
          }
          case FailureMethod::kTree:
            f = f_tree(oracle, latent, space, i, j);
            break;
          case FailureMethod::kBlanket: {
            std::vector<VarId> ids{xj, yi};
            for (std::size_t b : blankets[i]) ids.push_back(space.latent_id(b));
            std::sort(ids.begin(), ids.end());
            f = f_blanket(conditional_from_joint(oracle(ids), xj), yi, options.blanket_choice);
            break;
          }
          case FailureMethod::kAuto:
            break;
        }
        if (options.prune && f >= kPruneFailure) f = 1.0;
        failures[i * n + j] = f;
      }
      const VarId single[] = {xj};
      const SubsetMoment marg = oracle(single);
      const double total = std::max(0.0, marg[0]) + std::max(0.0, marg[1]);
      const double negative = total > 0.0 ? std::max(0.0, marg[0]) / total : 0.0;
      std::vector<double> column(m);
      for (std::size_t i = 0; i < m; ++i) column[i] = failures[i * n + j];
      leaks[j] = estimate_leak(latent, column, negative, options.leak_method, substream_seed(options.seed, "leak", j));
    } catch (const Error&) {
      rethrow_with_context("observed " + space.name_of(xj));
    }
  });
  return NoisyOrLoadings(m, n, std::move(failures), std::move(leaks));
}

JointOracle exact_joint_oracle(const ExactOracle& oracle) {
  return [&oracle](std::span<const VarId> ids) { return oracle.marginal(ids); };
}

namespace {

struct RecoveredOracleState {
  RecoveredOracleState(const BinaryDataset& d, AnchorMap a, VariableSpace s, RecoveryConfig c)
      : data(&d), anchors(std::move(a)), space(std::move(s)), config(c) {}

  const BinaryDataset* data;
  AnchorMap anchors;
  VariableSpace space;
  RecoveryConfig config;
  std::mutex mutex;
  std::map<std::vector<VarId>, SubsetMoment> cache;
};

SubsetMoment recovered_query(RecoveredOracleState& st, std::span<const VarId> ids_in) {
  std::vector<VarId> ids(ids_in.begin(), ids_in.end());
  {
    std::lock_guard<std::mutex> lock(st.mutex);
    auto it = st.cache.find(ids);
    if (it != st.cache.end()) return it->second;
  }
  if (!std::is_sorted(ids.begin(), ids.end()) || std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw InvalidArgument("joint query ids must be sorted and unique");
  }
  const bool all_observed = std::all_of(ids.begin(), ids.end(), [&](VarId id) { return st.space.is_observed(id); });
  SubsetMoment result = [&] {
    if (all_observed) return empirical_moment(*st.data, ids);
    const MixingMatrix R = build_mixing(st.anchors, st.space, ids);
    const std::vector<VarId> src = source_ids(st.anchors, st.space, ids);
    const SubsetMoment source = empirical_moment(*st.data, src);
    if (ids.size() == 1) {
      RecoveryConfig single = st.config;
      single.lambda = 0.0;
      return recover_simplex(source, R, single).moment;
    }
    std::vector<SubsetMoment> singles;
    for (VarId id : ids) {
      const VarId one[] = {id};
      singles.push_back(recovered_query(st, one));
    }
    const SubsetMoment indep = independent_marginal_vector(singles, ids);
    return recover_simplex(source, R, st.config, indep.table()).moment;
  }();
  std::lock_guard<std::mutex> lock(st.mutex);
  return st.cache.emplace(std::move(ids), std::move(result)).first->second;
}

}  // namespace

JointOracle recovered_joint_oracle(const BinaryDataset& data, const AnchorMap& anchors, const VariableSpace& space,
                                   const RecoveryConfig& config) {
  config.validate();
  auto st = std::make_shared<RecoveredOracleState>(data, anchors, space, config);
  return [st](std::span<const VarId> ids) { return recovered_query(*st, ids); };
}

std::string export_loadings(const NoisyOrLoadings& loadings, const VariableSpace& space) {
  std::ostringstream os;
  os.precision(17);
  os << "observed\trank\tlatent\tfailure\tweight\n";
  for (std::size_t j = 0; j < loadings.n_observed(); ++j) {
    std::vector<std::size_t> parents = loadings.parents_of(j);
    std::stable_sort(parents.begin(), parents.end(),
                     [&](std::size_t a, std::size_t b) { return loadings.failure(a, j) < loadings.failure(b, j); });
    for (std::size_t r = 0; r < parents.size(); ++r) {
      const double f = loadings.failure(parents[r], j);
      os << space.observed_names()[j] << '\t' << r + 1 << '\t' << space.latent_names()[parents[r]] << '\t' << f << '\t'
         << std::log(1.0 / f) << '\n';
    }
  }
  return os.str();
}

}  // namespace adfa
