#include "adfa/inference.hpp"

#include <array>

#include "adfa/error.hpp"

namespace adfa {

double joint_prob(const AdfaModel& model, std::span<const std::uint8_t> y, std::span<const std::uint8_t> x) {
  if (y.size() != model.m_latent() || x.size() != model.n_observed()) {
    throw InvalidArgument("joint_prob: assignment lengths do not match the model");
  }
  double p = model.latent().prob(y);
  const auto& loadings = model.loadings();
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double q0 = loadings.negative_prob(j, y);
    p *= x[j] ? 1.0 - q0 : q0;
  }
  return p;
}

Assignment decode_latents(std::size_t code, std::size_t m) {
  Assignment y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = static_cast<std::uint8_t>(code >> i & 1U);
  return y;
}

ExactOracle::ExactOracle(const AdfaModel& model) : model_(model) {
  const std::size_t m = model.m_latent();
  if (m > kMaxEnumeratedLatents) {
    throw CapacityError("exact enumeration supports at most " + std::to_string(kMaxEnumeratedLatents) + " latents");
  }
  prior_.resize(std::size_t{1} << m);
  for (std::size_t code = 0; code < prior_.size(); ++code) {
    prior_[code] = model.latent().prob(decode_latents(code, m));
  }
}

SubsetMoment ExactOracle::marginal(std::span<const VarId> ids_in) const {
  const auto& space = model_.space();
  std::vector<VarId> ids(ids_in.begin(), ids_in.end());
  // SubsetMoment validates ordering; build the table first.
  std::vector<std::size_t> obs_pos, obs_index, lat_pos, lat_index;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (space.is_observed(ids[t])) {
      obs_pos.push_back(t);
      obs_index.push_back(space.observed_index(ids[t]));
    } else {
      lat_pos.push_back(t);
      lat_index.push_back(space.latent_index(ids[t]));
    }
  }
  if (ids.size() > 24) throw CapacityError("exact marginal over too many variables");
  std::vector<double> table(std::size_t{1} << ids.size(), 0.0);
  const std::size_t m = model_.m_latent();
  const std::size_t n_obs_cfg = std::size_t{1} << obs_pos.size();
  std::vector<double> q0(obs_pos.size());
  std::vector<double> obs_weights(n_obs_cfg);
  for (std::size_t code = 0; code < prior_.size(); ++code) {
    const double p = prior_[code];
    if (p == 0.0) continue;
    std::size_t base = 0;
    for (std::size_t t = 0; t < lat_pos.size(); ++t)
      if (code >> lat_index[t] & 1U) base |= std::size_t{1} << lat_pos[t];
    if (obs_pos.empty()) {
      table[base] += p;
      continue;
    }
    const Assignment y = decode_latents(code, m);
    for (std::size_t t = 0; t < obs_pos.size(); ++t) q0[t] = model_.loadings().negative_prob(obs_index[t], y);
    for (std::size_t cfg = 0; cfg < n_obs_cfg; ++cfg) {
      double w = p;
      std::size_t idx = base;
      for (std::size_t t = 0; t < obs_pos.size(); ++t) {
        if (cfg >> t & 1U) {
          w *= 1.0 - q0[t];
          idx |= std::size_t{1} << obs_pos[t];
        } else {
          w *= q0[t];
        }
      }
      table[idx] += w;
    }
  }
  return SubsetMoment(std::move(ids), std::move(table));
}

SubsetMoment exact_marginal(const AdfaModel& model, std::span<const VarId> ids) {
  return ExactOracle(model).marginal(ids);
}

double quickscore_negative(const LatentNetwork& latent, std::span<const double> failures, double leak,
                           bool include_leak) {
  if (latent.has_edges()) throw PreconditionError("quickscore requires independent latents");
  if (failures.size() != latent.size()) throw InvalidArgument("quickscore: one failure per latent required");
  double p = include_leak ? 1.0 - leak : 1.0;
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const auto& row = latent.cpt(i)[0];
    p *= row[0] + row[1] * failures[i];
  }
  return p;
}

double quickscore_negative(const AdfaModel& model, std::size_t j, bool include_leak) {
  if (j >= model.n_observed()) throw InvalidArgument("observed index out of range");
  return quickscore_negative(model.latent(), model.loadings().failure_column(j), model.loadings().leak(j),
                             include_leak);
}

namespace {

// Sum over latent states consistent with `conditioning` of
//   P(y) * prod_i weight_i(y_i),
// where weight_i(0) = 1 and weight_i(1) = failures[i] (or 1 when failures is
// empty), computed bottom-up over the forest.
double forest_sum(const LatentNetwork& latent, std::span<const double> failures,
                  const PartialAssignment& conditioning) {
  const std::size_t m = latent.size();
  if (!latent.is_forest()) throw PreconditionError("latent network is not a tree or forest");
  if (conditioning.size() != m) throw InvalidArgument("conditioning has wrong length");
  // belief[v][y_v]: evidence * local weight * product of child messages.
  std::vector<std::array<double, 2>> belief(m);
  const auto& order = latent.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    for (int yv = 0; yv < 2; ++yv) {
      double b = 1.0;
      if (conditioning[v].has_value() && *conditioning[v] != static_cast<bool>(yv)) b = 0.0;
      if (yv == 1 && !failures.empty()) b *= failures[v];
      belief[v][static_cast<std::size_t>(yv)] = b;
    }
    for (std::size_t c : latent.children(v)) {
      // Each child has exactly one parent, v; cpt row index is y_v.
      for (std::size_t yv = 0; yv < 2; ++yv) {
        const auto& row = latent.cpt(c)[yv];
        belief[v][yv] *= row[0] * belief[c][0] + row[1] * belief[c][1];
      }
    }
  }
  double total = 1.0;
  for (std::size_t v = 0; v < m; ++v) {
    if (!latent.parents(v).empty()) continue;
    const auto& row = latent.cpt(v)[0];
    total *= row[0] * belief[v][0] + row[1] * belief[v][1];
  }
  return total;
}

}  // namespace

double tree_evidence_prob(const LatentNetwork& latent, const PartialAssignment& conditioning) {
  return forest_sum(latent, {}, conditioning);
}

double tree_negative_prob(const LatentNetwork& latent, std::span<const double> failures, double leak,
                          const PartialAssignment& conditioning) {
  if (failures.size() != latent.size()) throw InvalidArgument("tree_negative_prob: one failure per latent required");
  const double evidence = forest_sum(latent, {}, conditioning);
  if (evidence <= 0.0) throw ConditioningError("conditioning event has probability zero");
  return (1.0 - leak) * forest_sum(latent, failures, conditioning) / evidence;
}

double tree_negative_prob(const AdfaModel& model, std::size_t j, const PartialAssignment& conditioning) {
  if (j >= model.n_observed()) throw InvalidArgument("observed index out of range");
  return tree_negative_prob(model.latent(), model.loadings().failure_column(j), model.loadings().leak(j),
                            conditioning);
}

}  // namespace adfa
