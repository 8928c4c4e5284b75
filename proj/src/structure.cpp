#include "adfa/structure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "adfa/error.hpp"

namespace adfa {

double entropy(std::span<const double> table) {
  double total = 0.0;
  for (double p : table) total += std::max(p, 0.0);
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double p : table) {
    if (p <= 0.0) continue;
    const double q = p / total;
    h -= q * std::log(q);
  }
  return h;
}

double entropy(const SubsetMoment& moment) { return entropy(moment.table()); }

double mutual_information(const SubsetMoment& joint, VarId var) {
  std::vector<VarId> rest;
  for (VarId id : joint.ids())
    if (id != var) rest.push_back(id);
  if (rest.size() + 1 != joint.arity()) throw InvalidArgument("mutual_information: variable not in the joint table");
  if (rest.empty()) return 0.0;
  const VarId self[] = {var};
  return entropy(joint.marginal(self)) + entropy(joint.marginal(rest)) - entropy(joint);
}

namespace {

std::vector<VarId> family_ids(const MomentSet& moments, std::size_t i, std::span<const std::size_t> parents) {
  const auto& vars = moments.vars();
  std::vector<VarId> ids{vars.at(i)};
  for (std::size_t p : parents) ids.push_back(vars.at(p));
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

double family_score(const MomentSet& moments, std::size_t i, std::span<const std::size_t> parents, double n_samples) {
  if (!(n_samples > 1.0)) throw InvalidArgument("BIC needs a sample count above 1");
  const auto ids = family_ids(moments, i, parents);
  if (!moments.contains(ids)) {
    throw InvalidArgument("moment order " + std::to_string(moments.order()) + " too small for a family of size " +
                          std::to_string(ids.size()));
  }
  const VarId self[] = {moments.vars()[i]};
  const double mi = parents.empty() ? 0.0 : mutual_information(moments.at(ids), self[0]);
  const double h = entropy(moments.at(self));
  return n_samples * mi - n_samples * h - std::log(n_samples) * std::ldexp(1.0, static_cast<int>(parents.size()));
}

bool is_acyclic(const ParentSets& parents) {
  const std::size_t m = parents.size();
  std::vector<std::size_t> indeg(m);
  std::vector<std::vector<std::size_t>> children(m);
  for (std::size_t i = 0; i < m; ++i) {
    indeg[i] = parents[i].size();
    for (std::size_t p : parents[i]) {
      if (p >= m || p == i) return false;
      children[p].push_back(i);
    }
  }
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < m; ++i)
    if (indeg[i] == 0) stack.push_back(i);
  std::size_t seen = 0;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    ++seen;
    for (std::size_t c : children[v])
      if (--indeg[c] == 0) stack.push_back(c);
  }
  return seen == m;
}

ScoredStructure bic_score(const MomentSet& moments, const ParentSets& parents, double n_samples) {
  if (parents.size() != moments.vars().size()) throw InvalidArgument("structure size does not match the moments");
  if (!is_acyclic(parents)) throw InvalidArgument("structure contains a cycle");
  ScoredStructure out;
  out.parents = parents;
  for (auto& ps : out.parents) std::sort(ps.begin(), ps.end());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    out.family_scores.push_back(family_score(moments, i, out.parents[i], n_samples));
    out.score += out.family_scores.back();
  }
  return out;
}

ScoredStructure chow_liu(const MomentSet& moments, double n_samples, ChowLiuMode mode) {
  const std::size_t m = moments.vars().size();
  ParentSets parents(m);
  if (m < 2) return bic_score(moments, parents, n_samples);
  if (moments.order() < 2) throw InvalidArgument("Chow-Liu needs pairwise moments");

  struct Edge {
    double w;
    std::size_t a, b;
  };
  std::vector<Edge> edges;
  const auto& vars = moments.vars();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const VarId ids[] = {vars[a], vars[b]};
      double w = mutual_information(moments.at(ids), vars[a]);
      if (w < 1e-12) w = 0.0;
      edges.push_back({w, a, b});
    }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w > y.w;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });

  std::vector<std::size_t> comp(m);
  std::iota(comp.begin(), comp.end(), 0);
  auto find = [&](std::size_t v) {
    while (comp[v] != v) v = comp[v] = comp[comp[v]];
    return v;
  };
  std::vector<std::vector<std::size_t>> adj(m);
  const double penalty = std::log(n_samples);
  for (const auto& e : edges) {
    if (mode == ChowLiuMode::kBicForest && !(n_samples * e.w - penalty > 0.0)) continue;
    const std::size_t ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    comp[std::max(ra, rb)] = std::min(ra, rb);
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }

  std::vector<bool> visited(m, false);
  for (std::size_t root = 0; root < m; ++root) {
    if (visited[root]) continue;
    std::vector<std::size_t> queue{root};
    visited[root] = true;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t v = queue[q];
      std::vector<std::size_t> nb = adj[v];
      std::sort(nb.begin(), nb.end());
      for (std::size_t u : nb) {
        if (visited[u]) continue;
        visited[u] = true;
        parents[u].push_back(v);
        queue.push_back(u);
      }
    }
  }
  return bic_score(moments, parents, n_samples);
}

ScoredStructure exact_search(const MomentSet& moments, double n_samples, std::size_t max_indegree) {
  const std::size_t m = moments.vars().size();
  if (m > kMaxExactSearchVars) throw CapacityError("exact structure search supports at most 16 variables");
  if (max_indegree + 1 > moments.order() && max_indegree < m) {
    throw InvalidArgument("exact search with max indegree " + std::to_string(max_indegree) + " needs moments of order " +
                          std::to_string(max_indegree + 1));
  }
  const std::size_t full = std::size_t{1} << m;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // best[i][U]: best family score of i with parents inside U (i not in U).
  std::vector<std::vector<double>> best(m, std::vector<double>(full, kNegInf));
  std::vector<std::vector<std::uint32_t>> best_set(m, std::vector<std::uint32_t>(full, 0));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t self = std::size_t{1} << i;
    for (std::size_t u = 0; u < full; ++u) {
      if (u & self) continue;
      double b = kNegInf;
      std::uint32_t bs = 0;
      // Best over proper subsets first so that ties keep the smaller set.
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t bit = std::size_t{1} << j;
        if (!(u & bit)) continue;
        if (best[i][u ^ bit] > b) {
          b = best[i][u ^ bit];
          bs = best_set[i][u ^ bit];
        }
      }
      if (static_cast<std::size_t>(std::popcount(u)) <= max_indegree) {
        std::vector<std::size_t> ps;
        for (std::size_t j = 0; j < m; ++j)
          if (u >> j & 1U) ps.push_back(j);
        const double s = family_score(moments, i, ps, n_samples);
        if (s > b) {
          b = s;
          bs = static_cast<std::uint32_t>(u);
        }
      }
      best[i][u] = b;
      best_set[i][u] = bs;
    }
  }

  // dp[W]: best network over W; sink[W]: the node placed last.
  std::vector<double> dp(full, kNegInf);
  std::vector<std::uint8_t> sink(full, 0);
  dp[0] = 0.0;
  for (std::size_t w = 1; w < full; ++w) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t bit = std::size_t{1} << i;
      if (!(w & bit)) continue;
      const double v = dp[w ^ bit] + best[i][w ^ bit];
      if (v > dp[w]) {
        dp[w] = v;
        sink[w] = static_cast<std::uint8_t>(i);
      }
    }
  }
  ParentSets parents(m);
  for (std::size_t w = full - 1; w != 0;) {
    const std::size_t i = sink[w];
    w ^= std::size_t{1} << i;
    const std::uint32_t ps = best_set[i][w];
    for (std::size_t j = 0; j < m; ++j)
      if (ps >> j & 1U) parents[i].push_back(j);
  }
  return bic_score(moments, parents, n_samples);
}

LatentNetwork fit_cpts(const MomentSet& moments, const ParentSets& parents) {
  const std::size_t m = moments.vars().size();
  if (parents.size() != m) throw InvalidArgument("structure size does not match the moments");
  if (!is_acyclic(parents)) throw InvalidArgument("structure contains a cycle");
  const auto& vars = moments.vars();
  std::vector<std::vector<std::size_t>> sorted_parents(parents);
  std::vector<std::vector<LatentNetwork::CptRow>> cpts(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto& ps = sorted_parents[i];
    std::sort(ps.begin(), ps.end());
    const auto ids = family_ids(moments, i, ps);
    if (!moments.contains(ids)) throw InvalidArgument("moments do not cover the family of " + std::to_string(vars[i]));
    const SubsetMoment fam = moments.at(ids);
    const std::size_t self_bit = fam.position(vars[i]);
    std::vector<std::size_t> parent_bits;
    for (std::size_t p : ps) parent_bits.push_back(fam.position(vars[p]));

    const std::size_t rows = std::size_t{1} << ps.size();
    cpts[i].assign(rows, {0.0, 0.0});
    for (std::size_t idx = 0; idx < fam.size(); ++idx) {
      std::size_t c = 0;
      for (std::size_t t = 0; t < parent_bits.size(); ++t)
        if (idx >> parent_bits[t] & 1U) c |= std::size_t{1} << t;
      cpts[i][c][idx >> self_bit & 1U] += std::max(0.0, fam[idx]);
    }
    for (std::size_t c = 0; c < rows; ++c) {
      const double total = cpts[i][c][0] + cpts[i][c][1];
      if (total < 1e-9) {
        std::string fam_ids;
        for (VarId id : ids) fam_ids += (fam_ids.empty() ? "" : ",") + std::to_string(id);
        throw ConditioningError("degenerate family {" + fam_ids + "}: parent configuration " + std::to_string(c) +
                                " has probability below 1e-9");
      }
      cpts[i][c][0] /= total;
      cpts[i][c][1] = 1.0 - cpts[i][c][0];
    }
  }
  return LatentNetwork(std::move(sorted_parents), std::move(cpts));
}

std::vector<std::pair<std::size_t, std::size_t>> skeleton(const ParentSets& parents) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < parents.size(); ++i)
    for (std::size_t p : parents[i]) out.emplace_back(std::min(i, p), std::max(i, p));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::set<std::tuple<std::size_t, std::size_t, std::size_t>> v_structures(const ParentSets& parents) {
  const auto skel = skeleton(parents);
  std::set<std::pair<std::size_t, std::size_t>> adj(skel.begin(), skel.end());
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> out;
  for (std::size_t c = 0; c < parents.size(); ++c)
    for (std::size_t x = 0; x < parents[c].size(); ++x)
      for (std::size_t y = x + 1; y < parents[c].size(); ++y) {
        const std::size_t a = std::min(parents[c][x], parents[c][y]);
        const std::size_t b = std::max(parents[c][x], parents[c][y]);
        if (!adj.count({a, b})) out.emplace(a, c, b);
      }
  return out;
}

}  // namespace

bool markov_equivalent(const ParentSets& a, const ParentSets& b) {
  return a.size() == b.size() && skeleton(a) == skeleton(b) && v_structures(a) == v_structures(b);
}

std::string export_edges(const ScoredStructure& structure, const MomentSet& moments,
                         std::span<const std::string> names) {
  const auto& vars = moments.vars();
  if (names.size() != vars.size()) throw InvalidArgument("one name per structure variable required");
  std::ostringstream os;
  os.precision(17);
  for (std::size_t child = 0; child < structure.parents.size(); ++child) {
    for (std::size_t p : structure.parents[child]) {
      VarId ids[] = {std::min(vars[p], vars[child]), std::max(vars[p], vars[child])};
      const SubsetMoment pair = moments.at(ids);
      const double cov = pair[3] * pair[0] - pair[1] * pair[2];
      os << names[p] << '\t' << names[child] << '\t' << mutual_information(pair, ids[0]) << '\t'
         << (cov >= 0.0 ? '+' : '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace adfa
