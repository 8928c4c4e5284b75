#include "adfa/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adfa/error.hpp"

namespace adfa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace

std::size_t uniform_index(Rng& rng, std::size_t bound) {
  if (bound == 0) throw InvalidArgument("uniform_index: empty range");
  return std::min(bound - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(bound)));
}

std::uint64_t substream_seed(std::uint64_t root, std::string_view name, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(root ^ h) + index);
}

Assignment sample_latents(const LatentNetwork& latent, Rng& rng) {
  Assignment y(latent.size(), 0);
  for (std::size_t i : latent.topological_order()) {
    const double p1 = latent.cpt(i)[latent.parent_config(i, y)][1];
    y[i] = uniform01(rng) < p1 ? 1 : 0;
  }
  return y;
}

BinaryDataset forward_sample(const LatentNetwork& latent, const NoisyOrLoadings& loadings, std::size_t rows,
                             std::uint64_t seed) {
  if (rows == 0) throw InvalidArgument("sample size must be at least 1");
  if (loadings.m_latent() != latent.size()) throw InvalidArgument("loadings do not match the latent network");
  const std::size_t m = latent.size();
  const std::size_t n = loadings.n_observed();
  Rng rng(seed);
  std::vector<std::uint8_t> observed(rows * n);
  std::vector<std::int8_t> labels(rows * m);
  for (std::size_t r = 0; r < rows; ++r) {
    const Assignment y = sample_latents(latent, rng);
    for (std::size_t i = 0; i < m; ++i) labels[r * m + i] = static_cast<std::int8_t>(y[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const double q0 = loadings.negative_prob(j, y);
      observed[r * n + j] = uniform01(rng) < q0 ? 0 : 1;
    }
  }
  return BinaryDataset(n, std::move(observed), m, std::move(labels));
}

BinaryDataset sample_dataset(const AdfaModel& model, std::size_t rows, std::uint64_t seed) {
  return forward_sample(model.latent(), model.loadings(), rows, seed);
}

void ParamRanges::validate() const {
  auto check = [](double lo, double hi, bool closed_low, const char* what) {
    const bool ok = std::isfinite(lo) && std::isfinite(hi) && lo <= hi && (closed_low ? lo >= 0.0 : lo > 0.0) &&
                    hi < 1.0;
    if (!ok) throw InvalidArgument(std::string("infeasible parameter range for ") + what);
  };
  check(prior_lo, prior_hi, false, "latent CPTs");
  check(failure_lo, failure_hi, false, "failure probabilities");
  check(leak_lo, leak_hi, true, "leak probabilities");
  check(anchor_failure_lo, anchor_failure_hi, false, "anchor failures");
  if (!(edge_probability >= 0.0 && edge_probability <= 1.0)) throw InvalidArgument("edge probability must lie in [0, 1]");
  if (!(min_cpt_gap >= 0.0) || min_cpt_gap > (prior_hi - prior_lo)) {
    throw InvalidArgument("min_cpt_gap is infeasible for the CPT range");
  }
}

namespace {

std::vector<LatentNetwork::CptRow> random_cpt(std::size_t n_parents, const ParamRanges& ranges, Rng& rng) {
  const std::size_t rows = std::size_t{1} << n_parents;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<double> p(rows);
    for (auto& v : p) v = uniform_in(rng, ranges.prior_lo, ranges.prior_hi);
    bool ok = true;
    for (std::size_t c = 0; c < rows && ok; ++c)
      for (std::size_t t = 0; t < n_parents && ok; ++t) {
        const std::size_t other = c ^ (std::size_t{1} << t);
        if (std::abs(p[c] - p[other]) < ranges.min_cpt_gap) ok = false;
      }
    if (!ok) continue;
    std::vector<LatentNetwork::CptRow> cpt(rows);
    for (std::size_t c = 0; c < rows; ++c) cpt[c] = {1.0 - p[c], p[c]};
    return cpt;
  }
  throw InvalidArgument("could not draw a CPT satisfying min_cpt_gap; ranges are infeasible");
}

}  // namespace

AdfaModel random_model(std::size_t m_latent, std::size_t n_observed, ModelShape shape, std::uint64_t seed,
                       const ParamRanges& ranges) {
  ranges.validate();
  if (m_latent == 0) throw InvalidArgument("need at least one latent");
  if (n_observed < m_latent) throw InvalidArgument("need at least as many observed variables as latents");
  Rng rng(seed);

  std::vector<std::size_t> order(m_latent);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> parents(m_latent);
  for (std::size_t t = 1; t < m_latent; ++t) {
    const std::size_t node = order[t];
    switch (shape.kind) {
      case StructureKind::kIndependent:
        break;
      case StructureKind::kTree:
        parents[node].push_back(order[uniform_index(rng, t)]);
        break;
      case StructureKind::kIndegree: {
        std::vector<std::size_t> earlier(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(t));
        std::shuffle(earlier.begin(), earlier.end(), rng);
        const std::size_t k = std::min(shape.max_indegree, t);
        parents[node].assign(earlier.begin(), earlier.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(parents[node].begin(), parents[node].end());
        break;
      }
    }
  }
  std::vector<std::vector<LatentNetwork::CptRow>> cpts(m_latent);
  for (std::size_t i = 0; i < m_latent; ++i) cpts[i] = random_cpt(parents[i].size(), ranges, rng);
  LatentNetwork latent(std::move(parents), std::move(cpts));

  NoisyOrLoadings loadings(m_latent, n_observed);
  for (std::size_t j = 0; j < n_observed; ++j) loadings.set_leak(j, uniform_in(rng, ranges.leak_lo, ranges.leak_hi));
  for (std::size_t i = 0; i < m_latent; ++i)
    loadings.set_failure(i, i, uniform_in(rng, ranges.anchor_failure_lo, ranges.anchor_failure_hi));
  for (std::size_t j = m_latent; j < n_observed; ++j)
    for (std::size_t i = 0; i < m_latent; ++i)
      if (uniform01(rng) < ranges.edge_probability)
        loadings.set_failure(i, j, uniform_in(rng, ranges.failure_lo, ranges.failure_hi));

  std::vector<std::size_t> anchor_of(m_latent);
  std::iota(anchor_of.begin(), anchor_of.end(), 0);
  AnchorMap anchors = AnchorMap::from_loadings(loadings, std::move(anchor_of));
  return AdfaModel(VariableSpace(n_observed, m_latent), std::move(latent), std::move(loadings), std::move(anchors));
}

}  // namespace adfa
