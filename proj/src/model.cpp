#include "adfa/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "adfa/error.hpp"

namespace adfa {

namespace {

constexpr double kRowTol = 1e-9;

std::vector<std::string> default_names(const std::string& prefix, std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t k = 0; k < count; ++k) names.push_back(prefix + std::to_string(k));
  return names;
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

// ---------------------------------------------------------------- VariableSpace

VariableSpace::VariableSpace(std::size_t n_observed, std::size_t m_latent)
    : observed_names_(default_names("x", n_observed)),
      latent_names_(default_names("y", m_latent)) {
  validate();
}

VariableSpace::VariableSpace(std::vector<std::string> observed_names,
                             std::vector<std::string> latent_names)
    : observed_names_(std::move(observed_names)), latent_names_(std::move(latent_names)) {
  validate();
}

void VariableSpace::validate() const {
  if (observed_names_.empty()) throw InvalidArgument("need at least one observed variable");
  if (latent_names_.empty()) throw InvalidArgument("need at least one latent variable");
  auto check_unique = [](const std::vector<std::string>& names, const char* what) {
    std::set<std::string> seen;
    for (const auto& name : names) {
      if (!seen.insert(name).second) {
        throw InvalidArgument(std::string("duplicate ") + what + " name '" + name + "'");
      }
    }
  };
  check_unique(observed_names_, "observed");
  check_unique(latent_names_, "latent");
}

VarId VariableSpace::observed_id(std::size_t j) const {
  if (j >= n_observed()) throw InvalidArgument("observed index out of range: " + std::to_string(j));
  return static_cast<VarId>(j);
}

VarId VariableSpace::latent_id(std::size_t i) const {
  if (i >= m_latent()) throw InvalidArgument("latent index out of range: " + std::to_string(i));
  return static_cast<VarId>(n_observed() + i);
}

std::size_t VariableSpace::observed_index(VarId id) const {
  if (!is_observed(id)) throw InvalidArgument("id " + std::to_string(id) + " is not observed");
  return id;
}

std::size_t VariableSpace::latent_index(VarId id) const {
  if (!is_latent(id)) throw InvalidArgument("id " + std::to_string(id) + " is not latent");
  return id - n_observed();
}

std::optional<std::size_t> VariableSpace::find_latent(const std::string& name) const {
  auto it = std::find(latent_names_.begin(), latent_names_.end(), name);
  if (it == latent_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - latent_names_.begin());
}

std::string VariableSpace::name_of(VarId id) const {
  if (is_observed(id)) return observed_names_[id];
  return latent_names_[latent_index(id)];
}

// ---------------------------------------------------------------- LatentNetwork

LatentNetwork::LatentNetwork(std::vector<std::vector<std::size_t>> parents,
                             std::vector<std::vector<CptRow>> cpts)
    : parents_(std::move(parents)), cpts_(std::move(cpts)) {
  const std::size_t m = parents_.size();
  if (m == 0) throw InvalidArgument("latent network needs at least one variable");
  if (cpts_.size() != m) throw InvalidArgument("one CPT per latent required");
  children_.assign(m, {});
  for (std::size_t i = 0; i < m; ++i) {
    auto& pa = parents_[i];
    if (!std::is_sorted(pa.begin(), pa.end()) ||
        std::adjacent_find(pa.begin(), pa.end()) != pa.end()) {
      throw InvalidArgument("parents of latent " + std::to_string(i) + " must be sorted and unique");
    }
    for (std::size_t p : pa) {
      if (p >= m || p == i) {
        throw InvalidArgument("invalid parent " + std::to_string(p) + " for latent " + std::to_string(i));
      }
      children_[p].push_back(i);
    }
    if (pa.size() > 30) throw CapacityError("too many parents for latent " + std::to_string(i));
    if (cpts_[i].size() != (std::size_t{1} << pa.size())) {
      throw InvalidArgument("CPT of latent " + std::to_string(i) + " has wrong number of rows");
    }
    for (const auto& row : cpts_[i]) {
      if (!is_probability(row[0]) || !is_probability(row[1]) ||
          std::abs(row[0] + row[1] - 1.0) > kRowTol) {
        throw InvalidArgument("CPT row of latent " + std::to_string(i) + " is not a distribution");
      }
    }
  }
  // Kahn's algorithm; smallest ready index first for a deterministic order.
  std::vector<std::size_t> indegree(m);
  for (std::size_t i = 0; i < m; ++i) indegree[i] = parents_[i].size();
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < m; ++i)
    if (indegree[i] == 0) ready.insert(i);
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order_.push_back(v);
    for (std::size_t c : children_[v])
      if (--indegree[c] == 0) ready.insert(c);
  }
  if (order_.size() != m) throw InvalidArgument("latent network has a directed cycle");
}

LatentNetwork LatentNetwork::independent(std::span<const double> p_one) {
  std::vector<std::vector<std::size_t>> parents(p_one.size());
  std::vector<std::vector<CptRow>> cpts;
  cpts.reserve(p_one.size());
  for (double p : p_one) cpts.push_back({CptRow{1.0 - p, p}});
  return LatentNetwork(std::move(parents), std::move(cpts));
}

std::size_t LatentNetwork::parent_config(std::size_t i, std::span<const std::uint8_t> y) const {
  std::size_t config = 0;
  const auto& pa = parents_[i];
  for (std::size_t t = 0; t < pa.size(); ++t)
    if (y[pa[t]]) config |= std::size_t{1} << t;
  return config;
}

double LatentNetwork::conditional(std::size_t i, std::span<const std::uint8_t> y) const {
  return cpts_[i][parent_config(i, y)][y[i] ? 1 : 0];
}

double LatentNetwork::prob(std::span<const std::uint8_t> y) const {
  if (y.size() != size()) throw InvalidArgument("latent assignment has wrong length");
  double p = 1.0;
  for (std::size_t i = 0; i < size(); ++i) p *= conditional(i, y);
  return p;
}

double LatentNetwork::log_prob(std::span<const std::uint8_t> y, double floor) const {
  if (y.size() != size()) throw InvalidArgument("latent assignment has wrong length");
  double total = 0.0;
  for (std::size_t i = 0; i < size(); ++i) total += std::log(std::max(conditional(i, y), floor));
  return total;
}

bool LatentNetwork::has_edges() const {
  return std::any_of(parents_.begin(), parents_.end(), [](const auto& pa) { return !pa.empty(); });
}

bool LatentNetwork::is_forest() const { return max_indegree() <= 1; }

std::size_t LatentNetwork::max_indegree() const {
  std::size_t k = 0;
  for (const auto& pa : parents_) k = std::max(k, pa.size());
  return k;
}

// -------------------------------------------------------------- NoisyOrLoadings

NoisyOrLoadings::NoisyOrLoadings(std::size_t m_latent, std::size_t n_observed)
    : m_(m_latent), n_(n_observed), failures_(m_latent * n_observed, 1.0), leaks_(n_observed, 0.0) {}

NoisyOrLoadings::NoisyOrLoadings(std::size_t m_latent, std::size_t n_observed,
                                 std::vector<double> failures, std::vector<double> leaks)
    : m_(m_latent), n_(n_observed), failures_(std::move(failures)), leaks_(std::move(leaks)) {
  if (failures_.size() != m_ * n_) throw InvalidArgument("failure table must be m x n");
  if (leaks_.size() != n_) throw InvalidArgument("leak vector must have length n");
  for (double f : failures_)
    if (!(std::isfinite(f) && f > 0.0 && f <= 1.0)) throw InvalidArgument("failure probabilities must lie in (0, 1]");
  for (double l : leaks_)
    if (!(std::isfinite(l) && l >= 0.0 && l < 1.0)) throw InvalidArgument("leak probabilities must lie in [0, 1)");
}

void NoisyOrLoadings::set_failure(std::size_t i, std::size_t j, double f) {
  if (i >= m_ || j >= n_) throw InvalidArgument("failure index out of range");
  if (!(std::isfinite(f) && f > 0.0 && f <= 1.0)) throw InvalidArgument("failure probabilities must lie in (0, 1]");
  failures_[i * n_ + j] = f;
}

void NoisyOrLoadings::set_leak(std::size_t j, double l) {
  if (j >= n_) throw InvalidArgument("leak index out of range");
  if (!(std::isfinite(l) && l >= 0.0 && l < 1.0)) throw InvalidArgument("leak probabilities must lie in [0, 1)");
  leaks_[j] = l;
}

std::vector<double> NoisyOrLoadings::failure_column(std::size_t j) const {
  std::vector<double> column(m_);
  for (std::size_t i = 0; i < m_; ++i) column[i] = failure(i, j);
  return column;
}

std::vector<std::size_t> NoisyOrLoadings::parents_of(std::size_t j) const {
  std::vector<std::size_t> parents;
  for (std::size_t i = 0; i < m_; ++i)
    if (has_edge(i, j)) parents.push_back(i);
  return parents;
}

std::vector<std::vector<bool>> NoisyOrLoadings::edge_mask() const {
  std::vector<std::vector<bool>> mask(m_, std::vector<bool>(n_));
  for (std::size_t i = 0; i < m_; ++i)
    for (std::size_t j = 0; j < n_; ++j) mask[i][j] = has_edge(i, j);
  return mask;
}

double NoisyOrLoadings::negative_prob(std::size_t j, std::span<const std::uint8_t> y) const {
  double p = 1.0 - leaks_[j];
  for (std::size_t i = 0; i < m_; ++i)
    if (y[i]) p *= failure(i, j);
  return p;
}

// -------------------------------------------------------------------- AnchorMap

AnchorConditional anchor_conditional_from_loadings(double failure, double leak) {
  return AnchorConditional{1.0 - (1.0 - leak) * failure, leak};
}

AnchorMap::AnchorMap(std::vector<std::size_t> anchor_of, std::vector<AnchorConditional> conditionals)
    : anchor_of_(std::move(anchor_of)), conditionals_(std::move(conditionals)) {
  if (anchor_of_.size() != conditionals_.size()) {
    throw InvalidArgument("one anchor conditional per latent required");
  }
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < anchor_of_.size(); ++i) {
    if (!seen.insert(anchor_of_[i]).second) {
      throw InvalidArgument("observed variable " + std::to_string(anchor_of_[i]) +
                            " anchors more than one latent");
    }
    const auto& c = conditionals_[i];
    if (!is_probability(c.p1_given_1) || !is_probability(c.p1_given_0)) {
      throw InvalidArgument("anchor conditional of latent " + std::to_string(i) + " is not a distribution");
    }
    if (c.p1_given_1 == c.p1_given_0) {
      throw InvalidArgument("anchor of latent " + std::to_string(i) + " is independent of its latent");
    }
  }
}

AnchorMap AnchorMap::from_loadings(const NoisyOrLoadings& loadings, std::vector<std::size_t> anchor_of) {
  std::vector<AnchorConditional> conditionals;
  conditionals.reserve(anchor_of.size());
  for (std::size_t i = 0; i < anchor_of.size(); ++i) {
    if (anchor_of[i] >= loadings.n_observed()) throw InvalidArgument("anchor index out of range");
    conditionals.push_back(
        anchor_conditional_from_loadings(loadings.failure(i, anchor_of[i]), loadings.leak(anchor_of[i])));
  }
  return AnchorMap(std::move(anchor_of), std::move(conditionals));
}

std::optional<std::size_t> AnchorMap::latent_of_observed(std::size_t j) const {
  for (std::size_t i = 0; i < anchor_of_.size(); ++i)
    if (anchor_of_[i] == j) return i;
  return std::nullopt;
}

// -------------------------------------------------------------------- AdfaModel

AdfaModel::AdfaModel(VariableSpace space, LatentNetwork latent, NoisyOrLoadings loadings, AnchorMap anchors)
    : space_(std::move(space)),
      latent_(std::move(latent)),
      loadings_(std::move(loadings)),
      anchors_(std::move(anchors)) {
  const std::size_t m = space_.m_latent();
  const std::size_t n = space_.n_observed();
  if (latent_.size() != m) throw InvalidArgument("latent network size does not match the variable space");
  if (loadings_.m_latent() != m || loadings_.n_observed() != n) {
    throw InvalidArgument("loadings shape does not match the variable space");
  }
  if (anchors_.size() != m) throw InvalidArgument("every latent needs exactly one anchor");
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = anchors_.anchor_of(i);
    if (a >= n) throw InvalidArgument("anchor of " + space_.latent_names()[i] + " is out of range");
    const auto parents = loadings_.parents_of(a);
    if (parents.size() != 1 || parents[0] != i) {
      throw InvalidArgument("anchor " + space_.observed_names()[a] + " must have exactly one latent parent, " +
                            space_.latent_names()[i]);
    }
    const auto derived = anchor_conditional_from_loadings(loadings_.failure(i, a), loadings_.leak(a));
    const auto& given = anchors_.conditional(i);
    if (std::abs(derived.p1_given_1 - given.p1_given_1) > 1e-9 ||
        std::abs(derived.p1_given_0 - given.p1_given_0) > 1e-9) {
      throw InvalidArgument("anchor conditional of " + space_.latent_names()[i] +
                            " disagrees with its noisy-or loadings");
    }
  }
}

// ---------------------------------------------------------------- BinaryDataset

BinaryDataset::BinaryDataset(std::size_t n_observed, std::vector<std::uint8_t> observed)
    : n_(n_observed), observed_(std::move(observed)) {
  if (n_ == 0) throw InvalidArgument("dataset needs at least one observed column");
  if (observed_.size() % n_ != 0) throw InvalidArgument("observed data is not a whole number of rows");
  rows_ = observed_.size() / n_;
  for (auto v : observed_)
    if (v > 1) throw InvalidArgument("observed values must be 0 or 1");
}

BinaryDataset::BinaryDataset(std::size_t n_observed, std::vector<std::uint8_t> observed,
                             std::size_t m_latent, std::vector<std::int8_t> latent)
    : BinaryDataset(n_observed, std::move(observed)) {
  m_ = m_latent;
  latent_ = std::move(latent);
  if (m_ == 0) throw InvalidArgument("latent rows need at least one column");
  if (latent_.size() != rows_ * m_) throw InvalidArgument("latent rows must match observed rows");
  for (auto v : latent_)
    if (v != 0 && v != 1 && v != kUnlabeled) throw InvalidArgument("latent labels must be 0, 1 or unlabeled");
}

Assignment BinaryDataset::latent_assignment(std::size_t r) const {
  Assignment y(m_);
  const auto row = latent(r);
  for (std::size_t i = 0; i < m_; ++i) {
    if (row[i] == kUnlabeled) throw InvalidArgument("row " + std::to_string(r) + " has unlabeled latents");
    y[i] = static_cast<std::uint8_t>(row[i]);
  }
  return y;
}

bool BinaryDataset::fully_labeled() const {
  return has_latent() && std::none_of(latent_.begin(), latent_.end(), [](auto v) { return v == kUnlabeled; });
}

BinaryDataset BinaryDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw InvalidArgument("row slice out of range");
  std::vector<std::uint8_t> obs(observed_.begin() + static_cast<std::ptrdiff_t>(begin * n_),
                                observed_.begin() + static_cast<std::ptrdiff_t>(end * n_));
  if (!has_latent()) return BinaryDataset(n_, std::move(obs));
  std::vector<std::int8_t> lat(latent_.begin() + static_cast<std::ptrdiff_t>(begin * m_),
                               latent_.begin() + static_cast<std::ptrdiff_t>(end * m_));
  return BinaryDataset(n_, std::move(obs), m_, std::move(lat));
}

}  // namespace adfa
