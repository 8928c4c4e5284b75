#include "adfa/moment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adfa/error.hpp"

namespace adfa {

namespace {

constexpr std::size_t kMaxTableArity = 26;

std::string ids_string(std::span<const VarId> ids) {
  std::string s = "{";
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (t) s += ",";
    s += std::to_string(ids[t]);
  }
  return s + "}";
}

}  // namespace

// ---------------------------------------------------------------- SubsetMoment

SubsetMoment::SubsetMoment(std::vector<VarId> ids, std::vector<double> table)
    : ids_(std::move(ids)), table_(std::move(table)) {
  if (!std::is_sorted(ids_.begin(), ids_.end()) || std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
    throw InvalidArgument("moment ids must be sorted and unique: " + ids_string(ids_));
  }
  if (ids_.size() > kMaxTableArity) throw CapacityError("moment table over too many variables");
  if (table_.size() != (std::size_t{1} << ids_.size())) {
    throw InvalidArgument("moment table for " + ids_string(ids_) + " has wrong size");
  }
  for (double v : table_)
    if (!std::isfinite(v)) throw InvalidArgument("moment table for " + ids_string(ids_) + " is not finite");
}

std::size_t SubsetMoment::position(VarId id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) {
    throw InvalidArgument("variable " + std::to_string(id) + " not in moment " + ids_string(ids_));
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

bool SubsetMoment::contains(VarId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

SubsetMoment SubsetMoment::marginal(std::span<const VarId> keep) const {
  std::vector<VarId> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  std::vector<std::size_t> pos;
  pos.reserve(kept.size());
  for (VarId id : kept) pos.push_back(position(id));
  std::vector<double> out(std::size_t{1} << kept.size(), 0.0);
  for (std::size_t idx = 0; idx < table_.size(); ++idx) {
    std::size_t sub = 0;
    for (std::size_t t = 0; t < pos.size(); ++t)
      if (idx >> pos[t] & 1U) sub |= std::size_t{1} << t;
    out[sub] += table_[idx];
  }
  return SubsetMoment(std::move(kept), std::move(out));
}

std::vector<double> SubsetMoment::reordered(std::span<const VarId> order) const {
  if (order.size() != ids_.size()) throw InvalidArgument("reorder needs a permutation of the moment ids");
  std::vector<std::size_t> pos;
  pos.reserve(order.size());
  for (VarId id : order) pos.push_back(position(id));
  std::vector<std::size_t> check(pos);
  std::sort(check.begin(), check.end());
  if (std::adjacent_find(check.begin(), check.end()) != check.end()) {
    throw InvalidArgument("reorder needs a permutation of the moment ids");
  }
  std::vector<double> out(table_.size());
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    std::size_t src = 0;
    for (std::size_t t = 0; t < pos.size(); ++t)
      if (idx >> t & 1U) src |= std::size_t{1} << pos[t];
    out[idx] = table_[src];
  }
  return out;
}

void SubsetMoment::check_distribution(double tol) const {
  double sum = 0.0;
  for (double v : table_) {
    if (v < -tol) throw InvalidArgument("moment " + ids_string(ids_) + " has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) throw InvalidArgument("moment " + ids_string(ids_) + " does not sum to 1");
}

// ---------------------------------------------------------------- MomentLayout

MomentLayout::MomentLayout(std::vector<VarId> vars, std::size_t order) : vars_(std::move(vars)), order_(order) {
  if (vars_.empty()) throw InvalidArgument("moment layout needs at least one variable");
  if (!std::is_sorted(vars_.begin(), vars_.end()) ||
      std::adjacent_find(vars_.begin(), vars_.end()) != vars_.end()) {
    throw InvalidArgument("moment layout variables must be sorted and unique");
  }
  if (order_ < 1) throw InvalidArgument("moment order must be at least 1");
  order_ = std::min(order_, vars_.size());
  if (order_ > kMaxTableArity) throw CapacityError("moment order too large");

  const std::size_t m = vars_.size();
  for (std::size_t size = 1; size <= order_; ++size) {
    // Lexicographic combinations of positions.
    std::vector<std::size_t> comb(size);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      std::vector<VarId> ids;
      ids.reserve(size);
      for (std::size_t p : comb) ids.push_back(vars_[p]);
      index_.emplace(ids, subsets_.size());
      subsets_.push_back(std::move(ids));
      positions_.push_back(comb);
      offsets_.push_back(dimension_);
      dimension_ += std::size_t{1} << size;

      std::size_t t = size;
      while (t > 0 && comb[t - 1] == m - size + t - 1) --t;
      if (t == 0) break;
      ++comb[t - 1];
      for (std::size_t u = t; u < size; ++u) comb[u] = comb[u - 1] + 1;
    }
  }
}

std::optional<std::size_t> MomentLayout::find(std::span<const VarId> ids) const {
  auto it = index_.find(std::vector<VarId>(ids.begin(), ids.end()));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t MomentLayout::index_of(std::span<const VarId> ids) const {
  auto k = find(ids);
  if (!k) throw InvalidArgument("moment set has no table for " + ids_string(ids));
  return *k;
}

LayoutPtr make_layout(std::vector<VarId> vars, std::size_t order) {
  return std::make_shared<const MomentLayout>(std::move(vars), order);
}

// ------------------------------------------------------------------- MomentSet

MomentSet::MomentSet(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (!layout_) throw InvalidArgument("moment set needs a layout");
  if (values_.size() != layout_->dimension()) throw InvalidArgument("moment set values do not match the layout");
  for (double v : values_)
    if (!std::isfinite(v)) throw InvalidArgument("moment set values must be finite");
}

MomentSet MomentSet::from_moments(LayoutPtr layout, std::span<const SubsetMoment> moments) {
  std::vector<double> values(layout->dimension());
  std::vector<bool> filled(layout->subset_count(), false);
  for (const auto& mom : moments) {
    auto k = layout->find(mom.ids());
    if (!k) continue;
    std::copy(mom.table().begin(), mom.table().end(), values.begin() + static_cast<std::ptrdiff_t>(layout->offset(*k)));
    filled[*k] = true;
  }
  for (std::size_t k = 0; k < filled.size(); ++k) {
    if (!filled[k]) throw InvalidArgument("missing moment for subset " + ids_string(layout->subset(k)));
  }
  return MomentSet(std::move(layout), std::move(values));
}

SubsetMoment MomentSet::moment(std::size_t k) const {
  auto t = table(k);
  return SubsetMoment(layout_->subset(k), std::vector<double>(t.begin(), t.end()));
}

SubsetMoment MomentSet::at(std::span<const VarId> ids) const { return moment(layout_->index_of(ids)); }

std::vector<SubsetMoment> MomentSet::moments() const {
  std::vector<SubsetMoment> out;
  out.reserve(layout_->subset_count());
  for (std::size_t k = 0; k < layout_->subset_count(); ++k) out.push_back(moment(k));
  return out;
}

double consistency_residual(const MomentSet& moments) {
  const auto& layout = moments.layout();
  double worst = 0.0;
  for (std::size_t k = 0; k < layout.subset_count(); ++k) {
    const auto& ids = layout.subset(k);
    if (ids.size() < 2) continue;
    const SubsetMoment big = moments.moment(k);
    for (std::size_t drop = 0; drop < ids.size(); ++drop) {
      std::vector<VarId> sub;
      for (std::size_t t = 0; t < ids.size(); ++t)
        if (t != drop) sub.push_back(ids[t]);
      const auto small = moments.table(layout.index_of(sub));
      const auto marg = big.marginal(sub);
      for (std::size_t idx = 0; idx < small.size(); ++idx)
        worst = std::max(worst, std::abs(marg[idx] - small[idx]));
    }
  }
  return worst;
}

double simplex_residual(const MomentSet& moments) {
  double worst = 0.0;
  for (std::size_t k = 0; k < moments.layout().subset_count(); ++k) {
    double sum = 0.0;
    for (double v : moments.table(k)) {
      worst = std::max(worst, -v);
      sum += v;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

std::size_t subset_index(const MomentLayout& layout, std::size_t k, std::span<const std::uint8_t> y) {
  const auto& pos = layout.positions(k);
  std::size_t idx = 0;
  for (std::size_t t = 0; t < pos.size(); ++t)
    if (y[pos[t]]) idx |= std::size_t{1} << t;
  return idx;
}

}  // namespace adfa
