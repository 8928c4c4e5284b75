#ifndef ADFA_MOMENT_HPP_
#define ADFA_MOMENT_HPP_

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "adfa/model.hpp"

namespace adfa {

// Probability table over a sorted set of variable ids, in the global bit order
// (bit t <-> ids[t]).  The constructor checks shape only; recovered tables may
// carry small negative entries until a consumer clamps them.  Use
// check_distribution() where the full invariant is required.
class SubsetMoment {
 public:
  SubsetMoment(std::vector<VarId> ids, std::vector<double> table);

  const std::vector<VarId>& ids() const { return ids_; }
  const std::vector<double>& table() const { return table_; }
  std::size_t arity() const { return ids_.size(); }
  std::size_t size() const { return table_.size(); }
  double operator[](std::size_t index) const { return table_[index]; }

  // Bit position of id within this table; throws if absent.
  std::size_t position(VarId id) const;
  bool contains(VarId id) const;

  // Sums out every variable not in keep (keep must be a subset of ids()).
  SubsetMoment marginal(std::span<const VarId> keep) const;

  // The table re-indexed so that bit t carries variable order[t]; order is a
  // permutation of ids().  Used to line observed anchor tables up with the
  // latent ordering of a mixing matrix.
  std::vector<double> reordered(std::span<const VarId> order) const;

  // Throws InvalidArgument unless entries are >= -tol and sum to 1 within tol.
  void check_distribution(double tol = 1e-8) const;

  bool operator==(const SubsetMoment&) const = default;

 private:
  std::vector<VarId> ids_;
  std::vector<double> table_;
};

// Canonical listing of every subset of `vars` with 1 <= |Z| <= order, sorted by
// size then lexicographically, together with the offset of each subset's table
// inside a flat vector.  Moment sets, gradients and polytope vertices are all
// flat vectors over one layout.
class MomentLayout {
 public:
  MomentLayout(std::vector<VarId> vars, std::size_t order);

  const std::vector<VarId>& vars() const { return vars_; }
  std::size_t order() const { return order_; }
  std::size_t subset_count() const { return subsets_.size(); }
  std::size_t dimension() const { return dimension_; }

  const std::vector<VarId>& subset(std::size_t k) const { return subsets_[k]; }
  // Positions of the subset's members within vars().
  const std::vector<std::size_t>& positions(std::size_t k) const { return positions_[k]; }
  std::size_t offset(std::size_t k) const { return offsets_[k]; }
  std::size_t table_size(std::size_t k) const { return std::size_t{1} << subsets_[k].size(); }

  std::optional<std::size_t> find(std::span<const VarId> ids) const;
  std::size_t index_of(std::span<const VarId> ids) const;

  bool operator==(const MomentLayout& other) const {
    return vars_ == other.vars_ && order_ == other.order_;
  }

 private:
  std::vector<VarId> vars_;
  std::size_t order_;
  std::vector<std::vector<VarId>> subsets_;
  std::vector<std::vector<std::size_t>> positions_;
  std::vector<std::size_t> offsets_;
  std::size_t dimension_ = 0;
  std::map<std::vector<VarId>, std::size_t> index_;
};

using LayoutPtr = std::shared_ptr<const MomentLayout>;

LayoutPtr make_layout(std::vector<VarId> vars, std::size_t order);

// One table per subset of the layout.
class MomentSet {
 public:
  MomentSet(LayoutPtr layout, std::vector<double> values);
  // Gathers the layout's subsets from `moments`; missing subsets throw.
  static MomentSet from_moments(LayoutPtr layout, std::span<const SubsetMoment> moments);

  const MomentLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t order() const { return layout_->order(); }
  const std::vector<VarId>& vars() const { return layout_->vars(); }

  std::span<const double> table(std::size_t k) const {
    return {values_.data() + layout_->offset(k), layout_->table_size(k)};
  }
  SubsetMoment moment(std::size_t k) const;
  SubsetMoment at(std::span<const VarId> ids) const;
  bool contains(std::span<const VarId> ids) const { return layout_->find(ids).has_value(); }
  std::vector<SubsetMoment> moments() const;

  bool operator==(const MomentSet& other) const {
    return *layout_ == *other.layout_ && values_ == other.values_;
  }

 private:
  LayoutPtr layout_;
  std::vector<double> values_;
};

// Largest disagreement between a table and the marginal of any table one size
// larger that contains it.  Zero for tables derived from one joint.
double consistency_residual(const MomentSet& moments);

// Largest |sum - 1| or negative excursion over all tables.
double simplex_residual(const MomentSet& moments);

// Index into a subset table for a full assignment over the layout's vars.
std::size_t subset_index(const MomentLayout& layout, std::size_t k, std::span<const std::uint8_t> y);

}  // namespace adfa

#endif  // ADFA_MOMENT_HPP_
