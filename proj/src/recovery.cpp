#include <algorithm>
#include <cmath>

#include "adfa/error.hpp"
#include "adfa/linear_program.hpp"
#include "adfa/moments.hpp"
#include "adfa/parallel.hpp"
#include "adfa/simplex_descent.hpp"

namespace adfa {

namespace {

// Sum over subsets of KL(a_Z || R_Z mu_Z) + lambda KL(ind_Z || mu_Z).
class PolytopeObjective {
 public:
  PolytopeObjective(const MomentSet& sources, LayoutPtr layout, const AnchorMap& anchors, const VariableSpace& space,
                    double lambda, double eps, std::span<const double> indep)
      : layout_(std::move(layout)), lambda_(lambda), eps_(eps), indep_(indep.begin(), indep.end()) {
    for (std::size_t k = 0; k < layout_->subset_count(); ++k) {
      mixing_.push_back(build_mixing(anchors, space, layout_->subset(k)));
      std::vector<VarId> src(mixing_.back().sources());
      std::sort(src.begin(), src.end());
      if (!sources.contains(src)) {
        std::string ids;
        for (VarId id : layout_->subset(k)) ids += (ids.empty() ? "" : ",") + space.name_of(id);
        throw InvalidArgument("source moments lack the table for {" + ids + "}");
      }
      targets_.push_back(aligned_source_table(sources.at(src), mixing_.back()));
    }
  }

  double value(std::span<const double> mu) const { return evaluate(mu, nullptr); }
  double value_and_gradient(std::span<const double> mu, std::vector<double>& grad) const {
    grad.assign(mu.size(), 0.0);
    return evaluate(mu, &grad);
  }

 private:
  double evaluate(std::span<const double> mu, std::vector<double>* grad) const {
    double f = 0.0;
    for (std::size_t k = 0; k < layout_->subset_count(); ++k) {
      const std::size_t off = layout_->offset(k);
      const std::size_t d = layout_->table_size(k);
      const std::span<const double> mu_k = mu.subspan(off, d);
      const std::vector<double> rm = mixing_[k].apply(mu_k);
      f += kl_divergence(targets_[k], rm, eps_);
      if (grad) {
        std::vector<double> ratio(d);
        for (std::size_t i = 0; i < d; ++i) ratio[i] = targets_[k][i] / std::max(rm[i], eps_);
        const std::vector<double> back = mixing_[k].apply_transpose(ratio);
        for (std::size_t i = 0; i < d; ++i) (*grad)[off + i] = -back[i];
      }
      if (lambda_ > 0.0) {
        const std::span<const double> ind_k(indep_.data() + off, d);
        f += lambda_ * kl_divergence(ind_k, mu_k, eps_);
        if (grad)
          for (std::size_t i = 0; i < d; ++i) (*grad)[off + i] -= lambda_ * ind_k[i] / std::max(mu_k[i], eps_);
      }
    }
    return f;
  }

  LayoutPtr layout_;
  double lambda_;
  double eps_;
  std::vector<double> indep_;
  std::vector<MixingMatrix> mixing_;
  std::vector<std::vector<double>> targets_;
};

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> combine(const std::vector<std::vector<double>>& atoms, std::span<const double> w) {
  std::vector<double> mu(atoms.front().size(), 0.0);
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += w[a] * atoms[a][i];
  return mu;
}

}  // namespace

PolytopeRecovery recover_polytope(const MomentSet& source_moments, LayoutPtr target_layout, const AnchorMap& anchors,
                                  const VariableSpace& space, const RecoveryConfig& config,
                                  std::span<const double> indep) {
  config.validate();
  if (config.constraint == Constraint::kSimplex) {
    throw InvalidArgument("recover_polytope needs the local or marginal constraint");
  }
  const std::size_t dim = target_layout->dimension();
  if (config.lambda > 0.0 && indep.size() != dim) throw InvalidArgument("lambda > 0 needs an independence vector");
  const PolytopeObjective objective(source_moments, target_layout, anchors, space, config.lambda,
                                    config.epsilon_clamp, indep);
  const MomentLayout& layout = *target_layout;

  LinearProgram local_lp;
  if (config.constraint == Constraint::kLocal) local_lp = local_polytope_program(layout);
  auto oracle = [&](std::span<const double> g) {
    if (config.constraint == Constraint::kMarginal) return linear_oracle_marginal(layout, g).point;
    local_lp.cost.assign(g.begin(), g.end());
    return solve_lp(local_lp).x;
  };

  std::vector<std::vector<double>> atoms{uniform_point(layout)};
  std::vector<double> weights{1.0};
  std::vector<double> mu = atoms.front();
  std::vector<double> grad;
  double f = objective.value_and_gradient(mu, grad);

  PolytopeRecovery out{MomentSet(target_layout, mu), {f}, 0.0, 0, false};
  std::vector<double> d(dim), trial(dim), g_trial;

  for (std::size_t t = 0; t < config.max_iters; ++t) {
    std::vector<double> s = oracle(grad);
    double gap = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      d[i] = s[i] - mu[i];
      gap -= grad[i] * d[i];
    }
    out.gap = gap;
    out.iterations = t;
    if (gap <= config.gap_tol) {
      out.converged = true;
      break;
    }

    auto at = [&](double gamma) {
      for (std::size_t i = 0; i < dim; ++i) trial[i] = mu[i] + gamma * d[i];
    };
    auto slope = [&](double gamma) {
      at(gamma);
      objective.value_and_gradient(trial, g_trial);
      return dot(g_trial, d);
    };
    double gamma = 2.0 / (static_cast<double>(t) + 2.0);
    if (config.step_rule == StepRule::kLineSearch) {
      double ls;
      if (slope(1.0) <= 0.0) {
        ls = 1.0;
      } else {
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 40; ++it) {
          const double mid = 0.5 * (lo + hi);
          (slope(mid) > 0.0 ? hi : lo) = mid;
        }
        ls = 0.5 * (lo + hi);
      }
      at(ls);
      if (objective.value(trial) <= f) gamma = ls;
    }
    at(gamma);
    if (objective.value(trial) > f) gamma = 0.0;

    if (gamma > 0.0) {
      for (double& w : weights) w *= 1.0 - gamma;
      auto same = std::find(atoms.begin(), atoms.end(), s);
      if (same != atoms.end()) {
        weights[static_cast<std::size_t>(same - atoms.begin())] += gamma;
      } else {
        atoms.push_back(std::move(s));
        weights.push_back(gamma);
      }
      mu = combine(atoms, weights);
      f = objective.value(mu);
    }

    // Fully-corrective step over the active atoms' weights.
    if (atoms.size() > 1) {
      auto weight_objective = [&](std::span<const double> w, std::span<double> gw) {
        const std::vector<double> m = combine(atoms, w);
        std::vector<double> gm;
        const double v = objective.value_and_gradient(m, gm);
        for (std::size_t a = 0; a < atoms.size(); ++a) gw[a] = dot(atoms[a], gm);
        return v;
      };
      SimplexOptions opts;
      opts.max_iters = config.corrective_iters;
      opts.gap_tol = 0.0;
      SimplexResult res = minimize_on_simplex(weight_objective, weights, opts);
      if (res.objective <= f) {
        weights = std::move(res.x);
        mu = combine(atoms, weights);
        f = objective.value(mu);
      }
      // Drop atoms whose weight has vanished, unless that raises the objective.
      std::vector<std::vector<double>> kept_atoms;
      std::vector<double> kept_weights;
      double total = 0.0;
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        if (weights[a] < 1e-12) continue;
        kept_atoms.push_back(atoms[a]);
        kept_weights.push_back(weights[a]);
        total += weights[a];
      }
      if (kept_atoms.size() < atoms.size()) {
        for (double& w : kept_weights) w /= total;
        std::vector<double> m = combine(kept_atoms, kept_weights);
        const double fp = objective.value(m);
        if (fp <= f) {
          atoms = std::move(kept_atoms);
          weights = std::move(kept_weights);
          mu = std::move(m);
          f = fp;
        }
      }
    }
    objective.value_and_gradient(mu, grad);
    out.objective_trace.push_back(f);
    out.iterations = t + 1;
  }
  out.moments = MomentSet(target_layout, mu);
  return out;
}

RecoveredMoments recover_moments(const MomentSet& source_moments, std::span<const VarId> targets, std::size_t order,
                                 const AnchorMap& anchors, const VariableSpace& space, const RecoveryConfig& config,
                                 std::size_t threads) {
  config.validate();
  std::vector<VarId> vars(targets.begin(), targets.end());
  std::sort(vars.begin(), vars.end());
  LayoutPtr layout = make_layout(vars, order);

  auto source_table = [&](const MixingMatrix& R) {
    std::vector<VarId> src(R.sources());
    std::sort(src.begin(), src.end());
    return source_moments.at(src);
  };

  // Singletons by unregularized simplex recovery.
  RecoveryConfig single = config;
  single.lambda = 0.0;
  std::vector<SubsetMoment> singletons(vars.size(), SubsetMoment({0}, {0.5, 0.5}));
  bool converged = true;
  std::vector<char> ok(vars.size(), 1);
  parallel_for(vars.size(), threads, [&](std::size_t t) {
    const std::vector<VarId> ids{vars[t]};
    const MixingMatrix R = build_mixing(anchors, space, ids);
    SimplexRecovery r = recover_simplex(source_table(R), R, single, {});
    singletons[t] = std::move(r.moment);
    ok[t] = r.converged;
  });
  for (char c : ok) converged = converged && c;

  std::vector<double> indep(layout->dimension());
  for (std::size_t k = 0; k < layout->subset_count(); ++k) {
    const SubsetMoment im = independent_marginal_vector(singletons, layout->subset(k));
    std::copy(im.table().begin(), im.table().end(), indep.begin() + static_cast<std::ptrdiff_t>(layout->offset(k)));
  }

  if (config.constraint == Constraint::kSimplex) {
    std::vector<double> values(layout->dimension());
    std::vector<char> sub_ok(layout->subset_count(), 1);
    parallel_for(layout->subset_count(), threads, [&](std::size_t k) {
      const auto& ids = layout->subset(k);
      const std::size_t off = layout->offset(k);
      const std::size_t d = layout->table_size(k);
      if (ids.size() == 1) {
        const auto pos = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), ids[0]) - vars.begin());
        std::copy(singletons[pos].table().begin(), singletons[pos].table().end(),
                  values.begin() + static_cast<std::ptrdiff_t>(off));
        return;
      }
      const MixingMatrix R = build_mixing(anchors, space, ids);
      SimplexRecovery r = recover_simplex(source_table(R), R, config, std::span<const double>(indep.data() + off, d));
      std::copy(r.moment.table().begin(), r.moment.table().end(), values.begin() + static_cast<std::ptrdiff_t>(off));
      sub_ok[k] = r.converged;
    });
    for (char c : sub_ok) converged = converged && c;
    return RecoveredMoments{MomentSet(layout, std::move(values)), converged, {}};
  }

  PolytopeRecovery pr = recover_polytope(source_moments, layout, anchors, space, config, indep);
  return RecoveredMoments{std::move(pr.moments), converged && pr.converged, std::move(pr.objective_trace)};
}

}  // namespace adfa
