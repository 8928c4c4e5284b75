#include <doctest.h>

#include "adfa/error.hpp"
#include "adfa/inference.hpp"
#include "adfa/linear_program.hpp"
#include "adfa/moments.hpp"
#include "adfa/sampling.hpp"
#include "oracles.hpp"

using namespace adfa;
namespace to = testing_oracles;

namespace {

// <g, indicator(y)> summed by hand over every subset table.
double vertex_value(const MomentLayout& L, std::span<const double> g, const std::vector<std::uint8_t>& y) {
  double v = 0.0;
  for (std::size_t k = 0; k < L.subset_count(); ++k) {
    std::size_t idx = 0;
    const auto& ids = L.subset(k);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      const auto pos = static_cast<std::size_t>(std::find(L.vars().begin(), L.vars().end(), ids[t]) - L.vars().begin());
      if (y[pos]) idx |= std::size_t{1} << t;
    }
    v += g[L.offset(k) + idx];
  }
  return v;
}

std::vector<double> random_gradient(std::size_t dim, Rng& rng) {
  std::vector<double> g(dim);
  for (auto& v : g) v = 2.0 * uniform01(rng) - 1.0;
  return g;
}

MomentSet population_anchor_moments(const AdfaModel& model, std::size_t order) {
  std::vector<VarId> anchors(model.anchors().anchors().begin(), model.anchors().anchors().end());
  std::sort(anchors.begin(), anchors.end());
  return population_moment_set(ExactOracle(model), make_layout(anchors, order));
}

std::vector<VarId> latent_ids(const AdfaModel& model) {
  std::vector<VarId> ids;
  for (std::size_t i = 0; i < model.m_latent(); ++i) ids.push_back(model.space().latent_id(i));
  return ids;
}

}  // namespace

TEST_SUITE("recovery") {
  TEST_CASE("marginal oracle is exact linear minimization over vertices") {
    const LayoutPtr L = make_layout({4, 5, 6, 7}, 2);
    const std::vector<double> zero(L->dimension(), 0.0);
    const OracleResult z = linear_oracle_marginal(*L, zero);
    CHECK(z.assignment == Assignment{0, 0, 0, 0});
    CHECK(z.value == 0.0);

    // reward y at position 1 being on in every table containing it
    std::vector<double> g(L->dimension(), 0.0);
    for (std::size_t k = 0; k < L->subset_count(); ++k) {
      const auto& ids = L->subset(k);
      const auto it = std::find(ids.begin(), ids.end(), VarId{5});
      if (it == ids.end()) continue;
      const std::size_t bit = static_cast<std::size_t>(it - ids.begin());
      for (std::size_t idx = 0; idx < L->table_size(k); ++idx)
        if (idx >> bit & 1U) g[L->offset(k) + idx] = -1.0;
    }
    CHECK(linear_oracle_marginal(*L, g).assignment[1] == 1);

    Rng rng(1);
    for (int rep = 0; rep < 30; ++rep) {
      const auto gr = random_gradient(L->dimension(), rng);
      const OracleResult r = linear_oracle_marginal(*L, gr);
      double best = 1e300;
      for (std::size_t code = 0; code < 16; ++code) best = std::min(best, vertex_value(*L, gr, to::bits(code, 4)));
      CHECK(r.value == doctest::Approx(best).epsilon(1e-12));
      CHECK(vertex_value(*L, gr, r.assignment) == doctest::Approx(r.value).epsilon(1e-12));
      CHECK(r.point == indicator_point(*L, r.assignment));
    }

    std::vector<VarId> many(23);
    for (std::size_t i = 0; i < many.size(); ++i) many[i] = 100 + i;
    const LayoutPtr big = make_layout(many, 1);
    CHECK_THROWS_AS(linear_oracle_marginal(*big, std::vector<double>(big->dimension(), 0.0)), CapacityError);
  }

  TEST_CASE("local oracle: feasibility and relaxation dominance") {
    const LayoutPtr L = make_layout({3, 4, 5}, 2);
    const OracleResult z = linear_oracle_local(*L, std::vector<double>(L->dimension(), 0.0));
    CHECK(std::abs(z.value) < 1e-12);
    Rng rng(5);
    for (int rep = 0; rep < 40; ++rep) {
      const auto g = random_gradient(L->dimension(), rng);
      const OracleResult loc = linear_oracle_local(*L, g);
      const OracleResult mar = linear_oracle_marginal(*L, g);
      CHECK(loc.value <= mar.value + 1e-9);
      const MomentSet s(L, loc.point);
      CHECK(consistency_residual(s) < 1e-7);
      CHECK(simplex_residual(s) < 1e-7);
    }
    // K = 3 over four variables
    const LayoutPtr L3 = make_layout({0, 1, 2, 3}, 3);
    for (int rep = 0; rep < 10; ++rep) {
      const auto g = random_gradient(L3->dimension(), rng);
      const OracleResult loc = linear_oracle_local(*L3, g);
      CHECK(loc.value <= linear_oracle_marginal(*L3, g).value + 1e-9);
      CHECK(consistency_residual(MomentSet(L3, loc.point)) < 1e-7);
    }
  }

  TEST_CASE("local relaxation is strictly looser on a frustrated cycle") {
    // Reward disagreement on all three pairs: no joint assignment achieves it,
    // the half-integral local point does.
    const LayoutPtr L = make_layout({0, 1, 2}, 2);
    std::vector<double> g(L->dimension(), 0.0);
    for (std::size_t k = 3; k < 6; ++k) {
      g[L->offset(k) + 1] = -1.0;
      g[L->offset(k) + 2] = -1.0;
    }
    const double loc = linear_oracle_local(*L, g).value;
    const double mar = linear_oracle_marginal(*L, g).value;
    CHECK(loc == doctest::Approx(-3.0));
    CHECK(mar == doctest::Approx(-2.0));
  }

  TEST_CASE("dense simplex LP") {
    LinearProgram lp;
    lp.n_vars = 3;
    lp.rows = {{1, 1, 1}, {1, -1, 0}};
    lp.rhs = {1, 0};
    lp.cost = {-1, -1, 0.5};
    const LpSolution s = solve_lp(lp);
    CHECK(s.value == doctest::Approx(-1.0));
    CHECK(s.x[0] == doctest::Approx(0.5));
    CHECK(s.x[1] == doctest::Approx(0.5));

    // redundant equality rows survive phase 1
    lp.rows.push_back({2, 2, 2});
    lp.rhs.push_back(2);
    CHECK(solve_lp(lp).value == doctest::Approx(-1.0));

    LinearProgram infeasible;
    infeasible.n_vars = 1;
    infeasible.rows = {{1}};
    infeasible.rhs = {-1};
    infeasible.cost = {1};
    CHECK_THROWS_AS(solve_lp(infeasible), InternalError);
  }

  TEST_CASE("polytope recovery on population moments") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const AdfaModel model = random_model(4, 7, {StructureKind::kTree}, 40 + seed);
      const MomentSet src = population_anchor_moments(model, 2);
      const LayoutPtr target = make_layout(latent_ids(model), 2);
      for (Constraint c : {Constraint::kMarginal, Constraint::kLocal}) {
        RecoveryConfig cfg;
        cfg.constraint = c;
        const PolytopeRecovery r = recover_polytope(src, target, model.anchors(), model.space(), cfg);
        CHECK(r.converged);
        CHECK(r.gap <= 1e-4);
        for (std::size_t t = 1; t < r.objective_trace.size(); ++t)
          CHECK(r.objective_trace[t] <= r.objective_trace[t - 1] + 1e-15);
        CHECK(consistency_residual(r.moments) < 1e-6);
        CHECK(simplex_residual(r.moments) < 1e-9);
        for (std::size_t k = 0; k < target->subset_count(); ++k) {
          const auto got = r.moments.table(k);
          CHECK(to::max_abs_diff({got.begin(), got.end()}, to::joint_table(model, target->subset(k))) < 2e-3);
        }
      }
    }
  }

  TEST_CASE("polytope recovery with the harmonic step and a regularizer") {
    const AdfaModel model = random_model(3, 5, {StructureKind::kTree}, 12);
    const MomentSet src = population_anchor_moments(model, 2);
    const LayoutPtr target = make_layout(latent_ids(model), 2);
    RecoveryConfig cfg;
    cfg.step_rule = StepRule::kHarmonic;
    const PolytopeRecovery h = recover_polytope(src, target, model.anchors(), model.space(), cfg);
    for (std::size_t t = 1; t < h.objective_trace.size(); ++t)
      CHECK(h.objective_trace[t] <= h.objective_trace[t - 1] + 1e-15);
    CHECK(consistency_residual(h.moments) < 1e-6);

    cfg.lambda = 0.5;
    CHECK_THROWS_AS(recover_polytope(src, target, model.anchors(), model.space(), cfg), InvalidArgument);
    const std::vector<double> indep = uniform_point(*target);
    const PolytopeRecovery reg = recover_polytope(src, target, model.anchors(), model.space(), cfg, indep);
    CHECK(consistency_residual(reg.moments) < 1e-6);

    cfg.constraint = Constraint::kSimplex;
    CHECK_THROWS_AS(recover_polytope(src, target, model.anchors(), model.space(), cfg), InvalidArgument);
  }

  TEST_CASE("recover_moments dispatches and is thread-count invariant") {
    const AdfaModel model = random_model(5, 8, {StructureKind::kTree}, 77);
    const MomentSet src = population_anchor_moments(model, 2);
    const auto targets = latent_ids(model);
    for (Constraint c : {Constraint::kSimplex, Constraint::kLocal, Constraint::kMarginal}) {
      RecoveryConfig cfg;
      cfg.constraint = c;
      cfg.lambda = 0.01;
      const RecoveredMoments one = recover_moments(src, targets, 2, model.anchors(), model.space(), cfg, 1);
      const RecoveredMoments four = recover_moments(src, targets, 2, model.anchors(), model.space(), cfg, 4);
      CHECK(one.moments.values() == four.moments.values());
      CHECK(simplex_residual(one.moments) < 1e-9);
      if (c != Constraint::kSimplex) CHECK(consistency_residual(one.moments) < 1e-6);
      // simplex singletons are recovered without the regularizer; polytope
      // tables are only as exact as the gap tolerance
      const VarId y0[] = {targets[0]};
      const double tol = c == Constraint::kSimplex ? 1e-6 : 2e-3;
      CHECK(to::max_abs_diff(one.moments.at(y0).table(), to::joint_table(model, {targets[0]})) < tol);
    }
  }

  TEST_CASE("sources for a subset are its anchors, observed ids map to themselves") {
    const AdfaModel model = random_model(3, 6, {StructureKind::kTree}, 1);
    const VarId ids[] = {4, 6, 8};
    CHECK(source_ids(model.anchors(), model.space(), ids) == std::vector<VarId>{0, 2, 4});
  }
}
