#include <doctest.h>

#include "adfa/error.hpp"
#include "adfa/inference.hpp"
#include "adfa/moments.hpp"
#include "adfa/sampling.hpp"
#include "adfa/simplex_descent.hpp"
#include "oracles.hpp"

using namespace adfa;
namespace to = testing_oracles;

namespace {

BinaryDataset rows_of(std::size_t n, const std::vector<std::vector<std::uint8_t>>& rows) {
  std::vector<std::uint8_t> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return BinaryDataset(n, flat);
}

AnchorMap single_anchor(double p11, double p10) { return AnchorMap({0}, {{p11, p10}}); }

}  // namespace

TEST_SUITE("moments") {
  TEST_CASE("empirical moments by hand") {
    const BinaryDataset d = rows_of(2, {{0, 0}, {1, 1}, {1, 1}, {0, 1}});
    const VarId x1[] = {0};
    const SubsetMoment m1 = empirical_moment(d, x1);
    CHECK(m1.table() == std::vector<double>{0.5, 0.5});
    const VarId x12[] = {0, 1};
    // (x1, x2) rows: (0,0), (1,1), (1,1), (0,1); x1 is bit 0
    CHECK(empirical_moment(d, x12).table() == std::vector<double>{0.25, 0.0, 0.25, 0.5});

    const std::vector<std::vector<VarId>> subsets{{0}, {1}, {0, 1}};
    const auto all = empirical_moments(d, subsets);
    CHECK(all.size() == 3);
    CHECK(all[1].table() == std::vector<double>{0.25, 0.75});
    for (const auto& m : all) {
      double s = 0.0;
      for (double v : m.table()) s += v;
      CHECK(s == 1.0);
    }
    const VarId bad[] = {5};
    CHECK_THROWS_AS(empirical_moment(d, bad), InvalidArgument);
  }

  TEST_CASE("empirical moments converge to the population") {
    const AdfaModel model = random_model(3, 6, {StructureKind::kTree}, 2);
    const BinaryDataset d = sample_dataset(model, 200000, 9);
    const std::vector<VarId> ids{0, 1, 4};
    const VarId* p = ids.data();
    CHECK(to::max_abs_diff(empirical_moment(d, {p, 3}).table(), to::joint_table(model, ids)) < 0.01);
  }

  TEST_CASE("mixing matrix construction") {
    const VariableSpace space(1, 1);
    const VarId y[] = {1};
    const MixingMatrix R = build_mixing(single_anchor(0.8, 0.1), space, y);
    const auto dense = R.dense();
    CHECK(dense[0][0] == doctest::Approx(0.9));
    CHECK(dense[0][1] == doctest::Approx(0.2));
    CHECK(dense[1][0] == doctest::Approx(0.1));
    CHECK(dense[1][1] == doctest::Approx(0.8));
    CHECK(R.determinant() == doctest::Approx(0.9 * 0.8 - 0.2 * 0.1));

    const VariableSpace two(2, 2);
    const AnchorMap same({0, 1}, {{0.8, 0.1}, {0.8, 0.1}});
    const VarId yy[] = {2, 3};
    const MixingMatrix R2 = build_mixing(same, two, yy);
    CHECK(R2.entry(3, 3) == doctest::Approx(0.64));

    const AnchorMap perfect({0, 1}, {{1.0, 0.0}, {1.0, 0.0}});
    const auto id = build_mixing(perfect, two, yy).dense();
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t z = 0; z < 4; ++z) CHECK(id[a][z] == (a == z ? 1.0 : 0.0));

    CHECK_THROWS_AS(build_mixing(AnchorMap({0}, {{0.5, 0.5 + 1e-14}}), space, y), ConditioningError);
  }

  TEST_CASE("mixing matrices are column stochastic, invertible, and map latent to anchor moments") {
    Rng rng(7);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const AdfaModel model = random_model(4, 7, {StructureKind::kIndegree, 2}, seed);
      const std::vector<std::vector<VarId>> subsets{{7}, {8, 10}, {7, 9, 10}};
      for (const auto& ids : subsets) {
        const MixingMatrix R = build_mixing(model.anchors(), model.space(), ids);
        const auto dense = R.dense();
        for (std::size_t z = 0; z < R.dimension(); ++z) {
          double col = 0.0;
          for (std::size_t a = 0; a < R.dimension(); ++a) col += dense[a][z];
          CHECK(col == doctest::Approx(1.0).epsilon(1e-12));
        }
        CHECK(std::abs(R.determinant()) > 0.0);
        std::vector<VarId> anchors;
        for (VarId id : ids) anchors.push_back(model.anchors().anchor_of(id - 7));
        const auto mu_y = to::joint_table(model, ids);
        const auto mu_a = to::joint_table(model, anchors);
        CHECK(to::max_abs_diff(R.apply(mu_y), mu_a) < 1e-10);

        // apply_transpose is the adjoint of apply
        std::vector<double> u(R.dimension()), v(R.dimension());
        for (auto& e : u) e = uniform01(rng);
        for (auto& e : v) e = uniform01(rng);
        const auto ru = R.apply(u), rtv = R.apply_transpose(v);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
          lhs += v[i] * ru[i];
          rhs += u[i] * rtv[i];
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("determinant matches dense elimination for random anchors") {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<AnchorConditional> conds;
      for (int k = 0; k < 3; ++k) {
        const double a = uniform01(rng), b = uniform01(rng);
        conds.push_back({std::max(a, b), std::min(a, b)});
      }
      const VariableSpace space(3, 3);
      const VarId ids[] = {3, 4, 5};
      const MixingMatrix R = build_mixing(AnchorMap({0, 1, 2}, conds), space, ids);
      auto A = R.dense();
      double det = 1.0;
      const std::size_t d = A.size();
      for (std::size_t c = 0; c < d; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < d; ++r)
          if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        if (piv != c) {
          std::swap(A[piv], A[c]);
          det = -det;
        }
        det *= A[c][c];
        for (std::size_t r = c + 1; r < d; ++r) {
          const double f = A[r][c] / A[c][c];
          for (std::size_t k = c; k < d; ++k) A[r][k] -= f * A[c][k];
        }
      }
      CHECK(R.determinant() == doctest::Approx(det).epsilon(1e-9));
      CHECK(det != 0.0);
    }
  }

  TEST_CASE("simplex recovery examples") {
    const VariableSpace space(1, 1);
    const VarId y[] = {1};
    const MixingMatrix R = build_mixing(single_anchor(0.8, 0.1), space, y);
    RecoveryConfig cfg;
    cfg.constraint = Constraint::kSimplex;
    const SubsetMoment a({0}, {0.55, 0.45});
    const SimplexRecovery r = recover_simplex(a, R, cfg);
    CHECK(r.converged);
    CHECK(r.moment[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.moment[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(r.moment.ids() == std::vector<VarId>{1});

    const MixingMatrix I = build_mixing(single_anchor(1.0, 0.0), space, y);
    const SimplexRecovery ri = recover_simplex(SubsetMoment({0}, {0.3, 0.7}), I, cfg);
    CHECK(ri.moment[1] == doctest::Approx(0.7).epsilon(1e-9));

    // a huge regularizer pulls the answer onto the independence table
    cfg.lambda = 1e8;
    const std::vector<double> indep{0.2, 0.8};
    const SimplexRecovery rl = recover_simplex(a, R, cfg, indep);
    CHECK(rl.moment[1] == doctest::Approx(0.8).epsilon(1e-6));
  }

  TEST_CASE("simplex recovery is consistent on population anchor moments") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const AdfaModel model = random_model(4, 6, {StructureKind::kTree}, seed);
      RecoveryConfig cfg;
      cfg.constraint = Constraint::kSimplex;
      const std::vector<std::vector<VarId>> subsets{{6}, {6, 8}, {7, 8, 9}};
      for (const auto& ids : subsets) {
        const MixingMatrix R = build_mixing(model.anchors(), model.space(), ids);
        std::vector<VarId> src(R.sources());
        std::sort(src.begin(), src.end());
        const SubsetMoment a(src, to::joint_table(model, src));
        const SimplexRecovery r = recover_simplex(a, R, cfg);
        CHECK(to::max_abs_diff(r.moment.table(), to::joint_table(model, ids)) < 1e-6);
        // never worse than the uniform start
        const std::vector<double> uni(R.dimension(), 1.0 / static_cast<double>(R.dimension()));
        CHECK(r.objective <= kl_divergence(aligned_source_table(a, R), R.apply(uni), 1e-12) + 1e-15);
      }
    }
  }

  TEST_CASE("independent marginal vector") {
    const std::vector<SubsetMoment> s{SubsetMoment({3}, {0.8, 0.2}), SubsetMoment({4}, {0.5, 0.5})};
    const VarId both[] = {3, 4};
    const SubsetMoment t = independent_marginal_vector(s, both);
    const std::vector<double> want{0.4, 0.1, 0.4, 0.1};
    CHECK(to::max_abs_diff(t.table(), want) < 1e-15);
    const VarId one[] = {3};
    CHECK(independent_marginal_vector(s, one).table() == s[0].table());
    const std::vector<SubsetMoment> fair{SubsetMoment({3}, {0.5, 0.5}), SubsetMoment({4}, {0.5, 0.5})};
    CHECK(independent_marginal_vector(fair, both).table() == std::vector<double>(4, 0.25));
    const VarId missing[] = {3, 9};
    CHECK_THROWS_AS(independent_marginal_vector(s, missing), InvalidArgument);
  }

  TEST_CASE("recovery config validation and enum round trips") {
    RecoveryConfig c;
    c.gap_tol = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.gap_tol = 1e-4;
    c.lambda = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    for (Constraint k : {Constraint::kSimplex, Constraint::kLocal, Constraint::kMarginal})
      CHECK(constraint_from_string(to_string(k)) == k);
    for (StepRule k : {StepRule::kLineSearch, StepRule::kHarmonic}) CHECK(step_rule_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(constraint_from_string("cycle"), InvalidArgument);
  }

  TEST_CASE("moment set layout and residuals") {
    const LayoutPtr L = make_layout({5, 6, 7}, 2);
    CHECK(L->subset_count() == 6);
    CHECK(L->dimension() == 3 * 2 + 3 * 4);
    CHECK(L->subset(3) == std::vector<VarId>{5, 6});
    const AdfaModel model = random_model(3, 5, {StructureKind::kTree}, 4);
    const MomentSet pop = population_moment_set(ExactOracle(model), make_layout({5, 6, 7}, 3));
    CHECK(consistency_residual(pop) < 1e-15);
    CHECK(simplex_residual(pop) < 1e-14);
    const VarId pair[] = {5, 7};
    CHECK(to::max_abs_diff(pop.at(pair).table(), to::joint_table(model, {5, 7})) < 1e-14);

    std::vector<double> v = pop.values();
    v[0] += 0.01;
    v[1] -= 0.01;
    CHECK(consistency_residual(MomentSet(pop.layout_ptr(), v)) == doctest::Approx(0.01));
  }

  TEST_CASE("subset moment helpers") {
    const SubsetMoment m({2, 5}, {0.1, 0.2, 0.3, 0.4});
    const VarId keep[] = {5};
    CHECK(m.marginal(keep).table() == std::vector<double>{0.1 + 0.2, 0.3 + 0.4});
    const VarId order[] = {5, 2};
    CHECK(m.reordered(order) == std::vector<double>{0.1, 0.3, 0.2, 0.4});
    CHECK_THROWS_AS(SubsetMoment({5, 2}, {0.25, 0.25, 0.25, 0.25}), InvalidArgument);
    CHECK_THROWS_AS(SubsetMoment({1}, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(SubsetMoment({1}, {0.5, 0.6}).check_distribution(), InvalidArgument);
  }

  TEST_CASE("generalized KL agrees with the textbook sum on distributions") {
    const std::vector<double> p{0.1, 0.2, 0.7}, q{0.3, 0.3, 0.4};
    double direct = 0.0;
    for (int i = 0; i < 3; ++i) direct += p[i] * std::log(p[i] / q[i]);
    CHECK(kl_divergence(p, q, 1e-12) == doctest::Approx(direct).epsilon(1e-14));
    const std::vector<double> z{1.0, 0.0}, h{0.5, 0.5};
    CHECK(kl_divergence(z, h, 1e-12) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
}
