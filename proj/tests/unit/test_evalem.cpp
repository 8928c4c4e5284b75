#include <doctest.h>

#include <cmath>

#include "adfa/error.hpp"
#include "adfa/evalem.hpp"
#include "adfa/inference.hpp"
#include "adfa/sampling.hpp"
#include "oracles.hpp"

using namespace adfa;
namespace to = testing_oracles;

namespace {

// Bayes rule by enumeration over raw parameters.
std::vector<double> brute_posterior(const AdfaModel& model, const std::vector<std::uint8_t>& x) {
  const std::size_t m = model.m_latent();
  std::vector<double> post(m, 0.0);
  double z = 0.0;
  for (std::size_t code = 0; code < (std::size_t{1} << m); ++code) {
    const auto y = to::bits(code, m);
    double w = to::prior(model.latent(), y);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double q0 = to::neg(model, j, y);
      w *= x[j] ? 1.0 - q0 : q0;
    }
    z += w;
    for (std::size_t i = 0; i < m; ++i)
      if (y[i]) post[i] += w;
  }
  for (double& p : post) p /= z;
  return post;
}

double brute_evidence(const AdfaModel& model, const std::vector<std::uint8_t>& x) {
  double z = 0.0;
  for (std::size_t code = 0; code < (std::size_t{1} << model.m_latent()); ++code) {
    const auto y = to::bits(code, model.m_latent());
    double w = to::prior(model.latent(), y);
    for (std::size_t j = 0; j < x.size(); ++j) w *= x[j] ? 1.0 - to::neg(model, j, y) : to::neg(model, j, y);
    z += w;
  }
  return z;
}

AdfaModel one_latent(double prior, double f, double l) {
  const double p[] = {prior};
  NoisyOrLoadings L(1, 1, {f}, {l});
  return AdfaModel(VariableSpace(1, 1), LatentNetwork::independent(p), L, AnchorMap::from_loadings(L, {0}));
}

// Same loadings and latent marginals, no latent edges.
AdfaModel independent_version(const AdfaModel& m) {
  std::vector<double> p(m.m_latent());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = to::joint_table(m, {m.space().latent_id(i)})[1];
  return AdfaModel(m.space(), LatentNetwork::independent(p), m.loadings(), m.anchors());
}

}  // namespace

TEST_SUITE("evalem") {
  TEST_CASE("exact posterior") {
    // P(x=1|y=1) = 1 - 0.8 * 0.5, P(x=1|y=0) = 0.2
    const AdfaModel weak = one_latent(0.3, 0.5, 0.2);
    const std::uint8_t on[] = {1}, off[] = {0};
    CHECK(posterior_exact(weak, on)[0] == doctest::Approx(0.3 * 0.6 / (0.3 * 0.6 + 0.7 * 0.2)).epsilon(1e-14));
    CHECK(posterior_exact(weak, off)[0] == doctest::Approx(0.3 * 0.4 / (0.3 * 0.4 + 0.7 * 0.8)).epsilon(1e-14));

    // near-perfect anchor: P(y=1|a=1) = 0.3*0.999 / (0.3*0.999 + 0.7*0.001)
    const AdfaModel sharp = one_latent(0.3, 0.001, 0.001);
    const double a1 = 0.3 * (1.0 - 0.999 * 0.001), a0 = 0.7 * 0.001;
    CHECK(posterior_exact(sharp, on)[0] == doctest::Approx(a1 / (a1 + a0)).epsilon(1e-12));
    CHECK(posterior_exact(sharp, on)[0] > 0.99);

    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const AdfaModel m = random_model(4, 6, {StructureKind::kIndegree, 2}, 20 + seed);
      const PosteriorEngine engine(m);
      std::vector<double> total(4, 0.0);
      for (std::size_t code = 0; code < 64; ++code) {
        const auto x = to::bits(code, 6);
        const auto got = posterior_exact(m, x);
        const auto want = brute_posterior(m, x);
        CHECK(to::max_abs_diff(got, want) < 1e-12);
        CHECK(to::max_abs_diff(engine.posterior(x), want) < 1e-12);
        const double px = std::exp(engine.log_evidence(x));
        CHECK(px == doctest::Approx(brute_evidence(m, x)).epsilon(1e-10));
        for (std::size_t i = 0; i < 4; ++i) total[i] += got[i] * px;
      }
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(total[i] - to::joint_table(m, {m.space().latent_id(i)})[1]) < 1e-9);
    }

    // clamped evidence
    const AdfaModel m = random_model(3, 5, {StructureKind::kTree}, 2);
    PartialAssignment ev(3);
    ev[1] = true;
    const std::uint8_t x[] = {0, 1, 0, 1, 1};
    CHECK(PosteriorEngine(m).posterior(x, ev)[1] == doctest::Approx(1.0).epsilon(1e-14));
    const std::uint8_t bad[] = {0, 1};
    CHECK_THROWS_AS(posterior_exact(m, bad), InvalidArgument);
  }

  TEST_CASE("Gibbs converges to the exact posterior") {
    const AdfaModel m = random_model(3, 8, {StructureKind::kTree}, 4);
    const BinaryDataset d = sample_dataset(m, 5, 1);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const auto x = d.observed(r);
      const auto g = gibbs_posterior(m, x, 5000, 500, 7 + r);
      CHECK(to::max_abs_diff(g, posterior_exact(m, x)) < 0.02);
      CHECK(gibbs_posterior(m, x, 5000, 500, 7 + r) == g);
    }
    CHECK_THROWS_AS(gibbs_posterior(m, d.observed(0), 10, 10, 0), InvalidArgument);

    // a perfect anchor pins its latent
    NoisyOrLoadings L(1, 1, {1e-6}, {0.0});
    const double p[] = {0.5};
    const AdfaModel perfect(VariableSpace(1, 1), LatentNetwork::independent(p), L, AnchorMap::from_loadings(L, {0}));
    const std::uint8_t on[] = {1};
    for (const Assignment& s : gibbs_samples(perfect, on, 5, 50, 10, 3)) CHECK(s[0] == 1);
    CHECK(gibbs_posterior(perfect, on, 50, 5, 3)[0] == 1.0);
  }

  TEST_CASE("held-out latent likelihood") {
    const LatentNetwork uniform = LatentNetwork::independent(std::vector<double>{0.5, 0.5, 0.5});
    const BinaryDataset rows(1, {0, 0}, 3, {1, 0, 1, 0, 0, 0});
    CHECK(heldout_latent_loglik(uniform, rows) == doctest::Approx(-3.0 * std::log(2.0)).epsilon(1e-14));

    const LatentNetwork certain = LatentNetwork::independent(std::vector<double>{1.0, 0.5, 0.5});
    const BinaryDataset miss(1, {0}, 3, {0, 0, 0});
    CHECK(heldout_latent_loglik(certain, miss) == doctest::Approx(std::log(1e-12) - 2.0 * std::log(2.0)));

    const AdfaModel truth = random_model(5, 5, {StructureKind::kTree}, 31);
    const BinaryDataset sample = sample_dataset(truth, 10000, 2);
    const double own = heldout_latent_loglik(truth.latent(), sample);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const AdfaModel other = random_model(5, 5, {StructureKind::kTree}, 900 + seed);
      CHECK(own >= heldout_latent_loglik(other.latent(), sample) - 0.01);
    }
    CHECK(own >= heldout_latent_loglik(independent_version(truth).latent(), sample) - 0.01);
  }

  TEST_CASE("last-tag ranking") {
    // Y0 and Y1 strongly tied, Y2 independent and a priori more likely
    const LatentNetwork net({{}, {0}, {}}, {{{0.7, 0.3}}, {{0.95, 0.05}, {0.1, 0.9}}, {{0.6, 0.4}}});
    std::vector<double> f(3 * 3, 1.0);
    for (std::size_t i = 0; i < 3; ++i) f[i * 3 + i] = 0.4;
    NoisyOrLoadings L(3, 3, f, {0.02, 0.02, 0.02});
    const AdfaModel m(VariableSpace(3, 3), net, L, AnchorMap::from_loadings(L, {0, 1, 2}));
    const PosteriorEngine engine(m);
    const std::uint8_t x[] = {0, 0, 0};
    const std::size_t revealed[] = {0};
    CHECK(last_tag_rank(engine, 3, x, revealed) == std::vector<std::size_t>{1, 2});

    // identical anchors and silent observations: the order follows the priors
    std::vector<double> g(4 * 4, 1.0);
    for (std::size_t i = 0; i < 4; ++i) g[i * 4 + i] = 0.5;
    NoisyOrLoadings G(4, 4, g, {0.05, 0.05, 0.05, 0.05});
    const std::uint8_t none[] = {0, 0, 0, 0};
    const PosteriorEngine ie(AdfaModel(VariableSpace(4, 4),
                                       LatentNetwork::independent(std::vector<double>{0.2, 0.6, 0.4, 0.8}), G,
                                       AnchorMap::from_loadings(G, {0, 1, 2, 3})));
    CHECK(last_tag_rank(ie, 4, none, {}) == std::vector<std::size_t>{3, 1, 2, 0});
    const std::size_t out_of_range[] = {7};
    CHECK_THROWS_AS(last_tag_rank(ie, 4, none, out_of_range), InvalidArgument);
  }

  TEST_CASE("last-tag accuracy: tree beats independent on correlated data") {
    ParamRanges r;
    r.min_cpt_gap = 0.6;
    r.edge_probability = 0.15;
    const AdfaModel truth = random_model(8, 20, {StructureKind::kTree}, 11, r);
    const BinaryDataset eval = sample_dataset(truth, 5000, 12);
    const LastTagReport tree = last_tag_accuracy(truth, eval, 3, 4);
    const LastTagReport flat = last_tag_accuracy(independent_version(truth), eval, 3, 4);
    CHECK(tree.evaluated == flat.evaluated);
    CHECK(tree.evaluated > 500);
    CHECK(tree.accuracy() >= flat.accuracy() + 0.03);
    CHECK(last_tag_accuracy(truth, eval, 3, 1).correct == tree.correct);
  }

  TEST_CASE("auxiliary distribution reproduces the noisy-or") {
    const double f[] = {0.3, 0.6, 0.8};
    for (std::size_t code = 0; code < 8; ++code) {
      const auto y = to::bits(code, 3);
      const auto p = aux_distribution(f, 0.1, y);
      double q0 = 0.9;
      for (std::size_t i = 0; i < 3; ++i)
        if (y[i]) q0 *= f[i];
      CHECK(p[4] == doctest::Approx(q0).epsilon(1e-15));
      double sum = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        sum += p[k];
        if (k < 3 && !y[k]) CHECK(p[k] == 0.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    }
    const std::uint8_t y[] = {1, 0, 1};
    const auto p = aux_distribution(f, 0.1, y);
    CHECK(p[0] == doctest::Approx(0.7));
    CHECK(p[2] == doctest::Approx(0.3 * 0.2));
    CHECK(p[3] == doctest::Approx(0.3 * 0.8 * 0.1));
  }

  TEST_CASE("auxiliary counts against independent firing patterns") {
    // Slots fire independently; A is the first that fires.  Enumerate patterns.
    const NoisyOrLoadings L(3, 2, {0.3, 0.5, 1.0, 0.6, 0.2, 0.9}, {0.1, 0.25});
    const BinaryDataset d(2, {1, 0, 1, 1, 0, 1});
    const std::vector<std::vector<Assignment>> samples{{{1, 1, 0}, {0, 1, 1}}, {{1, 0, 1}}, {{0, 0, 0}}};
    const AuxCounts got = accumulate_aux_counts(L, d, samples);

    AuxCounts want(3, 2);
    for (std::size_t r = 0; r < 3; ++r)
      for (const Assignment& y : samples[r])
        for (std::size_t j = 0; j < 2; ++j) {
          std::vector<double> slot_f{L.failure(0, j), L.failure(1, j), L.failure(2, j), 1.0 - L.leak(j)};
          std::vector<bool> active{y[0] == 1, y[1] == 1, y[2] == 1, true};
          std::vector<double> first(5, 0.0);
          for (std::size_t pat = 0; pat < 16; ++pat) {
            double w = 1.0;
            std::size_t a = 4;
            for (std::size_t k = 0; k < 4; ++k) {
              const bool fires = pat >> k & 1U;
              if (!active[k]) {
                if (fires) w = 0.0;
                continue;
              }
              w *= fires ? 1.0 - slot_f[k] : slot_f[k];
              if (fires && a == 4) a = k;
            }
            first[a] += w;
          }
          if (!d.observed(r)[j]) {
            want.fired_at(j, 4) += 1.0;
            for (std::size_t k = 0; k < 4; ++k)
              if (active[k]) want.tried_at(j, k) += 1.0;
            continue;
          }
          const double fire = 1.0 - first[4];
          double reach = 1.0;
          for (std::size_t k = 0; k < 4; ++k) {
            if (!active[k]) continue;
            want.fired_at(j, k) += first[k] / fire;
            want.tried_at(j, k) += reach;
            reach -= first[k] / fire;
          }
        }
    CHECK(to::max_abs_diff(got.fired, want.fired) < 1e-12);
    CHECK(to::max_abs_diff(got.tried, want.tried) < 1e-12);
    // tried counts never exceed the number of (row, sample) pairs where the slot is active
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 4; ++k) CHECK(got.tried_at(j, k) >= got.fired_at(j, k) - 1e-12);
  }

  TEST_CASE("M-step arithmetic") {
    CHECK(failure_from_counts(3.0, 10.0) == doctest::Approx(0.7));
    CHECK_THROWS_AS(failure_from_counts(1.0, 0.0), InvalidArgument);
    const NoisyOrLoadings L(2, 1, {0.5, 1.0}, {0.1});
    AuxCounts c(2, 1);
    c.fired_at(0, 0) = 3.0;
    c.tried_at(0, 0) = 10.0;
    c.fired_at(0, 1) = 5.0;  // no edge: ignored
    c.tried_at(0, 1) = 5.0;
    c.fired_at(0, 2) = 1.0;
    c.tried_at(0, 2) = 4.0;
    const NoisyOrLoadings out = apply_aux_counts(L, c);
    CHECK(out.failure(0, 0) == doctest::Approx(0.7));
    CHECK(out.failure(1, 0) == 1.0);
    CHECK(out.leak(0) == doctest::Approx(0.25));
    AuxCounts empty(2, 1);
    CHECK(apply_aux_counts(L, empty) == L);
  }

  TEST_CASE("EM: monotone inner steps and stationarity at the truth") {
    const AdfaModel truth = random_model(3, 10, {StructureKind::kTree}, 44);
    const BinaryDataset d = sample_dataset(truth, 40000, 5);
    EmOptions opt;
    opt.outer_steps = 1;
    opt.seed = 9;
    opt.threads = 4;
    std::size_t calls = 0;
    const EmResult r = em_refine(truth, d, opt, [&](std::size_t, const AdfaModel&) { ++calls; });
    CHECK(calls == 1);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].loglik_after >= r.trace[0].loglik_before);
    CHECK(r.trace[0].max_change < 0.02);
    CHECK(to::max_abs_diff(r.model.loadings().failures(), truth.loadings().failures()) < 0.02);
    CHECK(r.model.latent() == truth.latent());

    // from a perturbed start, every step is still monotone
    NoisyOrLoadings start = truth.loadings();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 10; ++j)
        if (start.has_edge(i, j) && truth.anchors().anchor_of(i) != j) start.set_failure(i, j, std::min(0.97, start.failure(i, j) + 0.15));
    const AdfaModel perturbed(truth.space(), truth.latent(), start, truth.anchors());
    opt.outer_steps = 3;
    const BinaryDataset small = d.slice(0, 3000);
    const EmResult p = em_refine(perturbed, small, opt);
    for (const EmStep& s : p.trace) CHECK(s.loglik_after >= s.loglik_before);
    opt.threads = 1;
    CHECK(em_refine(perturbed, small, opt).model == p.model);
  }
}
