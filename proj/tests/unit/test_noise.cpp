#include <doctest.h>

#include <random>

#include "adfa/error.hpp"
#include "adfa/noise.hpp"

using namespace adfa;

namespace {

TripletParams reference_params() {
  TripletParams p;
  p.prior1 = 0.4;
  p.w1 = {0.8, 0.1};
  p.w2 = {0.7, 0.2};
  p.x = {0.9, 0.3};
  return p;
}

// Hand-assembled tensor, independent of build_triplet.
std::array<double, 8> assemble(const TripletParams& p) {
  std::array<double, 8> t{};
  for (int y = 0; y < 2; ++y) {
    const double py = y ? p.prior1 : 1.0 - p.prior1;
    for (int c = 0; c < 8; ++c) {
      const int w1 = c & 1, w2 = c >> 1 & 1, x = c >> 2 & 1;
      t[static_cast<std::size_t>(c)] += py * p.w1.prob(w1, y) * p.w2.prob(w2, y) * p.x.prob(x, y);
    }
  }
  return t;
}

void check_params(const TripletParams& got, const TripletParams& want, double tol) {
  CHECK(std::abs(got.prior1 - want.prior1) < tol);
  for (auto [g, w] : {std::pair{got.w1, want.w1}, std::pair{got.w2, want.w2}, std::pair{got.x, want.x}}) {
    CHECK(std::abs(g.p1_given_1 - w.p1_given_1) < tol);
    CHECK(std::abs(g.p1_given_0 - w.p1_given_0) < tol);
  }
}

// Rows of (w1, w2, x) columns 0..2 plus the latent, drawn with the standard library.
BinaryDataset draw(const TripletParams& p, std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> obs;
  std::vector<std::int8_t> lat;
  for (std::size_t r = 0; r < rows; ++r) {
    const int y = u(rng) < p.prior1;
    lat.push_back(static_cast<std::int8_t>(y));
    for (const AnchorConditional* c : {&p.w1, &p.w2, &p.x}) obs.push_back(u(rng) < (y ? c->p1_given_1 : c->p1_given_0));
  }
  return BinaryDataset(3, std::move(obs), 1, std::move(lat));
}

}  // namespace

TEST_SUITE("noise") {
  TEST_CASE("tensor construction") {
    const TripletParams p = reference_params();
    const TripletTensor t = build_triplet(p);
    const auto ref = assemble(p);
    double sum = 0.0;
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(t.table()[c] == doctest::Approx(ref[c]).epsilon(1e-15));
      sum += t.table()[c];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(t(1, 0, 1) == t.table()[5]);
    CHECK_THROWS_AS(TripletTensor({0.5, 0.5, 0.5, 0, 0, 0, 0, 0}), InvalidArgument);
    CHECK_THROWS_AS(TripletTensor({-0.1, 0.6, 0.5, 0, 0, 0, 0, 0}), InvalidArgument);
  }

  TEST_CASE("decomposition round trip") {
    const TripletParams p = reference_params();
    const TripletParams got = triplet_decompose(build_triplet(p));
    check_params(got, p, 1e-6);
    check_params(triplet_decompose(build_triplet(p), true), p, 1e-6);

    // components supplied in the opposite orientation come back relabeled
    TripletParams flipped;
    flipped.prior1 = 0.6;
    flipped.w1 = {p.w1.p1_given_0, p.w1.p1_given_1};
    flipped.w2 = {p.w2.p1_given_0, p.w2.p1_given_1};
    flipped.x = {p.x.p1_given_0, p.x.p1_given_1};
    check_params(triplet_decompose(build_triplet(flipped)), p, 1e-6);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int rep = 0; rep < 200; ++rep) {
      TripletParams q;
      q.prior1 = u(rng);
      for (AnchorConditional* c : {&q.w1, &q.w2, &q.x}) {
        c->p1_given_1 = u(rng);
        c->p1_given_0 = u(rng);
      }
      if (q.w1.p1_given_1 < q.w1.p1_given_0) std::swap(q.w1.p1_given_1, q.w1.p1_given_0), q.w2 = {q.w2.p1_given_0, q.w2.p1_given_1},
                                                q.x = {q.x.p1_given_0, q.x.p1_given_1}, q.prior1 = 1.0 - q.prior1;
      bool separated = true;
      for (const AnchorConditional* c : {&q.w1, &q.w2, &q.x}) separated &= std::abs(c->p1_given_1 - c->p1_given_0) > 0.1;
      if (!separated) continue;
      const TripletTensor t = build_triplet(q);
      const TripletParams r = triplet_decompose(t);
      const auto back = assemble(r);
      double err = 0.0;
      for (std::size_t c = 0; c < 8; ++c) err = std::max(err, std::abs(back[c] - t.table()[c]));
      CHECK(err < 1e-6);
      check_params(r, q, 1e-6);
    }
  }

  TEST_CASE("degenerate tensors are rejected") {
    TripletParams same = reference_params();
    same.w1 = {0.4, 0.4};
    same.w2 = {0.3, 0.3};
    same.x = {0.5, 0.5};
    CHECK_THROWS_AS(triplet_decompose(build_triplet(same)), ConditioningError);
    TripletParams flat_x = reference_params();
    flat_x.x = {0.6, 0.6};
    CHECK_THROWS_AS(triplet_decompose(build_triplet(flat_x)), ConditioningError);
  }

  TEST_CASE("sampled tensor at large N") {
    const TripletParams p = reference_params();
    const BinaryDataset d = draw(p, 500000, 3);
    check_params(triplet_decompose(empirical_triplet(d, 0, 1, 2)), p, 5e-3);
  }

  TEST_CASE("empirical triplet counts") {
    const BinaryDataset d(3, {1, 0, 1, 1, 0, 1, 0, 0, 0, 1, 0, 1});
    const TripletTensor t = empirical_triplet(d, 0, 1, 2);
    CHECK(t(1, 0, 1) == doctest::Approx(0.75));
    CHECK(t(1, 0, 0) == 0.0);
    CHECK(t(0, 1, 0) == 0.0);
    CHECK(t(0, 0, 0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(empirical_triplet(d, 0, 0, 2), InvalidArgument);
    CHECK_THROWS_AS(empirical_triplet(d, 0, 1, 3), InvalidArgument);
  }

  TEST_CASE("singly labeled estimate: coverage") {
    std::size_t covered = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      std::mt19937_64 rng(seed);
      std::bernoulli_distribution a1(0.8), a0(0.15);
      std::vector<std::uint8_t> obs;
      std::vector<std::int8_t> lat;
      for (int r = 0; r < 200; ++r) {
        const int y = r % 2;
        lat.push_back(static_cast<std::int8_t>(y));
        obs.push_back(y ? a1(rng) : a0(rng));
        obs.push_back(0);
      }
      // unlabeled rows do not count
      for (int r = 0; r < 50; ++r) {
        lat.push_back(BinaryDataset::kUnlabeled);
        obs.push_back(1);
        obs.push_back(1);
      }
      const BinaryDataset d(2, std::move(obs), 1, std::move(lat));
      const SinglyLabeledEstimate e = singly_labeled_estimate(d, 0, 0);
      CHECK(e.labeled_y1 == 100);
      CHECK(e.labeled_y0 == 100);
      CHECK(e.half_width_y1 == doctest::Approx(std::sqrt(std::log(40.0) / 200.0)));
      ++total;
      if (std::abs(e.conditional.p1_given_1 - 0.8) <= e.half_width_y1 &&
          std::abs(e.conditional.p1_given_0 - 0.15) <= e.half_width_y0)
        ++covered;
    }
    CHECK(static_cast<double>(covered) >= 0.95 * static_cast<double>(total));
  }

  TEST_CASE("singly labeled estimate: perfect anchor and thresholds") {
    std::vector<std::uint8_t> obs;
    std::vector<std::int8_t> lat;
    for (int r = 0; r < 60; ++r) {
      lat.push_back(static_cast<std::int8_t>(r % 2));
      obs.push_back(static_cast<std::uint8_t>(r % 2));
    }
    const BinaryDataset d(1, obs, 1, lat);
    const SinglyLabeledEstimate e = singly_labeled_estimate(d, 0, 0);
    CHECK(e.conditional.p1_given_1 == doctest::Approx(31.0 / 32.0));
    CHECK(e.conditional.p1_given_0 == doctest::Approx(1.0 / 32.0));

    obs.resize(20);
    lat.resize(20);
    const BinaryDataset few(1, obs, 1, lat);
    CHECK_THROWS_AS(singly_labeled_estimate(few, 0, 0), PreconditionError);
    CHECK_NOTHROW(singly_labeled_estimate(few, 0, 0, 10));
    CHECK_THROWS_AS(singly_labeled_estimate(BinaryDataset(1, {0, 1}), 0, 0), InvalidArgument);
  }

  TEST_CASE("third view selection") {
    const TripletParams p = reference_params();
    const BinaryDataset base = draw(p, 20000, 9);
    // column 3 is pure noise, column 4 copies x: the copy wins over noise, x wins the tie
    std::mt19937_64 rng(1);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::uint8_t> obs;
    for (std::size_t r = 0; r < base.rows(); ++r) {
      const auto row = base.observed(r);
      obs.insert(obs.end(), row.begin(), row.end());
      obs.push_back(coin(rng));
      obs.push_back(row[2]);
    }
    const BinaryDataset d(5, std::move(obs));
    CHECK(pick_third_view(d, 0, 1) == 2);
    const std::size_t ex[] = {2};
    CHECK(pick_third_view(d, 0, 1, ex) == 4);
    CHECK_THROWS_AS(pick_third_view(BinaryDataset(2, {0, 1, 1, 0}), 0, 1), InvalidArgument);
  }
}
