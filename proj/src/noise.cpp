#include "adfa/noise.hpp"

#include <algorithm>
#include <cmath>

#include "adfa/error.hpp"
#include "adfa/moments.hpp"
#include "adfa/structure.hpp"

namespace adfa {

TripletTensor::TripletTensor(std::array<double, 8> table) : table_(table) {
  double sum = 0.0;
  for (double v : table_) {
    if (!std::isfinite(v) || v < -1e-8) throw InvalidArgument("triplet tensor entries must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-8) throw InvalidArgument("triplet tensor must sum to 1");
}

TripletTensor build_triplet(const TripletParams& p) {
  std::array<double, 8> t{};
  for (int y = 0; y < 2; ++y) {
    const double py = y ? p.prior1 : 1.0 - p.prior1;
    for (int idx = 0; idx < 8; ++idx)
      t[static_cast<std::size_t>(idx)] += py * p.w1.prob(idx & 1, y) * p.w2.prob(idx >> 1 & 1, y) * p.x.prob(idx >> 2 & 1, y);
  }
  return TripletTensor(t);
}

TripletTensor empirical_triplet(const BinaryDataset& data, std::size_t w1, std::size_t w2, std::size_t x) {
  if (data.rows() == 0) throw InvalidArgument("empirical triplet needs data");
  if (w1 >= data.n_observed() || w2 >= data.n_observed() || x >= data.n_observed()) {
    throw InvalidArgument("triplet view index out of range");
  }
  if (w1 == w2 || w1 == x || w2 == x) throw InvalidArgument("triplet views must be distinct");
  std::array<double, 8> t{};
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto o = data.observed(r);
    t[static_cast<std::size_t>(o[w1] | o[w2] << 1 | o[x] << 2)] += 1.0;
  }
  for (double& v : t) v /= static_cast<double>(data.rows());
  return TripletTensor(t);
}

namespace {

using Mat2 = std::array<std::array<double, 2>, 2>;

Mat2 mul(const Mat2& a, const Mat2& b) {
  Mat2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

double det(const Mat2& a) { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }

Mat2 inverse(const Mat2& a) {
  const double d = det(a);
  if (std::abs(d) < 1e-14) throw ConditioningError("triplet slab is singular");
  return {{{a[1][1] / d, -a[0][1] / d}, {-a[1][0] / d, a[0][0] / d}}};
}

}  // namespace

TripletParams triplet_decompose(const TripletTensor& tensor, bool invert_pencil) {
  Mat2 slab[2];
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) slab[x][a][b] = tensor(a, b, x);
  const int top = invert_pencil ? 0 : 1;
  const Mat2 pencil = mul(slab[top], inverse(slab[1 - top]));

  // Eigenpairs of the 2x2 pencil; its eigenvectors are the columns of P(W1|Y).
  const double tr = pencil[0][0] + pencil[1][1];
  const double disc = tr * tr - 4.0 * det(pencil);
  const double scale = std::max(1.0, std::abs(tr));
  if (disc < -1e-12 * scale * scale) throw ConditioningError("triplet pencil has complex eigenvalues");
  const double root = std::sqrt(std::max(0.0, disc));
  if (root < kMinEigenGap) throw ConditioningError("triplet eigen-gap below 1e-6; components are not separable");
  const double lambdas[2] = {0.5 * (tr + root), 0.5 * (tr - root)};

  Mat2 u{};  // columns: normalized eigenvectors
  for (int c = 0; c < 2; ++c) {
    const double l = lambdas[c];
    double v0 = pencil[0][1], v1 = l - pencil[0][0];
    const double alt0 = l - pencil[1][1], alt1 = pencil[1][0];
    if (std::hypot(alt0, alt1) > std::hypot(v0, v1)) {
      v0 = alt0;
      v1 = alt1;
    }
    const double s = v0 + v1;
    if (std::abs(s) < 1e-14) throw ConditioningError("triplet eigenvector cannot be normalized");
    u[0][c] = v0 / s;
    u[1][c] = v1 / s;
  }
  const Mat2 uinv = inverse(u);

  // Row c of U^-1 M_x is pi_c P(x|c) P(W2|c)^T.
  double joint_x[2][2];  // [c][x] = pi_c P(x|c)
  for (int x = 0; x < 2; ++x) {
    const Mat2 t = mul(uinv, slab[x]);
    for (int c = 0; c < 2; ++c) joint_x[c][x] = t[c][0] + t[c][1];
  }
  Mat2 sum_slab{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) sum_slab[a][b] = slab[0][a][b] + slab[1][a][b];
  const Mat2 w2rows = mul(uinv, sum_slab);

  TripletParams comp[2];
  double pis[2];
  for (int c = 0; c < 2; ++c) {
    pis[c] = joint_x[c][0] + joint_x[c][1];
    if (std::abs(pis[c]) < 1e-14) throw ConditioningError("triplet component has zero mass");
    comp[c].w1 = AnchorConditional{u[1][c], 0.0};
    comp[c].x = AnchorConditional{joint_x[c][1] / pis[c], 0.0};
    const double r = w2rows[c][0] + w2rows[c][1];
    comp[c].w2 = AnchorConditional{w2rows[c][1] / r, 0.0};
  }
  const int one = comp[0].w1.p1_given_1 > comp[1].w1.p1_given_1 ? 0 : 1;
  const int zero = 1 - one;
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  TripletParams out;
  out.prior1 = clamp01(pis[one] / (pis[0] + pis[1]));
  out.w1 = {clamp01(comp[one].w1.p1_given_1), clamp01(comp[zero].w1.p1_given_1)};
  out.w2 = {clamp01(comp[one].w2.p1_given_1), clamp01(comp[zero].w2.p1_given_1)};
  out.x = {clamp01(comp[one].x.p1_given_1), clamp01(comp[zero].x.p1_given_1)};
  return out;
}

SinglyLabeledEstimate singly_labeled_estimate(const BinaryDataset& data, std::size_t latent, std::size_t anchor,
                                              std::size_t min_count, double confidence) {
  if (!data.has_latent() || latent >= data.m_latent()) throw InvalidArgument("dataset has no labels for that latent");
  if (anchor >= data.n_observed()) throw InvalidArgument("anchor index out of range");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence must lie in (0, 1)");
  std::size_t n[2] = {0, 0}, k[2] = {0, 0};
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const std::int8_t y = data.latent(r)[latent];
    if (y == BinaryDataset::kUnlabeled) continue;
    ++n[y];
    k[y] += data.observed(r)[anchor];
  }
  if (n[0] < min_count || n[1] < min_count) {
    throw PreconditionError("insufficient labels for latent " + std::to_string(latent) + ": " + std::to_string(n[1]) +
                            " positive and " + std::to_string(n[0]) + " negative rows, need " +
                            std::to_string(min_count) + " of each");
  }
  SinglyLabeledEstimate out;
  out.labeled_y1 = n[1];
  out.labeled_y0 = n[0];
  out.conditional.p1_given_1 = (static_cast<double>(k[1]) + 1.0) / (static_cast<double>(n[1]) + 2.0);
  out.conditional.p1_given_0 = (static_cast<double>(k[0]) + 1.0) / (static_cast<double>(n[0]) + 2.0);
  const double log_term = std::log(2.0 / (1.0 - confidence));
  out.half_width_y1 = std::sqrt(log_term / (2.0 * static_cast<double>(n[1])));
  out.half_width_y0 = std::sqrt(log_term / (2.0 * static_cast<double>(n[0])));
  return out;
}

std::size_t pick_third_view(const BinaryDataset& data, std::size_t w1, std::size_t w2,
                            std::span<const std::size_t> exclude) {
  std::size_t best = data.n_observed();
  double best_score = -1.0;
  for (std::size_t j = 0; j < data.n_observed(); ++j) {
    if (j == w1 || j == w2 || std::find(exclude.begin(), exclude.end(), j) != exclude.end()) continue;
    double score = 1e300;
    for (std::size_t w : {w1, w2}) {
      const VarId ids[] = {static_cast<VarId>(std::min(j, w)), static_cast<VarId>(std::max(j, w))};
      score = std::min(score, mutual_information(empirical_moment(data, ids), ids[0]));
    }
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  if (best == data.n_observed()) throw InvalidArgument("no observed variable available as a third view");
  return best;
}

}  // namespace adfa
