#ifndef ADFA_NOISE_HPP_
#define ADFA_NOISE_HPP_

#include <array>
#include <optional>
#include <span>

#include "adfa/model.hpp"

namespace adfa {

// Joint P(W1, W2, X) of three binary views; index = w1 | w2 << 1 | x << 2.
class TripletTensor {
 public:
  explicit TripletTensor(std::array<double, 8> table);

  double operator()(int w1, int w2, int x) const { return table_[static_cast<std::size_t>(w1 | w2 << 1 | x << 2)]; }
  const std::array<double, 8>& table() const { return table_; }

 private:
  std::array<double, 8> table_;
};

// Parameters of a binary latent with three conditionally independent views.
struct TripletParams {
  double prior1 = 0.5;  // P(Y=1)
  AnchorConditional w1, w2, x;
};

TripletTensor build_triplet(const TripletParams& params);
TripletTensor empirical_triplet(const BinaryDataset& data, std::size_t w1, std::size_t w2, std::size_t x);

inline constexpr double kMinEigenGap = 1e-6;

// Rank-2 decomposition from the eigenvectors of M1 M0^-1, where M_x is the
// W1 x W2 slab at X = x (or of M0 M1^-1 when invert_pencil is set; the result
// is the same).  Components are labeled so that P(W1=1|Y=1) > P(W1=1|Y=0).
// Throws ConditioningError when the eigenvalues are within kMinEigenGap or the
// slabs are singular.
TripletParams triplet_decompose(const TripletTensor& tensor, bool invert_pencil = false);

struct SinglyLabeledEstimate {
  AnchorConditional conditional;
  double half_width_y1 = 0.0;  // Hoeffding half-width for P(A=1|Y=1)
  double half_width_y0 = 0.0;
  std::size_t labeled_y1 = 0;
  std::size_t labeled_y0 = 0;
};

inline constexpr std::size_t kMinLabeledRows = 20;

// P(A=1 | Y_i=y) from the rows where Y_i is labeled, with add-one smoothing.
// Half-widths are sqrt(log(2/(1-confidence)) / (2 n_y)).  Fewer than
// min_count labeled rows of either class throws PreconditionError.
SinglyLabeledEstimate singly_labeled_estimate(const BinaryDataset& data, std::size_t latent, std::size_t anchor,
                                              std::size_t min_count = kMinLabeledRows, double confidence = 0.95);

// Third view for a pair of anchors: the observed variable (other than the two)
// maximizing min(I(X;W1), I(X;W2)) on the data; ties go to the smaller index.
std::size_t pick_third_view(const BinaryDataset& data, std::size_t w1, std::size_t w2,
                            std::span<const std::size_t> exclude = {});

}  // namespace adfa

#endif  // ADFA_NOISE_HPP_
