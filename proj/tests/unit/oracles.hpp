// Independent brute-force references used across the unit tests.  They work
// directly from raw model parameters and never call library inference code.
#ifndef ADFA_TESTS_ORACLES_HPP_
#define ADFA_TESTS_ORACLES_HPP_

#include <cmath>
#include <vector>

#include "adfa/model.hpp"

namespace testing_oracles {

using adfa::AdfaModel;
using adfa::LatentNetwork;
using adfa::VarId;

inline std::vector<std::uint8_t> bits(std::size_t code, std::size_t m) {
  std::vector<std::uint8_t> y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = (code >> i) & 1U;
  return y;
}

inline double prior(const LatentNetwork& net, const std::vector<std::uint8_t>& y) {
  double p = 1.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    std::size_t row = 0;
    const auto& pa = net.parents(i);
    for (std::size_t t = 0; t < pa.size(); ++t)
      if (y[pa[t]]) row |= std::size_t{1} << t;
    p *= net.cpt(i)[row][y[i]];
  }
  return p;
}

inline double neg(const AdfaModel& model, std::size_t j, const std::vector<std::uint8_t>& y) {
  double p = 1.0 - model.loadings().leak(j);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i]) p *= model.loadings().failure(i, j);
  return p;
}

// Joint table over sorted ids (observed j has id j, latent i has id n + i),
// bit t = value of the t-th id.
inline std::vector<double> joint_table(const AdfaModel& model, const std::vector<VarId>& ids) {
  const std::size_t n = model.n_observed(), m = model.m_latent();
  std::vector<double> table(std::size_t{1} << ids.size(), 0.0);
  for (std::size_t code = 0; code < (std::size_t{1} << m); ++code) {
    const auto y = bits(code, m);
    const double py = prior(model.latent(), y);
    for (std::size_t cfg = 0; cfg < table.size(); ++cfg) {
      double w = py;
      for (std::size_t t = 0; t < ids.size() && w > 0.0; ++t) {
        const int v = (cfg >> t) & 1U;
        if (ids[t] >= n) {
          if (y[ids[t] - n] != v) w = 0.0;
        } else {
          const double q0 = neg(model, ids[t], y);
          w *= v ? 1.0 - q0 : q0;
        }
      }
      table[cfg] += w;
    }
  }
  return table;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace testing_oracles

#endif  // ADFA_TESTS_ORACLES_HPP_
