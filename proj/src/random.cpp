// SPDX-License-Identifier: Apache-2.0
#include "ger/random.hpp"

namespace ger {

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, double interior_mix) {
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) {
    v = exp1(rng);
    s += v;
  }
  const double u = 1.0 / static_cast<double>(n);
  for (auto& v : p) v = (1.0 - interior_mix) * (v / s) + interior_mix * u;
  // Renormalize so the sum is 1 to rounding.
  s = 0.0;
  for (double v : p) s += v;
  for (auto& v : p) v /= s;
  return p;
}

std::vector<double> random_logits(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> z(n);
  for (auto& v : z) v = nd(rng);
  return z;
}

}  // namespace ger
