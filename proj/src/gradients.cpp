// SPDX-License-Identifier: Apache-2.0
#include "ger/gradients.hpp"

#include <algorithm>
#include <cmath>

#include "ger/errors.hpp"

namespace ger {

GradVec dJ_dp(Generator g, Alpha alpha, std::span<const double> u, std::span<const double> p) {
  if (u.size() != p.size()) throw InvalidInput("dJ_dp: length mismatch");
  const std::size_t n = p.size();
  GradVec out(n);

  if (g == Generator::NegEntropy) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!(p[i] > 0.0)) throw DomainError("dJ_dp: zero model probability at coordinate " + std::to_string(i));
    }
    if (alpha.is_zero()) {
      // d/dp KL(p || u)
      for (std::size_t i = 0; i < n; ++i) out[i] = std::log(p[i] / u[i]) + 1.0;
    } else if (alpha.is_one()) {
      // d/dp KL(u || p)
      for (std::size_t i = 0; i < n; ++i) out[i] = -u[i] / p[i];
    } else {
      // log(p/m) as log1p((p - m)/m) with p - m = (1 - a)(p - u), stable as a -> 1.
      const double a = alpha.value();
      for (std::size_t i = 0; i < n; ++i) {
        const double m = (1.0 - a) * u[i] + a * p[i];
        out[i] = std::log1p((1.0 - a) * (p[i] - u[i]) / m) / (1.0 - a);
      }
    }
    return out;
  }

  // SquaredL2: J is ||p - u||^2 at every alpha, and all three branches agree.
  if (alpha.interior()) {
    const double a = alpha.value();
    for (std::size_t i = 0; i < n; ++i) {
      const double m = (1.0 - a) * u[i] + a * p[i];
      out[i] = (2.0 * p[i] - 2.0 * m) / (1.0 - a);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = 2.0 * (p[i] - u[i]);
  }
  return out;
}

GradVec softmax_vjp(std::span<const double> p, std::span<const double> g) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * g[i];
  GradVec out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (g[i] - dot);
  return out;
}

GradVec dJ_dlogits(Generator g, Alpha alpha, std::span<const double> u, std::span<const double> z) {
  const ProbVec p = softmax(z);
  if (g == Generator::NegEntropy && alpha.is_one()) {
    // p * (-u/p + sum u) collapses to p - u; skip the division.
    GradVec out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] - u[i];
    return out;
  }
  return softmax_vjp(p.values(), dJ_dp(g, alpha, u, p.values()));
}

GradVec dCE_dlogits(std::size_t target, std::span<const double> z) {
  if (target >= z.size()) {
    throw InvalidInput("target index " + std::to_string(target) + " out of range for " +
                       std::to_string(z.size()) + " logits");
  }
  const ProbVec p = softmax(z);
  GradVec out(p.vec());
  out[target] -= 1.0;
  return out;
}

GradVec finite_difference_grad(const ScalarFn& f, std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  GradVec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw DomainError("finite difference probe is not finite at coordinate " + std::to_string(i));
    }
    out[i] = (fp - fm) / (2.0 * step);
  }
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), floor);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ger
