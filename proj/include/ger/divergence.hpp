// SPDX-License-Identifier: Apache-2.0
#pragma once

// Skew-Jensen divergences J_{alpha,G}(q || p) between a baseline q and a model
// distribution p, their Bregman rewrite, and the Jensen-Shannon special case.

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ger/prob_core.hpp"

namespace ger {

enum class Generator {
  NegEntropy,  ///< G(p) = sum p log p
  SquaredL2,   ///< G(p) = sum p^2
};

std::string_view to_string(Generator g) noexcept;
/// Accepts "neg_entropy" / "squared_l2" (and the short forms "negH", "l2").
Generator parse_generator(std::string_view name);

/// Interpolation weight in [0, 1]. The endpoints are exact: J is defined there
/// by its limit rather than by the 1/(alpha (1 - alpha)) prefactor.
class Alpha {
 public:
  explicit Alpha(double value);

  double value() const noexcept { return value_; }
  bool is_zero() const noexcept { return value_ == 0.0; }
  bool is_one() const noexcept { return value_ == 1.0; }
  bool interior() const noexcept { return !is_zero() && !is_one(); }

  friend bool operator==(Alpha, Alpha) = default;

 private:
  double value_;
};

double generator_value(Generator g, std::span<const double> p);

/// NegEntropy: log p(i) + 1 (throws DomainError on a zero entry). SquaredL2: 2 p(i).
std::vector<double> generator_grad(Generator g, std::span<const double> p);

/// D_G(p, q) = G(p) - G(q) - <p - q, grad G(q)>.
double bregman(Generator g, std::span<const double> p, std::span<const double> q);

/// J_{alpha,G}(q || p) evaluated from its defining Jensen gap. At alpha = 0 this is
/// the limit D_G(p, q) (= KL(p || q) for NegEntropy), at alpha = 1 the limit
/// D_G(q, p) (= KL(q || p), +inf when p misses part of q's support).
double skew_jensen(Generator g, Alpha alpha, std::span<const double> q, std::span<const double> p);

/// The same quantity as a weighted sum of two Bregman divergences to the mixture
/// m = (1 - alpha) q + alpha p. Interior alpha only.
double skew_jensen_bregman_form(Generator g, Alpha alpha, std::span<const double> q,
                                std::span<const double> p);

/// JS(p, q) = KL(p || m)/2 + KL(q || m)/2 with m the midpoint.
double js_divergence(std::span<const double> p, std::span<const double> q);

struct CurvePoint {
  double alpha;
  double value;
};

/// {0, 1/(n+1), ..., n/(n+1), 1}: n interior points plus both endpoints.
std::vector<double> alpha_grid(std::size_t interior_points = 99);

std::vector<CurvePoint> divergence_curve(Generator g, std::span<const double> q,
                                         std::span<const double> p, std::span<const double> alphas);

/// Writes "alpha,value,generator" with a header row. Infinite values print as "inf".
void write_curve_csv(std::ostream& os, std::span<const CurvePoint> curve, Generator g);

}  // namespace ger
