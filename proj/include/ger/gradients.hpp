// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ger/divergence.hpp"

namespace ger {

using GradVec = std::vector<double>;

/// Partial derivatives of J_{alpha,G}(u || p) with respect to p, treating p as an
/// unconstrained vector. Interior alpha: (grad G(p) - grad G(m)) / (1 - alpha) with
/// m = (1 - alpha) u + alpha p. Endpoints differentiate the closed-form limits.
GradVec dJ_dp(Generator g, Alpha alpha, std::span<const double> u, std::span<const double> p);

/// Gradient of J_{alpha,G}(u || softmax(z)) with respect to the logits z.
GradVec dJ_dlogits(Generator g, Alpha alpha, std::span<const double> u, std::span<const double> z);

/// softmax(z) - onehot(target).
GradVec dCE_dlogits(std::size_t target, std::span<const double> z);

/// Pulls a gradient with respect to p = softmax(z) back to z: p * (g - <p, g>).
GradVec softmax_vjp(std::span<const double> p, std::span<const double> g);

using ScalarFn = std::function<double(std::span<const double>)>;

inline constexpr double kDefaultFdStep = 1e-7;

/// Central differences with per-coordinate step h * max(1, |x_i|).
/// Throws DomainError if f is not finite at a probe point.
GradVec finite_difference_grad(const ScalarFn& f, std::span<const double> x, double h = kDefaultFdStep);

/// ||a - b||_2 / max(||b||_2, floor). Used by every gradient check.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace ger
