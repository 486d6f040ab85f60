// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <vector>

namespace ger {

/// Dirichlet(1, ..., 1) draw. With interior_mix > 0 the result is mixed with the
/// uniform distribution so that every coordinate is at least interior_mix / n.
std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, double interior_mix = 0.0);

/// i.i.d. N(0, scale^2) logits.
std::vector<double> random_logits(std::mt19937_64& rng, std::size_t n, double scale = 1.0);

}  // namespace ger
