// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "ger/corpus.hpp"
#include "ger/prob_core.hpp"

namespace ger {

/// A locally normalized conditional model: one softmax over |Y| + 1 outcomes per
/// target position, given the source and the target prefix (starting at BOS).
class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;

  /// |Y| + 1.
  virtual std::size_t output_size() const = 0;
  virtual LogitsVec logits(std::span<const TokenId> source, std::span<const TokenId> prefix) const = 0;

  TokenId bos() const { return static_cast<TokenId>(output_size()); }
  TokenId eos() const { return kEosId; }
};

}  // namespace ger
