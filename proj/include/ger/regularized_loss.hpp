// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training objectives: token cross-entropy plus beta * J_{alpha,G}(u || p_theta),
// with the regularizer applied to the conditional at every target position.

#include <cstddef>
#include <optional>

#include "ger/corpus.hpp"
#include "ger/divergence.hpp"
#include "ger/gradients.hpp"
#include "ger/model.hpp"

namespace ger {

struct RegConfig {
  Alpha alpha{1.0};
  /// Strength coefficient. 0 disables the regularizer.
  double beta = 0.0;
  Generator generator = Generator::NegEntropy;
  /// nullopt means uniform. Non-uniform baselines are experimental: the entropy
  /// decompositions checked in the tests hold only for the uniform one.
  std::optional<ProbVec> baseline;

  /// Throws InvalidInput for beta < 0 or a baseline that misses support at alpha = 0.
  void validate(std::size_t vocab_size) const;
  ProbVec baseline_for(std::size_t vocab_size) const;
  bool regularized() const noexcept { return beta > 0.0; }
};

struct StepLoss {
  double loss = 0.0;
  double ce = 0.0;
  double reg = 0.0;
  GradVec grad;
};

/// -log softmax(z)[target] + beta * J(u || softmax(z)) and its logit gradient.
StepLoss step_loss(const RegConfig& cfg, std::size_t target, std::span<const double> z);
/// Same, with the baseline already materialized.
StepLoss step_loss(const RegConfig& cfg, std::span<const double> baseline, std::size_t target,
                   std::span<const double> z);

/// Summed cross-entropy and regularizer over every target position.
struct CorpusTotals {
  double ce_sum = 0.0;
  double reg_sum = 0.0;
  std::size_t tokens = 0;

  double ce_mean() const { return ce_sum / static_cast<double>(tokens); }
  double reg_mean() const { return reg_sum / static_cast<double>(tokens); }
};

/// Pair-parallel evaluation; partial sums are combined in pair order so the
/// result is bit-identical to evaluate_corpus_serial at any thread count.
CorpusTotals evaluate_corpus(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus);
CorpusTotals evaluate_corpus_serial(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus);

/// Sum over pairs and positions of J_alpha(u || p_theta(. | x, y_<t)).
double corpus_regularizer(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus);

/// Per-token mean cross-entropy plus beta times the per-token mean regularizer.
double total_loss(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus);

/// (1 - gamma) * CE + gamma * KL(u || p_theta), per-token means. gamma in [0, 1).
double label_smoothing_scaled_loss(double gamma, const ConditionalModel& model, const Corpus& corpus);

}  // namespace ger
