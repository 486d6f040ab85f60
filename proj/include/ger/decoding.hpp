// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ger/corpus.hpp"
#include "ger/model.hpp"

namespace ger {

enum class Strategy { Greedy, Beam, Sample };

std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view name);

struct DecodeConfig {
  Strategy strategy = Strategy::Beam;
  std::size_t beam_size = 5;
  bool length_normalize = true;
  double temperature = 1.0;
  /// Maximum number of generated tokens, EOS included.
  std::size_t max_len = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Decoded {
  std::vector<TokenId> tokens;  // body only, no BOS/EOS
  double log_prob = 0.0;        // sum over generated tokens, EOS included
  bool truncated = false;       // max_len reached before EOS
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // generated tokens; ends in EOS when finished
  double log_prob = 0.0;
  double score = 0.0;
  bool finished = false;

  std::vector<TokenId> body() const;
};

/// log_prob / length when length_normalize, else log_prob.
double hypothesis_score(double log_prob, std::size_t length, bool length_normalize);

/// Argmax per step, lowest id on ties.
Decoded greedy_decode(const ConditionalModel& model, std::span<const TokenId> source, std::size_t max_len);

/// Completed and (at max_len) truncated hypotheses, best score first.
std::vector<Hypothesis> beam_decode(const ConditionalModel& model, std::span<const TokenId> source,
                                    const DecodeConfig& cfg);

/// Ancestral sampling from softmax(z / T) with a generator seeded by cfg.seed.
Decoded sample_decode(const ConditionalModel& model, std::span<const TokenId> source, const DecodeConfig& cfg);

/// Dispatches on cfg.strategy; beam returns its top hypothesis.
Decoded decode(const ConditionalModel& model, std::span<const TokenId> source, const DecodeConfig& cfg);

/// Decodes every source. Sentence i samples with seed cfg.seed + i, so the
/// output does not depend on the thread count.
std::vector<Decoded> decode_corpus(const ConditionalModel& model, std::span<const std::vector<TokenId>> sources,
                                   const DecodeConfig& cfg);
std::vector<Decoded> decode_corpus_serial(const ConditionalModel& model,
                                          std::span<const std::vector<TokenId>> sources, const DecodeConfig& cfg);

/// Corpus BLEU: clipped n-gram precisions up to 4-grams, add-one smoothing for
/// n >= 2, brevity penalty, geometric mean, scaled to [0, 100]. Not SacreBLEU.
double corpus_bleu(std::span<const std::vector<std::string>> hypotheses,
                   std::span<const std::vector<std::string>> references);
double corpus_bleu(std::span<const std::vector<TokenId>> hypotheses, std::span<const std::vector<TokenId>> references);

/// Matches at aligned positions over the summed max(|hyp|, |ref|).
double token_accuracy(std::span<const std::vector<TokenId>> hypotheses,
                      std::span<const std::vector<TokenId>> references);

}  // namespace ger
