// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small deterministic models and brute-force references shared by the unit
// tests and the acceptance suite.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ger/corpus.hpp"
#include "ger/decoding.hpp"
#include "ger/model.hpp"
#include "ger/prob_core.hpp"
#include "ger/toy_model.hpp"

namespace ger::testing {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Logits are a pure function of (seed, source, prefix, index): an arbitrary
/// locally normalized model over a small vocabulary.
class HashModel final : public ConditionalModel {
 public:
  HashModel(std::size_t output_size, std::uint64_t seed, double scale = 3.0)
      : n_(output_size), seed_(seed), scale_(scale) {}

  std::size_t output_size() const override { return n_; }

  LogitsVec logits(std::span<const TokenId> source, std::span<const TokenId> prefix) const override {
    std::uint64_t h = splitmix64(seed_);
    for (TokenId t : source) h = splitmix64(h ^ (t + 1));
    h = splitmix64(h ^ 0xabcdefULL);
    for (TokenId t : prefix) h = splitmix64(h ^ (t + 1));
    std::vector<double> z(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::uint64_t r = splitmix64(h + i);
      z[i] = scale_ * (2.0 * (static_cast<double>(r >> 11) * 0x1.0p-53) - 1.0);
    }
    return LogitsVec(std::move(z));
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  double scale_;
};

/// Exhaustive search over every terminal sequence: EOS-terminated within
/// max_len tokens, or max_len tokens without EOS. Same score and tie order as
/// the beam decoder's final ranking.
inline Hypothesis brute_force_mode(const ConditionalModel& model, std::span<const TokenId> source,
                                   std::size_t max_len, bool length_normalize) {
  Hypothesis best;
  bool have = false;
  auto consider = [&](const Hypothesis& h) {
    bool better = !have;
    if (have) {
      if (h.score != best.score) {
        better = h.score > best.score;
      } else if (h.finished != best.finished) {
        better = h.finished;
      } else {
        better = h.tokens < best.tokens;
      }
    }
    if (better) {
      best = h;
      have = true;
    }
  };
  std::vector<TokenId> tokens;
  std::function<void(double)> visit = [&](double lp) {
    std::vector<TokenId> prefix{model.bos()};
    prefix.insert(prefix.end(), tokens.begin(), tokens.end());
    const auto logp = log_softmax(model.logits(source, prefix).values());
    for (std::size_t i = 0; i < logp.size(); ++i) {
      tokens.push_back(static_cast<TokenId>(i));
      const double next = lp + logp[i];
      if (i == model.eos() || tokens.size() == max_len) {
        Hypothesis h;
        h.tokens = tokens;
        h.log_prob = next;
        h.finished = i == model.eos();
        h.score = hypothesis_score(next, tokens.size(), length_normalize);
        consider(h);
      } else {
        visit(next);
      }
      tokens.pop_back();
    }
  };
  visit(0.0);
  return best;
}

/// Random corpus over a tiny vocabulary: source ids < source_vocab, body ids in
/// [1, output_size).
inline Corpus random_corpus(std::mt19937_64& rng, std::size_t pairs, std::size_t source_vocab,
                            std::size_t output_size, std::size_t max_body) {
  Corpus c;
  for (std::size_t i = 0; i < source_vocab; ++i) c.source_vocab.add("s" + std::to_string(i));
  std::vector<std::string> words;
  for (std::size_t i = 1; i < output_size; ++i) words.push_back("t" + std::to_string(i));
  c.target_vocab = TargetVocab::from_words(words);
  std::uniform_int_distribution<std::size_t> len(1, max_body);
  std::uniform_int_distribution<TokenId> src(0, static_cast<TokenId>(source_vocab - 1));
  std::uniform_int_distribution<TokenId> tgt(1, static_cast<TokenId>(output_size - 1));
  for (std::size_t p = 0; p < pairs; ++p) {
    std::vector<TokenId> s(len(rng));
    for (auto& t : s) t = src(rng);
    std::vector<TokenId> b(len(rng));
    for (auto& t : b) t = tgt(rng);
    c.add_pair(std::move(s), b);
  }
  return c;
}

/// Glorot init plus nonzero biases, so every block has a nontrivial gradient.
inline ToyModelParams random_params(const ModelDims& dims, std::uint64_t seed) {
  ToyModelParams p = init_params(dims, seed);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> n(0.0, 0.5);
  for (double& v : p.hidden_b.data) v = n(rng);
  for (double& v : p.out_b.data) v = n(rng);
  return p;
}

/// Flattened parameter vector, blocks in for_each_block order.
inline std::vector<double> flatten(const ToyModelParams& p) {
  std::vector<double> out;
  p.for_each_block([&](std::string_view, const Matrix& m) { out.insert(out.end(), m.data.begin(), m.data.end()); });
  return out;
}

inline void unflatten(ToyModelParams& p, std::span<const double> x) {
  std::size_t k = 0;
  p.for_each_block([&](std::string_view, Matrix& m) {
    for (double& v : m.data) v = x[k++];
  });
}

}  // namespace ger::testing
