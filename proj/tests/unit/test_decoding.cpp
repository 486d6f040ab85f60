// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "ger/decoding.hpp"
#include "ger/errors.hpp"

using namespace ger;
using testing::HashModel;

namespace {

std::vector<std::string> words(const std::string& s) { return split_whitespace(s); }

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

}  // namespace

TEST_CASE("exhaustive-width beam returns the brute-force mode") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t v = 2 + seed % 4;
    const std::size_t max_len = 1 + seed % 4;
    const HashModel model(v, seed);
    const std::vector<TokenId> src{static_cast<TokenId>(seed % 3)};
    DecodeConfig cfg;
    cfg.beam_size = ipow(v, max_len);
    cfg.max_len = max_len;
    cfg.length_normalize = seed % 2 == 0;
    const auto hyps = beam_decode(model, src, cfg);
    const Hypothesis ref = testing::brute_force_mode(model, src, max_len, cfg.length_normalize);
    INFO("seed " << seed);
    CHECK(hyps.front().tokens == ref.tokens);
    CHECK(hyps.front().score == doctest::Approx(ref.score).epsilon(1e-12));
  }
}

TEST_CASE("beam results are sorted and scored consistently") {
  const HashModel model(5, 99);
  DecodeConfig cfg;
  cfg.beam_size = 4;
  cfg.max_len = 6;
  const auto hyps = beam_decode(model, std::vector<TokenId>{1, 2}, cfg);
  REQUIRE_FALSE(hyps.empty());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    CHECK(hyps[i].score == hypothesis_score(hyps[i].log_prob, hyps[i].tokens.size(), true));
    CHECK(hyps[i].log_prob <= 0.0);
    if (hyps[i].finished) {
      CHECK(hyps[i].tokens.back() == model.eos());
    } else {
      CHECK(hyps[i].tokens.size() == cfg.max_len);
    }
    if (i > 0) CHECK(hyps[i - 1].score >= hyps[i].score);
  }
}

TEST_CASE("beam of width one is greedy") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const HashModel model(3 + seed % 5, seed + 1000, 1.0 + static_cast<double>(seed % 3));
    const std::vector<TokenId> src{static_cast<TokenId>(seed % 4), 1};
    DecodeConfig cfg;
    cfg.beam_size = 1;
    cfg.max_len = 8;
    const Decoded b = decode(model, src, cfg);
    const Decoded g = greedy_decode(model, src, cfg.max_len);
    CHECK(b.tokens == g.tokens);
    CHECK(b.truncated == g.truncated);
    CHECK(b.log_prob == doctest::Approx(g.log_prob).epsilon(1e-12));
  }
}

TEST_CASE("greedy on a hand-built model") {
  // Always prefers token 2 until two tokens are emitted, then EOS.
  struct Scripted final : ConditionalModel {
    std::size_t output_size() const override { return 3; }
    LogitsVec logits(std::span<const TokenId>, std::span<const TokenId> prefix) const override {
      if (prefix.size() >= 3) return LogitsVec({5.0, 0.0, 0.0});
      return LogitsVec({0.0, 1.0, 4.0});
    }
  } model;
  const Decoded d = greedy_decode(model, std::vector<TokenId>{0}, 10);
  CHECK(d.tokens == std::vector<TokenId>{2, 2});
  CHECK_FALSE(d.truncated);
  const Decoded t = greedy_decode(model, std::vector<TokenId>{0}, 1);
  CHECK(t.tokens == std::vector<TokenId>{2});
  CHECK(t.truncated);
}

TEST_CASE("sampling is reproducible and respects temperature") {
  const HashModel model(6, 5);
  DecodeConfig cfg;
  cfg.strategy = Strategy::Sample;
  cfg.max_len = 10;
  cfg.seed = 123;
  const std::vector<TokenId> src{2};
  const Decoded a = decode(model, src, cfg);
  const Decoded b = decode(model, src, cfg);
  CHECK(a.tokens == b.tokens);
  CHECK(a.log_prob == b.log_prob);

  // Near-zero temperature collapses sampling onto greedy.
  cfg.temperature = 1e-6;
  for (std::uint64_t s = 0; s < 20; ++s) {
    cfg.seed = s;
    CHECK(decode(model, src, cfg).tokens == greedy_decode(model, src, cfg.max_len).tokens);
  }
}

TEST_CASE("corpus decoding matches the serial reference") {
  std::mt19937_64 rng(3);
  std::vector<std::vector<TokenId>> sources;
  for (int i = 0; i < 40; ++i) {
    std::vector<TokenId> s(1 + rng() % 4);
    for (auto& t : s) t = static_cast<TokenId>(rng() % 5);
    sources.push_back(s);
  }
  const HashModel model(5, 8);
  for (Strategy st : {Strategy::Greedy, Strategy::Beam, Strategy::Sample}) {
    DecodeConfig cfg;
    cfg.strategy = st;
    cfg.max_len = 7;
    cfg.seed = 11;
    const auto par = decode_corpus(model, sources, cfg);
    const auto ser = decode_corpus_serial(model, sources, cfg);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
      CHECK(par[i].tokens == ser[i].tokens);
      CHECK(par[i].log_prob == ser[i].log_prob);
    }
  }
}

TEST_CASE("decode configuration validation") {
  DecodeConfig cfg;
  cfg.beam_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = DecodeConfig{};
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = DecodeConfig{};
  cfg.max_len = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  CHECK(parse_strategy("beam") == Strategy::Beam);
  CHECK(to_string(Strategy::Sample) == "sample");
  CHECK_THROWS_AS(parse_strategy("nucleus"), InvalidInput);
}

TEST_CASE("corpus BLEU hand values") {
  const std::vector<std::vector<std::string>> ref{words("a b c d")};
  CHECK(corpus_bleu(ref, ref) == doctest::Approx(100.0));
  // Unigrams 3/4; add-one bigrams 2/4, trigrams 1/3, 4-grams 1/2.
  const std::vector<std::vector<std::string>> hyp{words("a b x d")};
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(50.0).epsilon(1e-12));
  // Brevity penalty exp(1 - 4/2) on a perfect-precision short hypothesis.
  const std::vector<std::vector<std::string>> short_hyp{words("a b")};
  const double bp = std::exp(1.0 - 2.0);
  CHECK(corpus_bleu(short_hyp, ref) == doctest::Approx(100.0 * bp).epsilon(1e-12));
  const std::vector<std::vector<std::string>> none{words("q r")};
  CHECK(corpus_bleu(none, ref) == 0.0);
  CHECK_THROWS_AS(corpus_bleu(std::vector<std::vector<std::string>>{}, std::vector<std::vector<std::string>>{}),
                  InvalidInput);
}

TEST_CASE("token accuracy") {
  const std::vector<std::vector<TokenId>> ref{{1, 2, 3}, {4}};
  CHECK(token_accuracy(ref, ref) == 1.0);
  const std::vector<std::vector<TokenId>> hyp{{1, 5}, {4, 4}};
  CHECK(token_accuracy(hyp, ref) == doctest::Approx(2.0 / 5.0));
  CHECK_THROWS_AS(token_accuracy(hyp, std::vector<std::vector<TokenId>>{{1}}), InvalidInput);
}
