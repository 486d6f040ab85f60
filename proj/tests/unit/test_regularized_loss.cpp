// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "../support/fixtures.hpp"
#include "ger/divergence.hpp"
#include "ger/errors.hpp"
#include "ger/gradients.hpp"
#include "ger/random.hpp"
#include "ger/regularized_loss.hpp"

using namespace ger;

namespace {

struct Fixture {
  Corpus corpus;
  ToyModel model;
};

Fixture make_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Corpus c = testing::random_corpus(rng, 8, 5, 6, 5);
  const ModelDims dims{5, 6, 4, 6, 2};
  return {std::move(c), ToyModel(testing::random_params(dims, seed))};
}

}  // namespace

TEST_CASE("step loss: beta = 0 is plain cross-entropy") {
  std::mt19937_64 rng(31);
  const auto z = random_logits(rng, 7);
  const RegConfig cfg{Alpha(0.3), 0.0, Generator::NegEntropy, std::nullopt};
  const StepLoss s = step_loss(cfg, 2, z);
  CHECK(s.loss == -log_softmax(z)[2]);
  CHECK(s.grad == dCE_dlogits(2, z));
  CHECK(s.reg > 0.0);
}

TEST_CASE("step loss gradient agrees with finite differences") {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 40; ++i) {
    const auto z = random_logits(rng, 6);
    const RegConfig cfg{Alpha(i % 3 == 0 ? 0.0 : i % 3 == 1 ? 1.0 : 0.37), 0.7,
                        i % 2 ? Generator::SquaredL2 : Generator::NegEntropy, std::nullopt};
    const auto fd = finite_difference_grad([&](std::span<const double> x) { return step_loss(cfg, 4, x).loss; }, z);
    CHECK(relative_error(step_loss(cfg, 4, z).grad, fd) < 1e-6);
  }
}

TEST_CASE("confidence penalty and label smoothing decompositions") {
  auto fx = make_fixture(33);
  const double log_v = std::log(static_cast<double>(fx.corpus.vocab_size()));
  const ProbVec u = uniform(fx.corpus.vocab_size());
  double sum_h = 0.0;
  double sum_ce_u = 0.0;
  std::size_t n = 0;
  for (const auto& pair : fx.corpus.pairs) {
    const std::span<const TokenId> t(pair.target);
    for (std::size_t s = 1; s < pair.target.size(); ++s) {
      const ProbVec p = softmax(fx.model.logits(pair.source, t.first(s)).values());
      sum_h += entropy(p.values());
      sum_ce_u += cross_entropy(u.values(), p.values());
      ++n;
    }
  }
  const RegConfig cp{Alpha(0.0), 1.0, Generator::NegEntropy, std::nullopt};
  const RegConfig ls{Alpha(1.0), 1.0, Generator::NegEntropy, std::nullopt};
  CHECK(corpus_regularizer(cp, fx.model, fx.corpus) == doctest::Approx(static_cast<double>(n) * log_v - sum_h).epsilon(1e-12));
  CHECK(corpus_regularizer(ls, fx.model, fx.corpus) == doctest::Approx(sum_ce_u - static_cast<double>(n) * log_v).epsilon(1e-12));
}

TEST_CASE("label smoothing scaling identity") {
  auto fx = make_fixture(34);
  for (double gamma : {0.1, 0.3, 0.5}) {
    const RegConfig cfg{Alpha(1.0), gamma / (1.0 - gamma), Generator::NegEntropy, std::nullopt};
    CHECK(std::abs((1.0 - gamma) * total_loss(cfg, fx.model, fx.corpus) -
                   label_smoothing_scaled_loss(gamma, fx.model, fx.corpus)) <= 1e-10);
  }
  CHECK(0.1 / 0.9 == doctest::Approx(0.111).epsilon(5e-3));
  CHECK_THROWS_AS(label_smoothing_scaled_loss(1.0, fx.model, fx.corpus), InvalidInput);
  CHECK_THROWS_AS(label_smoothing_scaled_loss(-0.1, fx.model, fx.corpus), InvalidInput);
}

TEST_CASE("cross-entropy term does not depend on the regularizer, total loss grows with beta") {
  auto fx = make_fixture(35);
  const double ce = evaluate_corpus(RegConfig{}, fx.model, fx.corpus).ce_sum;
  for (double a : {0.0, 0.5, 1.0}) {
    double prev = -1.0;
    for (double b : {0.0, 0.1, 0.5, 2.0}) {
      const RegConfig cfg{Alpha(a), b, Generator::NegEntropy, std::nullopt};
      CHECK(evaluate_corpus(cfg, fx.model, fx.corpus).ce_sum == ce);
      const double l = total_loss(cfg, fx.model, fx.corpus);
      CHECK(l >= prev);
      prev = l;
    }
  }
}

TEST_CASE("parallel corpus evaluation is bit-identical to the serial reference") {
  auto fx = make_fixture(36);
  for (double a : {0.0, 0.6, 1.0}) {
    const RegConfig cfg{Alpha(a), 0.4, Generator::NegEntropy, std::nullopt};
    const auto par = evaluate_corpus(cfg, fx.model, fx.corpus);
    const auto ser = evaluate_corpus_serial(cfg, fx.model, fx.corpus);
    CHECK(par.ce_sum == ser.ce_sum);
    CHECK(par.reg_sum == ser.reg_sum);
    CHECK(par.tokens == ser.tokens);
  }
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS((RegConfig{Alpha(0.5), -1.0, Generator::NegEntropy, std::nullopt}.validate(4)), InvalidInput);
  const ProbVec sparse({1.0, 0.0, 0.0, 0.0});
  CHECK_NOTHROW((RegConfig{Alpha(1.0), 0.5, Generator::NegEntropy, sparse}.validate(4)));
  CHECK_THROWS_AS((RegConfig{Alpha(0.0), 0.5, Generator::NegEntropy, sparse}.validate(4)), InvalidInput);
  const RegConfig wrong_len{Alpha(0.5), 0.5, Generator::NegEntropy, ProbVec({0.5, 0.5})};
  CHECK_THROWS_AS(wrong_len.validate(4), InvalidInput);
  CHECK(RegConfig{}.baseline_for(4)[0] == 0.25);
  CHECK_FALSE(RegConfig{}.regularized());
}
