// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <vector>

#include "../support/fixtures.hpp"
#include "ger/analysis.hpp"
#include "ger/errors.hpp"
#include "ger/gradients.hpp"
#include "ger/regularized_loss.hpp"
#include "ger/toy_model.hpp"

using namespace ger;

namespace {

// Mirrors tests/oracles/toy_model_fixture.py.
ToyModelParams fixture_params() {
  ToyModelParams p = ToyModelParams::zeros(ModelDims{4, 5, 3, 4, 2});
  int b = 0;
  p.for_each_block([&](std::string_view, Matrix& m) {
    for (std::size_t k = 0; k < m.data.size(); ++k) {
      m.data[k] = 0.5 * std::sin(0.7 * static_cast<double>(k) + 1.3 * b + 0.1);
    }
    ++b;
  });
  return p;
}

Corpus fixture_corpus() {
  Corpus c;
  for (const char* w : {"a", "b", "c", "d"}) c.source_vocab.add(w);
  c.target_vocab = TargetVocab::from_words({"w", "x", "y", "z"});
  c.add_pair({0, 1, 2}, std::vector<TokenId>{1, 2, 3});
  c.add_pair({3}, std::vector<TokenId>{4});
  c.add_pair({2, 2, 1, 0}, std::vector<TokenId>{3, 1});
  return c;
}

Corpus reversal_small(std::uint64_t seed) {
  ReversalTaskSpec spec;
  spec.seed = seed;
  spec.alphabet = 6;
  spec.n_train = 60;
  spec.n_dev = 20;
  spec.n_test = 20;
  spec.min_len = 2;
  spec.max_len = 4;
  return make_reversal_task(spec).train;
}

}  // namespace

TEST_CASE("fixture model regression values") {
  const ToyModel model(fixture_params());
  const std::vector<TokenId> src{0, 1, 2};
  const auto z0 = model.logits(src, std::vector<TokenId>{5});
  const double ref0[] = {0.23842653667486380598, 0.45285169105712967888, 0.45429361913236513493,
                         0.24207415959603925922, -0.083996559711387134415};
  for (std::size_t i = 0; i < 5; ++i) CHECK(z0[i] == doctest::Approx(ref0[i]).epsilon(1e-13));
  const auto z1 = model.logits(src, std::vector<TokenId>{5, 1, 2});
  const double ref1[] = {0.22689269688362916508, 0.43129954579440798954, 0.43285947907677361115,
                         0.23083883573339957376, -0.07974891901169749908};
  for (std::size_t i = 0; i < 5; ++i) CHECK(z1[i] == doctest::Approx(ref1[i]).epsilon(1e-13));

  const Corpus c = fixture_corpus();
  const RegConfig cfg{Alpha(0.5), 0.3, Generator::NegEntropy, std::nullopt};
  CHECK(total_loss(cfg, model, c) == doctest::Approx(1.6337701553387224606).epsilon(1e-13));
  CHECK(perplexity(model, c) == doctest::Approx(5.0957885261654766403).epsilon(1e-13));
  CHECK(avg_normalized_entropy(model, c, Trajectory::Reference) == doctest::Approx(0.9891285674691466462).epsilon(1e-13));
}

TEST_CASE("initialization is deterministic and bounded") {
  const ModelDims dims{7, 9, 5, 6, 3};
  const auto a = init_params(dims, 42);
  CHECK(a == init_params(dims, 42));
  CHECK_FALSE(a == init_params(dims, 43));
  a.for_each_block([&](std::string_view name, const Matrix& m) {
    const double s = init_scale(m.rows, m.cols);
    for (double v : m.data) {
      if (name == "hidden_b" || name == "out_b") {
        CHECK(v == 0.0);
      } else {
        CHECK(std::abs(v) <= s);
      }
    }
  });
  CHECK(a.parameter_count() == 7 * 5 + 10 * 5 + 20 * 6 + 6 + 6 * 9 + 9);
}

TEST_CASE("forward contract") {
  const ToyModel model(testing::random_params(ModelDims{5, 6, 4, 5, 3}, 3));
  const std::vector<TokenId> prefix{6, 2};
  const auto a = model.logits(std::vector<TokenId>{0, 1, 4}, prefix);
  const auto b = model.logits(std::vector<TokenId>{4, 0, 1}, prefix);
  CHECK(a.vec() == b.vec());
  CHECK(a.vec() == model.logits(std::vector<TokenId>{0, 1, 4}, prefix).vec());
  CHECK_THROWS_AS(model.logits(std::vector<TokenId>{5}, prefix), InvalidInput);
  CHECK_THROWS_AS(model.logits(std::vector<TokenId>{0}, std::vector<TokenId>{7}), InvalidInput);
  CHECK_THROWS_AS(model.logits(std::vector<TokenId>{0}, std::vector<TokenId>{}), InvalidInput);
}

TEST_CASE("backward agrees with finite differences on every block") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 12; ++trial) {
    const ModelDims dims{4, 5, 3, 4, 2};
    const ToyModelParams params = testing::random_params(dims, 100 + static_cast<std::uint64_t>(trial));
    const Corpus c = testing::random_corpus(rng, 3, 4, 5, 4);
    const RegConfig cfg{Alpha(trial % 3 == 0 ? 0.0 : trial % 3 == 1 ? 1.0 : 0.45), 0.6,
                        trial % 2 ? Generator::SquaredL2 : Generator::NegEntropy, std::nullopt};
    const BatchGradient bg = backward(params, cfg, c.pairs);
    CHECK(bg.loss == doctest::Approx(batch_loss(params, cfg, c.pairs)).epsilon(1e-14));

    std::size_t offset = 0;
    const auto x0 = testing::flatten(params);
    ToyModelParams probe = params;
    const auto fd = finite_difference_grad(
        [&](std::span<const double> x) {
          testing::unflatten(probe, x);
          return batch_loss(probe, cfg, c.pairs);
        },
        x0);
    bg.grad.for_each_block([&](std::string_view name, const Matrix& g) {
      const std::span<const double> ref(fd.data() + offset, g.data.size());
      INFO("block " << name);
      CHECK(relative_error(g.data, ref) < 1e-6);
      offset += g.data.size();
    });
  }
}

TEST_CASE("beta = 0 gradients are the cross-entropy gradients") {
  std::mt19937_64 rng(42);
  const ToyModelParams params = testing::random_params(ModelDims{4, 5, 3, 4, 2}, 9);
  const Corpus c = testing::random_corpus(rng, 4, 4, 5, 3);
  const auto a = backward(params, RegConfig{Alpha(0.2), 0.0, Generator::NegEntropy, std::nullopt}, c.pairs);
  const auto b = backward(params, RegConfig{Alpha(1.0), 0.0, Generator::SquaredL2, std::nullopt}, c.pairs);
  CHECK(testing::flatten(a.grad) == testing::flatten(b.grad));
}

TEST_CASE("one-parameter slice: analytic derivative vanishes at the numerical minimum") {
  std::mt19937_64 rng(43);
  ToyModelParams params = testing::random_params(ModelDims{4, 5, 3, 4, 2}, 10);
  const Corpus c = testing::random_corpus(rng, 3, 4, 5, 3);
  const RegConfig cfg{Alpha(0.5), 0.5, Generator::NegEntropy, std::nullopt};
  auto f = [&](double v) {
    params.out_b.data[2] = v;
    return batch_loss(params, cfg, c.pairs);
  };
  // Golden-section search on the convex 1-D slice through one output bias.
  double lo = -20.0;
  double hi = 20.0;
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 200; ++i) {
    const double m1 = hi - r * (hi - lo);
    const double m2 = lo + r * (hi - lo);
    if (f(m1) < f(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  f(0.5 * (lo + hi));
  CHECK(std::abs(backward(params, cfg, c.pairs).grad.out_b.data[2]) < 1e-7);
}

TEST_CASE("training is reproducible and descends") {
  const Corpus c = reversal_small(5);
  TrainHyper h;
  h.embed = 4;
  h.hidden = 8;
  h.window = 2;
  h.max_epochs = 3;
  h.patience = 3;
  h.batch = 8;
  h.seed = 17;
  const RegConfig cfg{Alpha(0.0), 0.5, Generator::NegEntropy, std::nullopt};
  const auto a = train(cfg, c, c, h);
  const auto b = train(cfg, c, c, h);
  CHECK(a.params == b.params);
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t i = 0; i < a.history.epochs.size(); ++i) {
    CHECK(a.history.epochs[i].train_loss == b.history.epochs[i].train_loss);
    CHECK(a.history.epochs[i].dev_metric == b.history.epochs[i].dev_metric);
  }
  CHECK(a.history.epochs[1].train_loss < a.history.epochs[0].train_loss);
  double best = -1.0;
  for (const auto& e : a.history.epochs) best = std::max(best, e.dev_metric);
  CHECK(a.history.epochs[static_cast<std::size_t>(a.history.best_epoch)].dev_metric == best);
}

TEST_CASE("dev-loss selection picks the lowest dev loss") {
  const Corpus c = reversal_small(6);
  TrainHyper h;
  h.embed = 4;
  h.hidden = 8;
  h.window = 2;
  h.max_epochs = 4;
  h.batch = 8;
  h.select = Selection::DevLoss;
  const auto r = train(RegConfig{}, c, c, h);
  double best = 1e300;
  for (const auto& e : r.history.epochs) best = std::min(best, e.dev_loss);
  CHECK(r.history.epochs[static_cast<std::size_t>(r.history.best_epoch)].dev_loss == best);
  CHECK(parse_selection("dev_loss") == Selection::DevLoss);
  CHECK(to_string(Selection::DevMetric) == "dev_metric");
  CHECK_THROWS_AS(parse_selection("bleu"), InvalidInput);
}

TEST_CASE("regularization raises entropy") {
  const Corpus c = reversal_small(8);
  TrainHyper h;
  h.embed = 8;
  h.hidden = 16;
  h.window = 2;
  h.max_epochs = 15;
  h.patience = 15;
  h.batch = 8;
  h.select = Selection::DevLoss;
  const auto base = train(RegConfig{}, c, c, h);
  const auto reg = train(RegConfig{Alpha(0.0), 0.5, Generator::NegEntropy, std::nullopt}, c, c, h);
  CHECK(avg_normalized_entropy(ToyModel(reg.params), c) > avg_normalized_entropy(ToyModel(base.params), c));
}

TEST_CASE("uniform model has perplexity equal to the softmax size") {
  const Corpus c = fixture_corpus();
  const ToyModel zero(ToyModelParams::zeros(ModelDims{4, 5, 3, 4, 2}));
  CHECK(perplexity(zero, c) == doctest::Approx(5.0));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const Corpus c = fixture_corpus();
  Checkpoint ck{testing::random_params(ModelDims{4, 5, 3, 4, 2}, 77), c.source_vocab, c.target_vocab, {"note: x"}};
  const auto path = std::filesystem::temp_directory_path() / "ger_unit_ckpt.txt";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.params == ck.params);
  CHECK(back.source_vocab == ck.source_vocab);
  CHECK(back.target_vocab.table == ck.target_vocab.table);
  CHECK(back.metadata == ck.metadata);
  std::filesystem::remove(path);

  std::istringstream bad("ger-checkpoint 9\n");
  CHECK_THROWS_AS(read_checkpoint(bad), FormatError);
  std::ostringstream os;
  write_checkpoint(os, ck);
  std::string text = os.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt"), InvalidInput);
}
