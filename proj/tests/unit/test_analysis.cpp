// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "../support/fixtures.hpp"
#include "ger/analysis.hpp"
#include "ger/errors.hpp"

using namespace ger;

namespace {

struct Constant final : ConditionalModel {
  std::vector<double> z;
  explicit Constant(std::vector<double> zz) : z(std::move(zz)) {}
  std::size_t output_size() const override { return z.size(); }
  LogitsVec logits(std::span<const TokenId>, std::span<const TokenId>) const override { return LogitsVec(z); }
};

Corpus small_corpus(std::size_t output_size) {
  std::mt19937_64 rng(4);
  return testing::random_corpus(rng, 6, 3, output_size, 3);
}

}  // namespace

// Frozen values below come from tests/oracles/analysis_values.py.
TEST_CASE("nmi frozen values") {
  std::vector<double> x(40);
  std::vector<double> y(40);
  std::vector<double> y2(40);
  for (int i = 0; i < 40; ++i) {
    x[i] = i;
    y[i] = (i * 7) % 40;
    y2[i] = (i * i) % 13;
  }
  CHECK(nmi(x, y) == doctest::Approx(0.07678032766449197).epsilon(1e-12));
  CHECK(nmi(x, y2) == doctest::Approx(0.009995254999088871).epsilon(1e-12));
  CHECK(nmi(x, x) == doctest::Approx(1.0));
  CHECK(nmi(y, x) == doctest::Approx(nmi(x, y)));
}

TEST_CASE("nmi edge cases") {
  std::vector<double> x(30, 1.0);
  std::vector<double> y(30);
  for (int i = 0; i < 30; ++i) y[i] = i;
  CHECK_THROWS_AS(nmi(x, y), UndefinedResult);
  CHECK_THROWS_AS(nmi(std::vector<double>(10, 0.0), std::vector<double>(10, 0.0)), InvalidInput);
  CHECK_THROWS_AS(nmi(y, std::vector<double>(29, 0.0)), InvalidInput);
  // Monotone transforms leave the binning, hence nmi, unchanged.
  std::vector<double> ey(30);
  for (int i = 0; i < 30; ++i) ey[i] = std::exp(y[i] / 5.0);
  std::vector<double> z(30);
  for (int i = 0; i < 30; ++i) z[i] = std::sin(3.0 * i);
  CHECK(nmi(ey, z) == nmi(y, z));
}

TEST_CASE("nmi of independent samples is small") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  double sum = 0.0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(1000);
    std::vector<double> b(1000);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    sum += nmi(a, b);
  }
  CHECK(sum / 20.0 < 0.05);
}

TEST_CASE("equal-frequency binning") {
  CHECK(nmi_bins(1) == 1);
  CHECK(nmi_bins(16) == 2);
  CHECK(nmi_bins(17) == 3);
  CHECK(nmi_bins(100) == 5);
  const std::vector<double> x{5, 1, 4, 2, 3, 0, 7, 6};
  CHECK(equal_frequency_bins(x, 4) == std::vector<std::size_t>{2, 0, 2, 1, 1, 0, 3, 3});
  const std::vector<double> tied{1, 1, 1, 1, 2, 3};
  CHECK(equal_frequency_bins(tied, 3) == std::vector<std::size_t>{0, 0, 0, 0, 2, 2});
}

TEST_CASE("partial correlation and the permutation test") {
  std::vector<double> a(30);
  std::vector<double> b(30);
  std::vector<double> c(30);
  for (int i = 0; i < 30; ++i) {
    a[i] = std::sin(i);
    c[i] = i / 10.0;
    b[i] = std::cos(1.3 * i) + 0.5 * a[i] + 0.2 * c[i];
  }
  CHECK(partial_correlation(a, b, c) == doctest::Approx(0.2735910322976805).epsilon(1e-12));
  const double p = cond_independence_test(a, b, c, 199, 5);
  CHECK(p == cond_independence_test_serial(a, b, c, 199, 5));
  CHECK(p > 0.0);
  CHECK(p <= 1.0);
  // p-values live on the (k + 1) / (n_perm + 1) lattice.
  const double k = p * 200.0 - 1.0;
  CHECK(k == doctest::Approx(std::round(k)));
  CHECK_THROWS_AS(cond_independence_test(a, b, c, 0), InvalidInput);

  // Strongly dependent given c: the smallest attainable p-value.
  std::vector<double> b2(a);
  for (int i = 0; i < 30; ++i) b2[i] += 0.01 * std::cos(5.0 * i);
  CHECK(cond_independence_test(a, b2, c, 99, 1) == doctest::Approx(0.01));
}

TEST_CASE("quadratic fit") {
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i <= 10; ++i) {
    x.push_back(i / 10.0);
    y.push_back(-2.0 * x.back() * x.back() + 1.2 * x.back() + 0.3);
  }
  const QuadraticFit f = quadratic_fit(x, y);
  CHECK(f.a == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(f.b == doctest::Approx(1.2).epsilon(1e-10));
  CHECK(f.c == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(f.r_squared == doctest::Approx(1.0));
  REQUIRE(f.argmax.has_value());
  CHECK(*f.argmax == doctest::Approx(0.3).epsilon(1e-10));

  const std::vector<double> xs{0, 0.25, 0.5, 0.75, 1.0, 0.1, 0.9};
  const std::vector<double> ys{0.3, 0.5, 0.55, 0.52, 0.2, 0.41, 0.33};
  const QuadraticFit g = quadratic_fit(xs, ys);
  CHECK(g.a == doctest::Approx(-1.2792912513842771).epsilon(1e-10));
  CHECK(g.b == doctest::Approx(1.1978097699027948).epsilon(1e-10));
  CHECK(g.c == doctest::Approx(0.29505081826012014).epsilon(1e-10));
  CHECK(g.r_squared < 1.0);

  const std::vector<double> up{1, 0, 1};
  CHECK_FALSE(quadratic_fit(std::vector<double>{-1, 0, 1}, up).argmax.has_value());
  CHECK_THROWS_AS(quadratic_fit(std::vector<double>{1, 1, 2, 2}, std::vector<double>{0, 1, 2, 3}), DegenerateFit);
  CHECK_THROWS_AS(quadratic_fit(std::vector<double>{1, 2}, std::vector<double>{0}), InvalidInput);
}

TEST_CASE("fractional rank") {
  const std::vector<double> s{0.5, 2.0, 2.0, -1.0, 3.0};
  CHECK(fractional_rank(s, 4) == 1.0);
  CHECK(fractional_rank(s, 1) == 2.5);
  CHECK(fractional_rank(s, 2) == 2.5);
  CHECK(fractional_rank(s, 0) == 4.0);
  CHECK(fractional_rank(s, 3) == 5.0);
  CHECK_THROWS_AS(fractional_rank(s, 5), InvalidInput);
}

TEST_CASE("entropy and sparsity of fixed conditionals") {
  const Corpus c = small_corpus(4);
  const Constant uniform({0.0, 0.0, 0.0, 0.0});
  CHECK(avg_normalized_entropy(uniform, c, Trajectory::Reference) == doctest::Approx(1.0));
  CHECK(avg_normalized_entropy(uniform, c, Trajectory::Decoded, 5) == doctest::Approx(1.0));
  CHECK(sparsity_fraction(uniform, c, std::exp(-10.0)) == 0.0);
  CHECK(reference_word_rank(uniform, c) == 2.5);

  // One of four entries sits below both thresholds.
  const Constant peaked({20.0, 0.0, 0.0, 0.0});
  const auto fr = sparsity_fractions(peaked, c, kSparsityThresholds);
  CHECK(fr[0] == doctest::Approx(0.75));
  CHECK(fr[1] == doctest::Approx(0.75));
  const Constant mid({12.0, 0.0, 0.0, 0.0});
  const auto fm = sparsity_fractions(mid, c, kSparsityThresholds);
  CHECK(fm[0] == doctest::Approx(0.75));
  CHECK(fm[1] == 0.0);
  const double h = avg_normalized_entropy(peaked, c);
  CHECK(h >= 0.0);
  CHECK(h < 1e-6);
}

TEST_CASE("entropy stays in the unit interval") {
  const Corpus c = small_corpus(6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const testing::HashModel m(6, seed, 0.5 + static_cast<double>(seed));
    const double h = avg_normalized_entropy(m, c);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    const double r = reference_word_rank(m, c);
    CHECK(r >= 1.0);
    CHECK(r <= 6.0);
  }
}

TEST_CASE("beta robustness ranges") {
  const std::vector<RobustnessPoint> pts{
      {std::nullopt, 0.0, 0.50}, {0.0, 0.1, 0.60}, {0.0, 0.5, 0.596}, {0.0, 1.0, 0.40},
      {1.0, 0.1, 0.55},          {1.0, 0.25, 0.6}, {1.0, 0.5, 0.70}};
  const auto r = beta_robustness(pts, 0.15);
  // cutoff 0.85 * 0.70, about 0.595
  CHECK_FALSE(r.at(std::nullopt).beta_min.has_value());
  CHECK(*r.at(0.0).beta_min == 0.1);
  CHECK(*r.at(0.0).beta_max == 0.5);
  CHECK(*r.at(1.0).beta_min == 0.25);
  CHECK(*r.at(1.0).beta_max == 0.5);
}
