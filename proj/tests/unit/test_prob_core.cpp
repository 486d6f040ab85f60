// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ger/errors.hpp"
#include "ger/prob_core.hpp"
#include "ger/random.hpp"

using namespace ger;

// Reference values: tests/oracles/simplex_values.py (50-digit arithmetic).

TEST_CASE("softmax matches high-precision reference") {
  const std::vector<double> z{1.0, 2.0, 3.0};
  const ProbVec p = softmax(z);
  CHECK(p[0] == doctest::Approx(0.090030573170380457998).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.24472847105479765247).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(0.66524095577482188953).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant and survives huge logits") {
  const std::vector<double> z{1000.0, 1001.0, 1002.0};
  const ProbVec p = softmax(z);
  CHECK(p[2] == doctest::Approx(0.66524095577482188953).epsilon(1e-14));
  const auto lp = log_softmax(std::vector<double>{-1e4, 0.0});
  CHECK(lp[1] == doctest::Approx(0.0));
  CHECK(lp[0] == doctest::Approx(-1e4));
  CHECK(log_sum_exp(std::vector<double>{700.0, 700.0}) == doctest::Approx(700.0 + std::log(2.0)));
}

TEST_CASE("softmax rejects non-finite logits and short inputs") {
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidInput);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0}), InvalidInput);
  CHECK_THROWS_AS(LogitsVec({0.0, kInf}), InvalidInput);
}

TEST_CASE("entropy and KL reference values") {
  CHECK(entropy(std::vector<double>{0.7, 0.2, 0.1}) == doctest::Approx(0.80181855254333730856).epsilon(1e-15));
  CHECK(kl(uniform(2).values(), std::vector<double>{0.9, 0.1}) ==
        doctest::Approx(0.51082562376599068321).epsilon(1e-15));
  CHECK(entropy(std::vector<double>{1.0, 0.0}) == 0.0);
  CHECK(entropy(uniform(7).values()) == doctest::Approx(std::log(7.0)));
}

TEST_CASE("KL and cross-entropy are infinite on support violations") {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<double> q{1.0, 0.0};
  CHECK(std::isinf(kl(p, q)));
  CHECK(std::isinf(cross_entropy(p, q)));
  CHECK(kl(q, p) == doctest::Approx(std::log(2.0)));
  CHECK(kl(p, p) == 0.0);
}

TEST_CASE("cross-entropy decomposes as entropy plus KL") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_simplex(rng, 9, 0.1);
    const auto q = random_simplex(rng, 9, 0.1);
    CHECK(cross_entropy(p, q) == doctest::Approx(entropy(p) + kl(p, q)).epsilon(1e-13));
    CHECK(kl(p, q) >= 0.0);
  }
}

TEST_CASE("ProbVec validation names the offending sum") {
  try {
    ProbVec bad({0.5, 0.6});
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("sums to 1.1") != std::string::npos);
  }
  CHECK_THROWS_AS(ProbVec({1.2, -0.2}), InvalidInput);
  CHECK_THROWS_AS(ProbVec({1.0}), InvalidInput);
  CHECK_NOTHROW(ProbVec({0.25, 0.75}));
  CHECK(ProbVec::normalized({1.0, 3.0})[1] == doctest::Approx(0.75));
  CHECK_THROWS_AS(ProbVec::normalized({0.0, 0.0}), InvalidInput);
}

TEST_CASE("uniform and mixture") {
  const ProbVec u = uniform(4);
  for (double v : u) CHECK(v == 0.25);
  CHECK_THROWS_AS(uniform(1), InvalidInput);
  const std::vector<double> p{1.0, 0.0, 0.0, 0.0};
  const ProbVec m = mixture(p, u.values(), 0.5);
  CHECK(m[0] == doctest::Approx(0.625));
  CHECK(m[1] == doctest::Approx(0.125));
  CHECK(mixture(p, u.values(), 1.0)[0] == 1.0);
  CHECK(mixture(p, u.values(), 0.0)[0] == 0.25);
}

TEST_CASE("nats to bits") {
  CHECK(to_base(std::log(2.0), LogBase::Bits) == doctest::Approx(1.0));
  CHECK(to_base(1.5, LogBase::Nats) == 1.5);
}

TEST_CASE("random_simplex draws are valid probability vectors") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_simplex(rng, 2 + static_cast<std::size_t>(i % 30), 0.05);
    CHECK_NOTHROW(static_cast<void>(ProbVec(p)));
    for (double v : p) CHECK(v >= 0.05 / static_cast<double>(p.size()) - 1e-15);
  }
}
