// SPDX-License-Identifier: Apache-2.0
#pragma once

// Primitives on the probability simplex. Logs are natural throughout.
//
// Functions take std::span<const double> so that the gradient checkers can
// probe them slightly off the simplex; ProbVec converts implicitly.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace ger {

inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A point on the probability simplex: entries >= 0 summing to 1, length >= 2.
class ProbVec {
 public:
  /// Validates and takes ownership. Throws InvalidInput naming the offending
  /// sum or entry.
  explicit ProbVec(std::vector<double> probs);

  /// Divides nonnegative weights by their sum.
  static ProbVec normalized(std::vector<double> weights);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }
  std::span<const double> values() const noexcept { return probs_; }
  operator std::span<const double>() const noexcept { return probs_; }
  const std::vector<double>& vec() const noexcept { return probs_; }

  auto begin() const noexcept { return probs_.begin(); }
  auto end() const noexcept { return probs_.end(); }

 private:
  struct Unchecked {};
  ProbVec(std::vector<double> probs, Unchecked) : probs_(std::move(probs)) {}
  friend ProbVec softmax(std::span<const double>);
  friend ProbVec mixture(std::span<const double>, std::span<const double>, double);

  std::vector<double> probs_;
};

/// Pre-softmax scores; every entry finite.
class LogitsVec {
 public:
  explicit LogitsVec(std::vector<double> scores);

  std::size_t size() const noexcept { return scores_.size(); }
  double operator[](std::size_t i) const noexcept { return scores_[i]; }
  std::span<const double> values() const noexcept { return scores_; }
  operator std::span<const double>() const noexcept { return scores_; }
  const std::vector<double>& vec() const noexcept { return scores_; }

 private:
  std::vector<double> scores_;
};

double log_sum_exp(std::span<const double> z);

/// exp(z - logsumexp(z)); throws InvalidInput on non-finite input.
ProbVec softmax(std::span<const double> z);

/// z - logsumexp(z), without exponentiating.
std::vector<double> log_softmax(std::span<const double> z);

/// Shannon entropy in nats with 0 log 0 = 0.
double entropy(std::span<const double> p);

/// H(p, q) = -sum p log q. Returns +inf when p(i) > 0 and q(i) = 0.
double cross_entropy(std::span<const double> p, std::span<const double> q);

/// KL(p || q); +inf on a support violation.
double kl(std::span<const double> p, std::span<const double> q);

ProbVec uniform(std::size_t n);

/// (1 - alpha) q + alpha p. alpha = 0 returns q, alpha = 1 returns p.
ProbVec mixture(std::span<const double> p, std::span<const double> q, double alpha);

enum class LogBase { Nats, Bits };

/// Converts an entropy-like quantity from nats for display.
double to_base(double nats, LogBase base) noexcept;

}  // namespace ger
