// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ger/corpus.hpp"
#include "ger/decoding.hpp"
#include "ger/model.hpp"
#include "ger/regularized_loss.hpp"

namespace ger {

enum class Trajectory {
  Decoded,    ///< condition on the greedy decode of each source
  Reference,  ///< condition on reference prefixes
};

/// Mean per-step entropy divided by log of the softmax size; in [0, 1].
double avg_normalized_entropy(const ConditionalModel& model, const Corpus& corpus,
                              Trajectory trajectory = Trajectory::Decoded, std::size_t max_len = 0);

/// Default sparsity thresholds e^-10 and e^-15.
inline const std::vector<double> kSparsityThresholds = {std::exp(-10.0), std::exp(-15.0)};

/// Fraction of (position, vocabulary entry) cells with probability < eps, over
/// all reference-prefix conditionals.
double sparsity_fraction(const ConditionalModel& model, const Corpus& corpus, double eps);
/// One pass, one fraction per threshold.
std::vector<double> sparsity_fractions(const ConditionalModel& model, const Corpus& corpus,
                                       std::span<const double> thresholds);

/// 1-based rank of index target in scores (descending), ties take the mean of
/// the tied positions.
double fractional_rank(std::span<const double> scores, std::size_t target);

/// Mean fractional rank of each reference token (EOS included) in its conditional.
double reference_word_rank(const ConditionalModel& model, const Corpus& corpus);

struct LikelihoodRatio {
  double avg_ref_word_prob = 0.0;      // exp(total ref log-prob / ref tokens)
  double avg_decoded_word_prob = 0.0;  // same for the decoder's top hypotheses
  double ratio = 1.0;                  // per-word log-lik(ref) / per-word log-lik(decoded)
};

LikelihoodRatio likelihood_ratio(const ConditionalModel& model, const Corpus& corpus, const DecodeConfig& cfg);

/// ceil(sqrt(n) / 2).
std::size_t nmi_bins(std::size_t n);

/// Equal-frequency bin index per sample; tied values share a bin.
std::vector<std::size_t> equal_frequency_bins(std::span<const double> x, std::size_t bins);

/// Plug-in mutual information of equal-frequency binned samples over
/// min(H(X_binned), H(Y_binned)). Throws UndefinedResult for a constant input.
double nmi(std::span<const double> x, std::span<const double> y);

/// Partial correlation of (a, b) given c, via residuals of least-squares fits on c.
double partial_correlation(std::span<const double> a, std::span<const double> b, std::span<const double> c);

/// Two-sided permutation p-value for the partial correlation of (a, b) given c.
/// Permutation i shuffles the residuals of a with generator seed + i; the
/// p-value is (1 + #{|r_perm| >= |r_obs|}) / (n_perm + 1).
double cond_independence_test(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                              std::size_t n_perm, std::uint64_t seed = 0);
double cond_independence_test_serial(std::span<const double> a, std::span<const double> b,
                                     std::span<const double> c, std::size_t n_perm, std::uint64_t seed = 0);

struct QuadraticFit {
  double a = 0.0;  // y ~ a x^2 + b x + c
  double b = 0.0;
  double c = 0.0;
  double r_squared = 0.0;
  /// Vertex -b / (2a) when the parabola opens downward.
  std::optional<double> argmax;

  double operator()(double x) const noexcept { return (a * x + b) * x + c; }
};

/// Least squares through normal equations on centered, scaled columns.
/// Throws DegenerateFit with fewer than 3 distinct x values.
QuadraticFit quadratic_fit(std::span<const double> x, std::span<const double> y);

struct RobustnessPoint {
  std::optional<double> alpha;  // nullopt: unregularized runs
  double beta = 0.0;
  double metric = 0.0;
};

struct BetaRange {
  std::optional<double> beta_min;  // both empty when no run qualified
  std::optional<double> beta_max;
};

/// For each alpha level, the beta span of runs whose metric is at least
/// (1 - tol_fraction) times the best metric overall.
std::map<std::optional<double>, BetaRange> beta_robustness(std::span<const RobustnessPoint> points,
                                                           double tol_fraction);

}  // namespace ger
