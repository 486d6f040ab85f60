// SPDX-License-Identifier: Apache-2.0
#include "ger/prob_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ger/errors.hpp"

namespace ger {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << op << ": length mismatch (" << a.size() << " vs " << b.size() << ")";
    throw InvalidInput(os.str());
  }
}

}  // namespace

ProbVec::ProbVec(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw InvalidInput("probability vector needs at least 2 entries");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double v = probs_[i];
    if (!std::isfinite(v) || v < 0.0) {
      std::ostringstream os;
      os << "probability entry " << i << " is " << v << " (must be finite and >= 0)";
      throw InvalidInput(os.str());
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    std::ostringstream os;
    os.precision(15);
    os << "probability vector sums to " << sum << ", not 1";
    throw InvalidInput(os.str());
  }
}

ProbVec ProbVec::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidInput("weights must be finite and >= 0");
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidInput("weights sum to zero");
  for (double& w : weights) w /= sum;
  return ProbVec(std::move(weights));
}

LogitsVec::LogitsVec(std::vector<double> scores) : scores_(std::move(scores)) {
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (!std::isfinite(scores_[i])) {
      throw InvalidInput("logit " + std::to_string(i) + " is not finite");
    }
  }
}

double log_sum_exp(std::span<const double> z) {
  if (z.empty()) throw InvalidInput("log_sum_exp of empty vector");
  const double m = *std::max_element(z.begin(), z.end());
  if (!std::isfinite(m)) throw InvalidInput("log_sum_exp: non-finite input");
  double s = 0.0;
  for (double v : z) {
    if (!std::isfinite(v)) throw InvalidInput("log_sum_exp: non-finite input");
    s += std::exp(v - m);
  }
  return m + std::log(s);
}

std::vector<double> log_softmax(std::span<const double> z) {
  const double lse = log_sum_exp(z);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

ProbVec softmax(std::span<const double> z) {
  if (z.size() < 2) throw InvalidInput("softmax needs at least 2 logits");
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw InvalidInput("softmax: logit " + std::to_string(i) + " is not finite");
    out[i] = std::exp(z[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return ProbVec(std::move(out), ProbVec::Unchecked{});
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double cross_entropy(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "cross_entropy");
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    h -= p[i] * std::log(q[i]);
  }
  return h;
}

double kl(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "kl");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    d += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave tiny negatives when p == q.
  return std::max(d, 0.0);
}

ProbVec uniform(std::size_t n) {
  if (n < 2) throw InvalidInput("uniform distribution needs n >= 2");
  return ProbVec(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ProbVec mixture(std::span<const double> p, std::span<const double> q, double alpha) {
  require_same_length(p, q, "mixture");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("mixture weight must lie in [0, 1]");
  if (alpha == 0.0) return ProbVec(std::vector<double>(q.begin(), q.end()));
  if (alpha == 1.0) return ProbVec(std::vector<double>(p.begin(), p.end()));
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = (1.0 - alpha) * q[i] + alpha * p[i];
  return ProbVec(std::move(out));
}

double to_base(double nats, LogBase base) noexcept {
  return base == LogBase::Bits ? nats / std::numbers::ln2 : nats;
}

}  // namespace ger
