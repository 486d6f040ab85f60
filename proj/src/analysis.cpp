// SPDX-License-Identifier: Apache-2.0
#include "ger/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "ger/errors.hpp"

namespace ger {

namespace {

std::size_t longest_reference(const Corpus& corpus) {
  std::size_t m = 0;
  for (const auto& p : corpus.pairs) m = std::max(m, p.steps());
  return m;
}

template <class F>
void for_each_reference_step(const ConditionalModel& model, const Corpus& corpus, F&& f) {
  for (const auto& pair : corpus.pairs) {
    const std::span<const TokenId> target(pair.target);
    for (std::size_t step = 1; step < pair.target.size(); ++step) {
      f(model.logits(pair.source, target.first(step)), pair.target[step]);
    }
  }
}

}  // namespace

double avg_normalized_entropy(const ConditionalModel& model, const Corpus& corpus, Trajectory trajectory,
                              std::size_t max_len) {
  const double norm = std::log(static_cast<double>(model.output_size()));
  double sum = 0.0;
  std::size_t steps = 0;
  if (trajectory == Trajectory::Reference) {
    for_each_reference_step(model, corpus, [&](const LogitsVec& z, TokenId) {
      sum += entropy(softmax(z.values()).values());
      ++steps;
    });
  } else {
    if (max_len == 0) max_len = longest_reference(corpus) + 5;
    std::vector<TokenId> prefix;
    for (const auto& pair : corpus.pairs) {
      prefix.assign(1, model.bos());
      for (std::size_t step = 0; step < max_len; ++step) {
        const ProbVec p = softmax(model.logits(pair.source, prefix).values());
        sum += entropy(p.values());
        ++steps;
        const auto best = static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
        if (best == model.eos()) break;
        prefix.push_back(best);
      }
    }
  }
  if (steps == 0) throw InvalidInput("avg_normalized_entropy: no steps to average");
  // Rounding can push a uniform conditional a hair above log|Y|.
  return std::clamp(sum / static_cast<double>(steps) / norm, 0.0, 1.0);
}

std::vector<double> sparsity_fractions(const ConditionalModel& model, const Corpus& corpus,
                                       std::span<const double> thresholds) {
  for (double eps : thresholds) {
    if (!(eps > 0.0)) throw InvalidInput("sparsity threshold must be > 0");
  }
  std::vector<std::size_t> below(thresholds.size(), 0);
  std::size_t cells = 0;
  for_each_reference_step(model, corpus, [&](const LogitsVec& z, TokenId) {
    // Compare in log space so tiny probabilities are not lost to underflow.
    const auto logp = log_softmax(z.values());
    for (double lp : logp) {
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        if (lp < std::log(thresholds[t])) ++below[t];
      }
    }
    cells += logp.size();
  });
  std::vector<double> out(thresholds.size(), 0.0);
  if (cells == 0) return out;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    out[t] = static_cast<double>(below[t]) / static_cast<double>(cells);
  }
  return out;
}

double sparsity_fraction(const ConditionalModel& model, const Corpus& corpus, double eps) {
  const std::array<double, 1> t{eps};
  return sparsity_fractions(model, corpus, t)[0];
}

double fractional_rank(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) throw InvalidInput("fractional_rank: target out of range");
  const double s = scores[target];
  std::size_t greater = 0;
  std::size_t equal = 0;
  for (double v : scores) {
    if (v > s) {
      ++greater;
    } else if (v == s) {
      ++equal;
    }
  }
  return static_cast<double>(greater) + (static_cast<double>(equal) + 1.0) / 2.0;
}

double reference_word_rank(const ConditionalModel& model, const Corpus& corpus) {
  double sum = 0.0;
  std::size_t n = 0;
  for_each_reference_step(model, corpus, [&](const LogitsVec& z, TokenId ref) {
    // Ranking logits equals ranking probabilities: softmax is strictly monotone.
    sum += fractional_rank(z.values(), ref);
    ++n;
  });
  if (n == 0) throw InvalidInput("reference_word_rank: corpus has no target positions");
  return sum / static_cast<double>(n);
}

LikelihoodRatio likelihood_ratio(const ConditionalModel& model, const Corpus& corpus, const DecodeConfig& cfg) {
  double ref_lp = 0.0;
  std::size_t ref_n = 0;
  for_each_reference_step(model, corpus, [&](const LogitsVec& z, TokenId ref) {
    ref_lp += log_softmax(z.values())[ref];
    ++ref_n;
  });
  double dec_lp = 0.0;
  std::size_t dec_n = 0;
  std::vector<std::vector<TokenId>> sources;
  sources.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) sources.push_back(p.source);
  for (const auto& d : decode_corpus(model, sources, cfg)) {
    dec_lp += d.log_prob;
    dec_n += d.tokens.size() + (d.truncated ? 0 : 1);
  }
  if (ref_n == 0 || dec_n == 0) throw InvalidInput("likelihood_ratio: nothing to score");
  LikelihoodRatio r;
  const double ref_pw = ref_lp / static_cast<double>(ref_n);
  const double dec_pw = dec_lp / static_cast<double>(dec_n);
  r.avg_ref_word_prob = std::exp(ref_pw);
  r.avg_decoded_word_prob = std::exp(dec_pw);
  if (dec_pw == 0.0) {
    r.ratio = ref_pw == 0.0 ? 1.0 : kInf;
  } else {
    r.ratio = ref_pw / dec_pw;
  }
  return r;
}

std::size_t nmi_bins(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)) / 2.0));
}

std::vector<std::size_t> equal_frequency_bins(std::span<const double> x, std::size_t bins) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<std::size_t> out(n);
  std::size_t i = 0;
  while (i < n) {
    // A run of equal values takes the bin of its first rank.
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const std::size_t bin = std::min(bins - 1, i * bins / n);
    for (std::size_t r = i; r < j; ++r) out[order[r]] = bin;
    i = j;
  }
  return out;
}

namespace {

double plugin_entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

}  // namespace

double nmi(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("nmi: sample sizes differ");
  if (x.size() < 20) throw InvalidInput("nmi: need at least 20 samples");
  const std::size_t n = x.size();
  const std::size_t bins = nmi_bins(n);
  const auto bx = equal_frequency_bins(x, bins);
  const auto by = equal_frequency_bins(y, bins);
  std::vector<double> cx(bins, 0.0);
  std::vector<double> cy(bins, 0.0);
  std::vector<double> cxy(bins * bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cx[bx[i]] += 1.0;
    cy[by[i]] += 1.0;
    cxy[bx[i] * bins + by[i]] += 1.0;
  }
  const double dn = static_cast<double>(n);
  const double hx = plugin_entropy(cx, dn);
  const double hy = plugin_entropy(cy, dn);
  const double norm = std::min(hx, hy);
  if (!(norm > 0.0)) throw UndefinedResult("nmi: an input is constant after binning (zero entropy)");
  const double mi = hx + hy - plugin_entropy(cxy, dn);
  return std::clamp(mi / norm, 0.0, 1.0);
}

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Residuals of the least-squares line of v on c.
std::vector<double> residualize(std::span<const double> v, std::span<const double> c) {
  const double mv = mean_of(v);
  const double mc = mean_of(c);
  double scc = 0.0;
  double scv = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    scc += (c[i] - mc) * (c[i] - mc);
    scv += (c[i] - mc) * (v[i] - mv);
  }
  const double slope = scc > 0.0 ? scv / scc : 0.0;
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = (v[i] - mv) - slope * (c[i] - mc);
  return r;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw UndefinedResult("correlation: zero variance");
  return sab / std::sqrt(saa * sbb);
}

void check_triple(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  if (a.size() != b.size() || a.size() != c.size()) throw InvalidInput("samples differ in length");
  if (a.size() < 20) throw InvalidInput("need at least 20 samples");
}

struct Residuals {
  std::vector<double> a;
  std::vector<double> b;
  double observed;
};

Residuals prepare(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  check_triple(a, b, c);
  Residuals r{residualize(a, c), residualize(b, c), 0.0};
  const double scale = std::max(1.0, std::abs(mean_of(a)));
  double var = 0.0;
  for (double v : r.a) var += v * v;
  if (!(var > 1e-24 * scale * scale * static_cast<double>(a.size()))) {
    throw UndefinedResult("conditional independence: a is fully explained by c (degenerate variance)");
  }
  r.observed = correlation(r.a, r.b);
  return r;
}

bool permutation_exceeds(const Residuals& r, std::uint64_t seed, std::size_t perm_index) {
  std::mt19937_64 rng(seed + perm_index);
  std::vector<double> shuffled = r.a;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  // Small slack so exact ties with the observed statistic count as exceedances.
  return std::abs(correlation(shuffled, r.b)) >= std::abs(r.observed) - 1e-12;
}

}  // namespace

double partial_correlation(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  check_triple(a, b, c);
  return correlation(residualize(a, c), residualize(b, c));
}

double cond_independence_test_serial(std::span<const double> a, std::span<const double> b,
                                     std::span<const double> c, std::size_t n_perm, std::uint64_t seed) {
  if (n_perm == 0) throw InvalidInput("cond_independence_test: n_perm must be >= 1");
  const Residuals r = prepare(a, b, c);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n_perm; ++i) hits += permutation_exceeds(r, seed, i) ? 1 : 0;
  return static_cast<double>(hits + 1) / static_cast<double>(n_perm + 1);
}

double cond_independence_test(std::span<const double> a, std::span<const double> b, std::span<const double> c,
                              std::size_t n_perm, std::uint64_t seed) {
  if (n_perm == 0) throw InvalidInput("cond_independence_test: n_perm must be >= 1");
  const Residuals r = prepare(a, b, c);
  long long hits = 0;
  const auto n = static_cast<long long>(n_perm);
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (long long i = 0; i < n; ++i) hits += permutation_exceeds(r, seed, static_cast<std::size_t>(i)) ? 1 : 0;
  return static_cast<double>(hits + 1) / static_cast<double>(n_perm + 1);
}

QuadraticFit quadratic_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("quadratic_fit: x and y differ in length");
  std::vector<double> distinct(x.begin(), x.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw DegenerateFit("quadratic_fit: need at least 3 distinct x values");

  // Fit y = a2 t^2 + a1 t + a0 on t = (x - shift) / scale, then map back.
  const double shift = mean_of(x);
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v - shift));
  const std::size_t n = x.size();
  std::array<std::array<double, 4>, 3> m{};  // augmented normal equations in (1, t, t^2)
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (x[i] - shift) / scale;
    const std::array<double, 3> row{1.0, t, t * t};
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) m[r][c] += row[r] * row[c];
      m[r][3] += row[r] * y[i];
    }
  }
  for (std::size_t col = 0; col < 3; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    if (std::abs(m[piv][col]) < 1e-12 * static_cast<double>(n)) throw DegenerateFit("quadratic_fit: rank-deficient design");
    std::swap(m[piv], m[col]);
    for (std::size_t r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  const double a0 = m[0][3] / m[0][0];
  const double a1 = m[1][3] / m[1][1];
  const double a2 = m[2][3] / m[2][2];

  QuadraticFit fit;
  fit.a = a2 / (scale * scale);
  fit.b = a1 / scale - 2.0 * a2 * shift / (scale * scale);
  fit.c = a0 - a1 * shift / scale + a2 * shift * shift / (scale * scale);

  const double my = mean_of(y);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (x[i] - shift) / scale;
    const double pred = a0 + a1 * t + a2 * t * t;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (fit.a < 0.0) fit.argmax = -fit.b / (2.0 * fit.a);
  return fit;
}

std::map<std::optional<double>, BetaRange> beta_robustness(std::span<const RobustnessPoint> points,
                                                           double tol_fraction) {
  std::map<std::optional<double>, BetaRange> out;
  if (points.empty()) return out;
  double best = -kInf;
  for (const auto& p : points) best = std::max(best, p.metric);
  const double cutoff = (1.0 - tol_fraction) * best;
  for (const auto& p : points) {
    auto& range = out[p.alpha];
    if (p.metric < cutoff) continue;
    range.beta_min = range.beta_min ? std::min(*range.beta_min, p.beta) : p.beta;
    range.beta_max = range.beta_max ? std::max(*range.beta_max, p.beta) : p.beta;
  }
  return out;
}

}  // namespace ger
