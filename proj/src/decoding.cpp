// SPDX-License-Identifier: Apache-2.0
#include "ger/decoding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "ger/errors.hpp"

namespace ger {

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Greedy:
      return "greedy";
    case Strategy::Beam:
      return "beam";
    case Strategy::Sample:
      return "sample";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::Greedy;
  if (name == "beam") return Strategy::Beam;
  if (name == "sample") return Strategy::Sample;
  throw InvalidInput("unknown decoding strategy '" + std::string(name) + "'");
}

void DecodeConfig::validate() const {
  if (beam_size < 1) throw InvalidInput("beam size must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidInput("temperature must be > 0");
  if (max_len < 1) throw InvalidInput("max_len must be >= 1");
}

std::vector<TokenId> Hypothesis::body() const {
  std::vector<TokenId> b = tokens;
  if (finished && !b.empty()) b.pop_back();
  return b;
}

double hypothesis_score(double log_prob, std::size_t length, bool length_normalize) {
  if (!length_normalize || length == 0) return log_prob;
  return log_prob / static_cast<double>(length);
}

Decoded greedy_decode(const ConditionalModel& model, std::span<const TokenId> source, std::size_t max_len) {
  if (max_len < 1) throw InvalidInput("max_len must be >= 1");
  std::vector<TokenId> prefix{model.bos()};
  Decoded out;
  out.truncated = true;
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto logp = log_softmax(model.logits(source, prefix).values());
    // max_element returns the first maximum: lowest id wins ties.
    const auto best = static_cast<TokenId>(std::max_element(logp.begin(), logp.end()) - logp.begin());
    out.log_prob += logp[best];
    if (best == model.eos()) {
      out.truncated = false;
      break;
    }
    out.tokens.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

namespace {

// Higher log-prob first, then lexicographically smaller tokens.
bool better_running(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

bool better_scored(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.finished != b.finished) return a.finished;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<Hypothesis> beam_decode(const ConditionalModel& model, std::span<const TokenId> source,
                                    const DecodeConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.beam_size;
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> completed;
  std::vector<TokenId> prefix;
  std::vector<std::size_t> idx;

  for (std::size_t step = 1; step <= cfg.max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& hyp : live) {
      prefix.assign(1, model.bos());
      prefix.insert(prefix.end(), hyp.tokens.begin(), hyp.tokens.end());
      const auto logp = log_softmax(model.logits(source, prefix).values());
      idx.resize(logp.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      const std::size_t take = std::min(k, idx.size());
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                        [&](std::size_t a, std::size_t b) { return logp[a] > logp[b] || (logp[a] == logp[b] && a < b); });
      for (std::size_t r = 0; r < take; ++r) {
        Hypothesis next = hyp;
        next.tokens.push_back(static_cast<TokenId>(idx[r]));
        next.log_prob += logp[idx[r]];
        candidates.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better_running);
    candidates.resize(keep);

    live.clear();
    for (auto& c : candidates) {
      if (c.tokens.back() == model.eos()) {
        c.finished = true;
        c.score = hypothesis_score(c.log_prob, c.tokens.size(), cfg.length_normalize);
        completed.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }

    if (!completed.empty() && !live.empty()) {
      double best_done = -kInf;
      for (const auto& c : completed) best_done = std::max(best_done, c.score);
      // Log-probs only fall as tokens are added; with length normalization the
      // best a live hypothesis can still reach is log_prob / max_len.
      bool can_improve = false;
      for (const auto& h : live) {
        const double bound = cfg.length_normalize ? h.log_prob / static_cast<double>(cfg.max_len) : h.log_prob;
        if (bound > best_done) {
          can_improve = true;
          break;
        }
      }
      if (!can_improve) live.clear();
    }
  }

  for (auto& h : live) {
    h.score = hypothesis_score(h.log_prob, h.tokens.size(), cfg.length_normalize);
    completed.push_back(std::move(h));
  }
  std::sort(completed.begin(), completed.end(), better_scored);
  return completed;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Decoded sample_decode(const ConditionalModel& model, std::span<const TokenId> source, const DecodeConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::vector<TokenId> prefix{model.bos()};
  Decoded out;
  out.truncated = true;
  std::vector<double> scaled;
  for (std::size_t step = 0; step < cfg.max_len; ++step) {
    const LogitsVec z = model.logits(source, prefix);
    scaled.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) scaled[i] = z[i] / cfg.temperature;
    const auto logp = log_softmax(scaled);
    const double r = uniform01(rng);
    double cdf = 0.0;
    std::size_t pick = logp.size() - 1;
    for (std::size_t i = 0; i < logp.size(); ++i) {
      cdf += std::exp(logp[i]);
      if (r < cdf) {
        pick = i;
        break;
      }
    }
    // Report the model's own (temperature-free) log-probability.
    out.log_prob += log_softmax(z.values())[pick];
    const auto tok = static_cast<TokenId>(pick);
    if (tok == model.eos()) {
      out.truncated = false;
      break;
    }
    out.tokens.push_back(tok);
    prefix.push_back(tok);
  }
  return out;
}

Decoded decode(const ConditionalModel& model, std::span<const TokenId> source, const DecodeConfig& cfg) {
  cfg.validate();
  switch (cfg.strategy) {
    case Strategy::Greedy:
      return greedy_decode(model, source, cfg.max_len);
    case Strategy::Sample:
      return sample_decode(model, source, cfg);
    case Strategy::Beam: {
      const auto hyps = beam_decode(model, source, cfg);
      Decoded out;
      out.tokens = hyps.front().body();
      out.log_prob = hyps.front().log_prob;
      out.truncated = !hyps.front().finished;
      return out;
    }
  }
  return {};
}

std::vector<Decoded> decode_corpus_serial(const ConditionalModel& model,
                                          std::span<const std::vector<TokenId>> sources, const DecodeConfig& cfg) {
  std::vector<Decoded> out(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    DecodeConfig c = cfg;
    c.seed = cfg.seed + i;
    out[i] = decode(model, sources[i], c);
  }
  return out;
}

std::vector<Decoded> decode_corpus(const ConditionalModel& model, std::span<const std::vector<TokenId>> sources,
                                   const DecodeConfig& cfg) {
  cfg.validate();
  std::vector<Decoded> out(sources.size());
  const auto n = static_cast<std::ptrdiff_t>(sources.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    DecodeConfig c = cfg;
    c.seed = cfg.seed + idx;
    out[idx] = decode(model, sources[idx], c);
  }
  return out;
}

namespace {

template <class T>
double bleu_impl(std::span<const std::vector<T>> hyps, std::span<const std::vector<T>> refs) {
  if (hyps.size() != refs.size()) throw InvalidInput("corpus_bleu: hypothesis and reference counts differ");
  if (hyps.empty()) throw InvalidInput("corpus_bleu: empty corpus");
  constexpr std::size_t kMaxOrder = 4;
  std::array<double, kMaxOrder> matches{};
  std::array<double, kMaxOrder> totals{};
  double hyp_len = 0.0;
  double ref_len = 0.0;

  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    const auto& r = refs[s];
    hyp_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      std::map<std::vector<T>, int> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[std::vector<T>(r.begin() + i, r.begin() + i + n)];
      std::map<std::vector<T>, int> hyp_counts;
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[std::vector<T>(h.begin() + i, h.begin() + i + n)];
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }

  if (totals[0] == 0.0 || matches[0] == 0.0) return 0.0;
  double log_sum = std::log(matches[0] / totals[0]);
  for (std::size_t n = 1; n < kMaxOrder; ++n) log_sum += std::log((matches[n] + 1.0) / (totals[n] + 1.0));
  const double brevity = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return 100.0 * brevity * std::exp(log_sum / static_cast<double>(kMaxOrder));
}

}  // namespace

double corpus_bleu(std::span<const std::vector<std::string>> hypotheses,
                   std::span<const std::vector<std::string>> references) {
  return bleu_impl(hypotheses, references);
}

double corpus_bleu(std::span<const std::vector<TokenId>> hypotheses, std::span<const std::vector<TokenId>> references) {
  return bleu_impl(hypotheses, references);
}

double token_accuracy(std::span<const std::vector<TokenId>> hypotheses,
                      std::span<const std::vector<TokenId>> references) {
  if (hypotheses.size() != references.size()) throw InvalidInput("token_accuracy: count mismatch");
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& h = hypotheses[s];
    const auto& r = references[s];
    const std::size_t common = std::min(h.size(), r.size());
    for (std::size_t i = 0; i < common; ++i) hits += h[i] == r[i] ? 1 : 0;
    total += std::max(h.size(), r.size());
  }
  return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace ger
