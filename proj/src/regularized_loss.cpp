// SPDX-License-Identifier: Apache-2.0
#include "ger/regularized_loss.hpp"

#include <cmath>
#include <sstream>

#include "ger/errors.hpp"

namespace ger {

void RegConfig::validate(std::size_t vocab_size) const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    std::ostringstream os;
    os << "beta must be a finite value >= 0, got " << beta;
    throw InvalidInput(os.str());
  }
  if (baseline) {
    if (baseline->size() != vocab_size) throw InvalidInput("baseline length does not match the vocabulary");
    if (alpha.is_zero()) {
      for (double v : *baseline) {
        if (!(v > 0.0)) throw InvalidInput("baseline must have full support when alpha = 0");
      }
    }
  }
}

ProbVec RegConfig::baseline_for(std::size_t vocab_size) const {
  if (baseline) {
    if (baseline->size() != vocab_size) throw InvalidInput("baseline length does not match the vocabulary");
    return *baseline;
  }
  return uniform(vocab_size);
}

StepLoss step_loss(const RegConfig& cfg, std::span<const double> baseline, std::size_t target,
                   std::span<const double> z) {
  StepLoss out;
  out.grad = dCE_dlogits(target, z);
  const auto logp = log_softmax(z);
  out.ce = -logp[target];
  const ProbVec p = softmax(z);
  out.reg = skew_jensen(cfg.generator, cfg.alpha, baseline, p.values());
  out.loss = out.ce;
  if (cfg.beta > 0.0) {
    out.loss += cfg.beta * out.reg;
    const GradVec g = dJ_dlogits(cfg.generator, cfg.alpha, baseline, z);
    for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += cfg.beta * g[i];
  }
  return out;
}

StepLoss step_loss(const RegConfig& cfg, std::size_t target, std::span<const double> z) {
  const ProbVec u = cfg.baseline_for(z.size());
  return step_loss(cfg, u.values(), target, z);
}

namespace {

CorpusTotals evaluate_pair(const RegConfig& cfg, std::span<const double> u, const ConditionalModel& model,
                           const SeqPair& pair) {
  CorpusTotals t;
  const std::span<const TokenId> target(pair.target);
  for (std::size_t step = 1; step < pair.target.size(); ++step) {
    const LogitsVec z = model.logits(pair.source, target.first(step));
    const auto logp = log_softmax(z.values());
    t.ce_sum -= logp[pair.target[step]];
    const ProbVec p = softmax(z.values());
    t.reg_sum += skew_jensen(cfg.generator, cfg.alpha, u, p.values());
    ++t.tokens;
  }
  return t;
}

}  // namespace

CorpusTotals evaluate_corpus_serial(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus) {
  const ProbVec u = cfg.baseline_for(model.output_size());
  CorpusTotals total;
  for (const auto& pair : corpus.pairs) {
    const CorpusTotals t = evaluate_pair(cfg, u.values(), model, pair);
    total.ce_sum += t.ce_sum;
    total.reg_sum += t.reg_sum;
    total.tokens += t.tokens;
  }
  return total;
}

CorpusTotals evaluate_corpus(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus) {
  const ProbVec u = cfg.baseline_for(model.output_size());
  const auto n = static_cast<std::ptrdiff_t>(corpus.pairs.size());
  std::vector<CorpusTotals> partial(corpus.pairs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    partial[static_cast<std::size_t>(i)] = evaluate_pair(cfg, u.values(), model, corpus.pairs[static_cast<std::size_t>(i)]);
  }
  CorpusTotals total;
  for (const auto& t : partial) {
    total.ce_sum += t.ce_sum;
    total.reg_sum += t.reg_sum;
    total.tokens += t.tokens;
  }
  return total;
}

double corpus_regularizer(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus) {
  return evaluate_corpus(cfg, model, corpus).reg_sum;
}

double total_loss(const RegConfig& cfg, const ConditionalModel& model, const Corpus& corpus) {
  const CorpusTotals t = evaluate_corpus(cfg, model, corpus);
  if (t.tokens == 0) throw InvalidInput("total_loss: corpus has no target positions");
  double loss = t.ce_mean();
  if (cfg.beta > 0.0) loss += cfg.beta * t.reg_mean();
  return loss;
}

double label_smoothing_scaled_loss(double gamma, const ConditionalModel& model, const Corpus& corpus) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("label smoothing gamma must lie in [0, 1)");
  const ProbVec u = uniform(model.output_size());
  double sum = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : corpus.pairs) {
    const std::span<const TokenId> target(pair.target);
    for (std::size_t step = 1; step < pair.target.size(); ++step) {
      const LogitsVec z = model.logits(pair.source, target.first(step));
      const auto logp = log_softmax(z.values());
      // KL(u || p) from log-probabilities directly.
      double kl_up = 0.0;
      for (std::size_t i = 0; i < logp.size(); ++i) kl_up += u[i] * (std::log(u[i]) - logp[i]);
      sum += (1.0 - gamma) * -logp[pair.target[step]] + gamma * kl_up;
      ++tokens;
    }
  }
  if (tokens == 0) throw InvalidInput("label_smoothing_scaled_loss: corpus has no target positions");
  return sum / static_cast<double>(tokens);
}

}  // namespace ger
