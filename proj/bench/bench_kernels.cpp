// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernel timings. Also checks the two agree.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "ger/analysis.hpp"
#include "ger/corpus.hpp"
#include "ger/decoding.hpp"
#include "ger/regularized_loss.hpp"
#include "ger/toy_model.hpp"

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool agree) {
  std::printf("%-24s %10.4f %10.4f %7.2fx  %s\n", name, serial, parallel, serial / parallel, agree ? "agree" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel kernel timings"};
  int reps = 3;
  int threads = 0;
  std::size_t pairs = 400;
  app.add_option("--reps", reps, "repetitions (best time is reported)")->capture_default_str();
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)")->capture_default_str();
  app.add_option("--pairs", pairs, "corpus size")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  ger::ReversalTaskSpec spec;
  spec.n_train = pairs;
  spec.n_dev = 1;
  spec.n_test = 1;
  const ger::Corpus corpus = ger::make_reversal_task(spec).train;
  const ger::ModelDims dims{corpus.source_vocab.size(), corpus.vocab_size(), 32, 64, 4};
  const ger::ToyModel model(ger::init_params(dims, 1));
  const ger::RegConfig cfg{ger::Alpha(0.5), 0.5, ger::Generator::NegEntropy, std::nullopt};

  std::printf("threads %d, %zu pairs, best of %d\n", omp_get_max_threads(), pairs, reps);
  std::printf("%-24s %10s %10s %8s\n", "kernel", "serial s", "parallel s", "speedup");

  ger::CorpusTotals ts;
  ger::CorpusTotals tp;
  const double es = best_of(reps, [&] { ts = ger::evaluate_corpus_serial(cfg, model, corpus); });
  const double ep = best_of(reps, [&] { tp = ger::evaluate_corpus(cfg, model, corpus); });
  row("evaluate_corpus", es, ep, std::abs(ts.ce_sum - tp.ce_sum) <= 1e-9 * ts.ce_sum && std::abs(ts.reg_sum - tp.reg_sum) <= 1e-9 * ts.reg_sum);

  std::vector<std::vector<ger::TokenId>> sources;
  for (const auto& p : corpus.pairs) sources.push_back(p.source);
  ger::DecodeConfig dc;
  dc.max_len = 16;
  std::vector<ger::Decoded> ds;
  std::vector<ger::Decoded> dp;
  const double bs = best_of(reps, [&] { ds = ger::decode_corpus_serial(model, sources, dc); });
  const double bp = best_of(reps, [&] { dp = ger::decode_corpus(model, sources, dc); });
  bool same = ds.size() == dp.size();
  for (std::size_t i = 0; same && i < ds.size(); ++i) same = ds[i].tokens == dp[i].tokens;
  row("decode_corpus (beam 5)", bs, bp, same);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> a(300);
  std::vector<double> b(300);
  std::vector<double> c(300);
  for (std::size_t i = 0; i < a.size(); ++i) {
    c[i] = n(rng);
    a[i] = c[i] + n(rng);
    b[i] = c[i] + n(rng);
  }
  double ps = 0.0;
  double pp = 0.0;
  const double cs = best_of(reps, [&] { ps = ger::cond_independence_test_serial(a, b, c, 9999, 1); });
  const double cp = best_of(reps, [&] { pp = ger::cond_independence_test(a, b, c, 9999, 1); });
  row("cond_independence_test", cs, cp, ps == pp);
  return 0;
}
