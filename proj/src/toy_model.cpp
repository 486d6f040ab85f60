// SPDX-License-Identifier: Apache-2.0
#include "ger/toy_model.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "ger/analysis.hpp"
#include "ger/decoding.hpp"
#include "ger/errors.hpp"

namespace ger {

ToyModelParams ToyModelParams::zeros(const ModelDims& d) {
  if (d.source_vocab == 0 || d.output_size < 2 || d.embed == 0 || d.hidden == 0 || d.window == 0) {
    throw InvalidInput("model dimensions must be positive (output size >= 2)");
  }
  ToyModelParams p;
  p.dims = d;
  p.source_embed = Matrix(d.source_vocab, d.embed);
  p.target_embed = Matrix(d.output_size + 1, d.embed);
  p.hidden_w = Matrix(d.feature_size(), d.hidden);
  p.hidden_b = Matrix(1, d.hidden);
  p.out_w = Matrix(d.hidden, d.output_size);
  p.out_b = Matrix(1, d.output_size);
  return p;
}

std::size_t ToyModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](std::string_view, const Matrix& m) { n += m.data.size(); });
  return n;
}

void ToyModelParams::validate() const {
  const ToyModelParams ref = zeros(dims);
  for_each_block([&](std::string_view name, const Matrix& m) {
    const Matrix* expected = nullptr;
    ref.for_each_block([&](std::string_view n2, const Matrix& m2) {
      if (n2 == name) expected = &m2;
    });
    if (m.rows != expected->rows || m.cols != expected->cols || m.data.size() != m.rows * m.cols) {
      throw InvalidInput("parameter block '" + std::string(name) + "' has inconsistent shape");
    }
    for (double v : m.data) {
      if (!std::isfinite(v)) throw InvalidInput("parameter block '" + std::string(name) + "' is not finite");
    }
  });
}

double init_scale(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

ToyModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  ToyModelParams p = ToyModelParams::zeros(dims);
  std::mt19937_64 rng(seed);
  p.for_each_block([&](std::string_view name, Matrix& m) {
    if (name == "hidden_b" || name == "out_b") return;
    const double s = init_scale(m.rows, m.cols);
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& v : m.data) v = dist(rng);
  });
  return p;
}

namespace {

void check_ids(const ToyModelParams& p, std::span<const TokenId> source, std::span<const TokenId> prefix) {
  if (prefix.empty()) throw InvalidInput("target prefix must start with BOS");
  for (TokenId s : source) {
    if (s >= p.dims.source_vocab) throw InvalidInput("unknown source token id " + std::to_string(s));
  }
  for (TokenId t : prefix) {
    if (t > p.dims.output_size) throw InvalidInput("unknown target token id " + std::to_string(t));
  }
}

void mean_source_embedding(const ToyModelParams& p, std::span<const TokenId> source, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (source.empty()) return;
  for (TokenId s : source) {
    const auto row = p.source_embed.row(s);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(source.size());
  for (double& v : out) v *= inv;
}

/// Window token for slot w of k at position step (prefix length), BOS-padded.
TokenId window_token(std::span<const TokenId> prefix, std::size_t k, std::size_t w, TokenId bos) {
  // slot k-1 is the newest token prefix[len-1]
  const std::size_t back = k - w;
  return back <= prefix.size() ? prefix[prefix.size() - back] : bos;
}

struct Activations {
  std::vector<double> features;
  std::vector<double> hidden;
  std::vector<double> logits;
};

void forward_step(const ToyModelParams& p, std::span<const double> source_mean, std::span<const TokenId> prefix,
                  Activations& act) {
  const std::size_t d = p.dims.embed;
  const std::size_t k = p.dims.window;
  const std::size_t h = p.dims.hidden;
  const std::size_t v = p.dims.output_size;
  const auto bos = static_cast<TokenId>(v);

  act.features.resize(p.dims.feature_size());
  std::copy(source_mean.begin(), source_mean.end(), act.features.begin());
  for (std::size_t w = 0; w < k; ++w) {
    const auto row = p.target_embed.row(window_token(prefix, k, w, bos));
    std::copy(row.begin(), row.end(), act.features.begin() + static_cast<std::ptrdiff_t>(d * (w + 1)));
  }

  act.hidden.assign(p.hidden_b.data.begin(), p.hidden_b.data.end());
  for (std::size_t i = 0; i < act.features.size(); ++i) {
    const double f = act.features[i];
    if (f == 0.0) continue;
    const double* wrow = p.hidden_w.data.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) act.hidden[j] += f * wrow[j];
  }
  for (double& a : act.hidden) a = std::tanh(a);

  act.logits.assign(p.out_b.data.begin(), p.out_b.data.end());
  for (std::size_t j = 0; j < h; ++j) {
    const double a = act.hidden[j];
    const double* wrow = p.out_w.data.data() + j * v;
    for (std::size_t o = 0; o < v; ++o) act.logits[o] += a * wrow[o];
  }
}

}  // namespace

LogitsVec forward(const ToyModelParams& params, std::span<const TokenId> source, std::span<const TokenId> prefix) {
  check_ids(params, source, prefix);
  std::vector<double> mean(params.dims.embed);
  mean_source_embedding(params, source, mean);
  Activations act;
  forward_step(params, mean, prefix, act);
  return LogitsVec(std::move(act.logits));
}

ToyModel::ToyModel(ToyModelParams params) : params_(std::move(params)) { params_.validate(); }

LogitsVec ToyModel::logits(std::span<const TokenId> source, std::span<const TokenId> prefix) const {
  return forward(params_, source, prefix);
}

namespace {

std::size_t count_tokens(std::span<const SeqPair> batch) {
  std::size_t n = 0;
  for (const auto& pair : batch) n += pair.steps();
  return n;
}

}  // namespace

BatchGradient backward(const ToyModelParams& p, const RegConfig& cfg, std::span<const SeqPair> batch) {
  const std::size_t d = p.dims.embed;
  const std::size_t k = p.dims.window;
  const std::size_t h = p.dims.hidden;
  const std::size_t v = p.dims.output_size;
  const auto bos = static_cast<TokenId>(v);

  BatchGradient out;
  out.grad = ToyModelParams::zeros(p.dims);
  out.tokens = count_tokens(batch);
  if (out.tokens == 0) return out;
  const double scale = 1.0 / static_cast<double>(out.tokens);
  const ProbVec u = cfg.baseline_for(v);

  std::vector<double> source_mean(d);
  std::vector<double> d_source_mean(d);
  std::vector<double> d_hidden(h);
  std::vector<double> d_features(p.dims.feature_size());
  Activations act;
  ToyModelParams& g = out.grad;

  for (const auto& pair : batch) {
    check_ids(p, pair.source, pair.target);
    mean_source_embedding(p, pair.source, source_mean);
    std::fill(d_source_mean.begin(), d_source_mean.end(), 0.0);
    const std::span<const TokenId> target(pair.target);

    for (std::size_t step = 1; step < pair.target.size(); ++step) {
      const auto prefix = target.first(step);
      forward_step(p, source_mean, prefix, act);
      StepLoss sl = step_loss(cfg, u.values(), pair.target[step], act.logits);
      out.loss += sl.loss * scale;
      for (double& dz : sl.grad) dz *= scale;

      for (std::size_t o = 0; o < v; ++o) g.out_b.data[o] += sl.grad[o];
      for (std::size_t j = 0; j < h; ++j) {
        const double a = act.hidden[j];
        const double* wrow = p.out_w.data.data() + j * v;
        double* grow = g.out_w.data.data() + j * v;
        double acc = 0.0;
        for (std::size_t o = 0; o < v; ++o) {
          grow[o] += a * sl.grad[o];
          acc += wrow[o] * sl.grad[o];
        }
        d_hidden[j] = acc * (1.0 - a * a);
      }

      for (std::size_t j = 0; j < h; ++j) g.hidden_b.data[j] += d_hidden[j];
      for (std::size_t i = 0; i < act.features.size(); ++i) {
        const double f = act.features[i];
        const double* wrow = p.hidden_w.data.data() + i * h;
        double* grow = g.hidden_w.data.data() + i * h;
        double acc = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
          grow[j] += f * d_hidden[j];
          acc += wrow[j] * d_hidden[j];
        }
        d_features[i] = acc;
      }

      for (std::size_t j = 0; j < d; ++j) d_source_mean[j] += d_features[j];
      for (std::size_t w = 0; w < k; ++w) {
        auto row = g.target_embed.row(window_token(prefix, k, w, bos));
        for (std::size_t j = 0; j < d; ++j) row[j] += d_features[d * (w + 1) + j];
      }
    }

    if (!pair.source.empty()) {
      const double inv = 1.0 / static_cast<double>(pair.source.size());
      for (TokenId s : pair.source) {
        auto row = g.source_embed.row(s);
        for (std::size_t j = 0; j < d; ++j) row[j] += d_source_mean[j] * inv;
      }
    }
  }
  return out;
}

double batch_loss(const ToyModelParams& p, const RegConfig& cfg, std::span<const SeqPair> batch) {
  const std::size_t tokens = count_tokens(batch);
  if (tokens == 0) return 0.0;
  const double scale = 1.0 / static_cast<double>(tokens);
  const ProbVec u = cfg.baseline_for(p.dims.output_size);
  std::vector<double> source_mean(p.dims.embed);
  Activations act;
  double loss = 0.0;
  for (const auto& pair : batch) {
    check_ids(p, pair.source, pair.target);
    mean_source_embedding(p, pair.source, source_mean);
    const std::span<const TokenId> target(pair.target);
    for (std::size_t step = 1; step < pair.target.size(); ++step) {
      forward_step(p, source_mean, target.first(step), act);
      const auto logp = log_softmax(act.logits);
      double l = -logp[pair.target[step]];
      if (cfg.beta > 0.0) {
        const ProbVec q = softmax(act.logits);
        l += cfg.beta * skew_jensen(cfg.generator, cfg.alpha, u.values(), q.values());
      }
      loss += l * scale;
    }
  }
  return loss;
}

namespace {

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

std::vector<std::vector<TokenId>> references_of(const Corpus& c) {
  std::vector<std::vector<TokenId>> refs;
  refs.reserve(c.pairs.size());
  for (const auto& p : c.pairs) {
    const auto b = p.body();
    refs.emplace_back(b.begin(), b.end());
  }
  return refs;
}

std::size_t decode_limit(const Corpus& c, std::size_t slack) {
  std::size_t longest = 0;
  for (const auto& p : c.pairs) longest = std::max(longest, p.steps());
  return longest + slack;
}

EpochRecord evaluate_epoch(int epoch, const RegConfig& cfg, const ToyModelParams& params, const Corpus& train_corpus,
                           const Corpus& dev_corpus, std::size_t max_len) {
  const ToyModel model(params);
  EpochRecord r;
  r.epoch = epoch;
  r.train_loss = total_loss(cfg, model, train_corpus);
  r.dev_loss = evaluate_corpus(RegConfig{}, model, dev_corpus).ce_mean();

  std::vector<std::vector<TokenId>> sources;
  sources.reserve(dev_corpus.pairs.size());
  for (const auto& p : dev_corpus.pairs) sources.push_back(p.source);
  DecodeConfig dc;
  dc.strategy = Strategy::Greedy;
  dc.max_len = max_len;
  const auto decoded = decode_corpus(model, sources, dc);
  std::vector<std::vector<TokenId>> hyps;
  hyps.reserve(decoded.size());
  for (const auto& d : decoded) hyps.push_back(d.tokens);
  r.dev_metric = token_accuracy(hyps, references_of(dev_corpus));
  r.avg_normalized_entropy = avg_normalized_entropy(model, dev_corpus, Trajectory::Decoded, max_len);
  return r;
}

double selection_score(const EpochRecord& r, Selection s) {
  return s == Selection::DevMetric ? r.dev_metric : -r.dev_loss;
}

}  // namespace

std::string_view to_string(Selection s) noexcept {
  return s == Selection::DevMetric ? "dev_metric" : "dev_loss";
}

Selection parse_selection(std::string_view name) {
  if (name == "dev_metric") return Selection::DevMetric;
  if (name == "dev_loss") return Selection::DevLoss;
  throw InvalidInput("unknown selection '" + std::string(name) + "' (expected dev_metric or dev_loss)");
}

TrainResult train(const RegConfig& cfg, const Corpus& train_corpus, const Corpus& dev_corpus,
                  const TrainHyper& hyper, const EpochCallback& on_epoch) {
  train_corpus.validate();
  dev_corpus.validate();
  if (train_corpus.vocab_size() != dev_corpus.vocab_size() ||
      train_corpus.source_vocab.size() != dev_corpus.source_vocab.size()) {
    throw InvalidInput("train and dev corpora use different vocabularies");
  }
  if (hyper.batch == 0 || hyper.max_epochs < 0 || hyper.patience < 1 || !(hyper.lr > 0.0)) {
    throw InvalidInput("training hyperparameters out of range");
  }
  cfg.validate(train_corpus.vocab_size());

  ModelDims dims;
  dims.source_vocab = train_corpus.source_vocab.size();
  dims.output_size = train_corpus.vocab_size();
  dims.embed = hyper.embed;
  dims.hidden = hyper.hidden;
  dims.window = hyper.window;

  // Separate streams so the shuffle order does not depend on the parameter count.
  ToyModelParams params = init_params(dims, hyper.seed);
  std::mt19937_64 shuffle_rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t max_len = decode_limit(dev_corpus, hyper.decode_slack);

  TrainResult result;
  result.params = params;
  result.history.epochs.push_back(evaluate_epoch(0, cfg, params, train_corpus, dev_corpus, max_len));
  if (on_epoch) on_epoch(result.history.epochs.back());
  double best_score = selection_score(result.history.epochs.back(), hyper.select);

  AdamState adam;
  params.for_each_block([&](std::string_view, const Matrix& m) {
    adam.m.emplace_back(m.data.size(), 0.0);
    adam.v.emplace_back(m.data.size(), 0.0);
  });

  std::vector<std::size_t> order(train_corpus.pairs.size());
  std::vector<SeqPair> batch;
  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + hyper.batch);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_corpus.pairs[order[i]]);
      BatchGradient bg = backward(params, cfg, batch);
      if (!std::isfinite(bg.loss)) throw TrainingDiverged(epoch, "non-finite batch loss");

      ++adam.step;
      const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(adam.step));
      const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(adam.step));
      std::size_t block = 0;
      std::vector<const Matrix*> grads;
      bg.grad.for_each_block([&](std::string_view, const Matrix& m) { grads.push_back(&m); });
      params.for_each_block([&](std::string_view, Matrix& w) {
        const auto& gd = grads[block]->data;
        auto& m = adam.m[block];
        auto& v = adam.v[block];
        for (std::size_t i = 0; i < w.data.size(); ++i) {
          m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gd[i];
          v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gd[i] * gd[i];
          w.data[i] -= hyper.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hyper.eps);
        }
        ++block;
      });
    }

    EpochRecord rec = evaluate_epoch(epoch, cfg, params, train_corpus, dev_corpus, max_len);
    if (!std::isfinite(rec.train_loss)) throw TrainingDiverged(epoch, "non-finite training loss");
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (const double score = selection_score(rec, hyper.select); score > best_score) {
      best_score = score;
      result.history.best_epoch = epoch;
      result.params = params;
    } else if (epoch - result.history.best_epoch >= hyper.patience) {
      break;
    }
  }
  return result;
}

double perplexity(const ConditionalModel& model, const Corpus& corpus) {
  const CorpusTotals t = evaluate_corpus(RegConfig{}, model, corpus);
  if (t.tokens == 0) throw InvalidInput("perplexity: corpus has no target positions");
  return std::exp(t.ce_mean());
}

// --- checkpoint I/O ---------------------------------------------------------

namespace {

void write_vocab(std::ostream& out, std::string_view name, const Vocab& v) {
  out << name << ' ' << v.size() << '\n';
  for (const auto& t : v.tokens()) out << t << '\n';
}

Vocab read_vocab(std::istream& in, std::string_view name) {
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != name) throw FormatError("checkpoint: expected '" + std::string(name) + "' section");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> tokens(n);
  for (auto& t : tokens) {
    if (!std::getline(in, t) || t.empty()) throw FormatError("checkpoint: truncated " + std::string(name));
  }
  return Vocab(std::move(tokens));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& d = ckpt.params.dims;
  out << "ger-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& m : ckpt.metadata) out << "# " << m << '\n';
  out << "dims " << d.source_vocab << ' ' << d.output_size << ' ' << d.embed << ' ' << d.hidden << ' ' << d.window
      << '\n';
  write_vocab(out, "source_vocab", ckpt.source_vocab);
  write_vocab(out, "target_vocab", ckpt.target_vocab.table);
  char buf[64];
  ckpt.params.for_each_block([&](std::string_view name, const Matrix& m) {
    out << "block " << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) {
        std::snprintf(buf, sizeof buf, "%a", m(r, c));
        if (c) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  });
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: empty file");
  std::istringstream head(line);
  std::string magic;
  int version = 0;
  if (!(head >> magic >> version) || magic != "ger-checkpoint") throw FormatError("checkpoint: bad header");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  while (in.peek() == '#') {
    std::getline(in, line);
    ckpt.metadata.push_back(line.size() > 2 ? line.substr(2) : std::string());
  }
  std::string tag;
  ModelDims d;
  if (!(in >> tag >> d.source_vocab >> d.output_size >> d.embed >> d.hidden >> d.window) || tag != "dims") {
    throw FormatError("checkpoint: expected dims line");
  }
  ckpt.source_vocab = read_vocab(in, "source_vocab");
  ckpt.target_vocab.table = read_vocab(in, "target_vocab");
  if (ckpt.target_vocab.output_size() != d.output_size || ckpt.source_vocab.size() != d.source_vocab) {
    throw FormatError("checkpoint: vocabulary sizes disagree with dims");
  }
  ckpt.params = ToyModelParams::zeros(d);
  ckpt.params.for_each_block([&](std::string_view name, Matrix& m) {
    std::string got;
    std::size_t rows = 0;
    std::size_t cols = 0;
    if (!(in >> tag >> got >> rows >> cols) || tag != "block" || got != name || rows != m.rows || cols != m.cols) {
      throw FormatError("checkpoint: expected block '" + std::string(name) + "' with matching shape");
    }
    std::string tok;
    for (double& v : m.data) {
      if (!(in >> tok)) throw FormatError("checkpoint: truncated block '" + std::string(name) + "'");
      char* endp = nullptr;
      v = std::strtod(tok.c_str(), &endp);
      if (endp == tok.c_str() || *endp != '\0') throw FormatError("checkpoint: bad number '" + tok + "'");
    }
  });
  if (!(in >> tag) || tag != "end") throw FormatError("checkpoint: missing end marker");
  ckpt.params.validate();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw InvalidInput("cannot write checkpoint '" + path.string() + "'");
    write_checkpoint(out, ckpt);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace ger
