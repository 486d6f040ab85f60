// SPDX-License-Identifier: Apache-2.0
#pragma once

// Windowed feed-forward conditional language model with hand-written backprop.
//
//   features = [mean source embedding | embeddings of the last k prefix tokens]
//   logits   = out_w^T tanh(hidden_w^T features + hidden_b) + out_b
//
// The prefix window is left-padded with BOS. Every matrix is row-major.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ger/corpus.hpp"
#include "ger/model.hpp"
#include "ger/regularized_loss.hpp"

namespace ger {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ModelDims {
  std::size_t source_vocab = 0;
  /// Softmax size |Y| + 1. The target embedding has one more row, for BOS.
  std::size_t output_size = 0;
  std::size_t embed = 32;
  std::size_t hidden = 64;
  std::size_t window = 4;

  std::size_t feature_size() const noexcept { return embed * (window + 1); }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ToyModelParams {
  ModelDims dims;
  Matrix source_embed;  // source_vocab x embed
  Matrix target_embed;  // (output_size + 1) x embed
  Matrix hidden_w;      // feature_size x hidden
  Matrix hidden_b;      // 1 x hidden
  Matrix out_w;         // hidden x output_size
  Matrix out_b;         // 1 x output_size

  /// Zero-filled parameters of the right shapes.
  static ToyModelParams zeros(const ModelDims& dims);

  template <class F>
  void for_each_block(F&& f) {
    f(std::string_view("source_embed"), source_embed);
    f(std::string_view("target_embed"), target_embed);
    f(std::string_view("hidden_w"), hidden_w);
    f(std::string_view("hidden_b"), hidden_b);
    f(std::string_view("out_w"), out_w);
    f(std::string_view("out_b"), out_b);
  }
  template <class F>
  void for_each_block(F&& f) const {
    const_cast<ToyModelParams*>(this)->for_each_block(
        [&](std::string_view name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
  }

  std::size_t parameter_count() const;
  /// Throws InvalidInput on inconsistent shapes or non-finite entries.
  void validate() const;

  friend bool operator==(const ToyModelParams&, const ToyModelParams&) = default;
};

/// Uniform(-s, s) weights with s = sqrt(6 / (fan_in + fan_out)); zero biases.
ToyModelParams init_params(const ModelDims& dims, std::uint64_t seed);

/// Glorot scale used by init_params for a rows x cols block.
double init_scale(std::size_t fan_in, std::size_t fan_out);

/// Logits for the next target token. Throws InvalidInput on unknown ids or an
/// empty prefix.
LogitsVec forward(const ToyModelParams& params, std::span<const TokenId> source,
                  std::span<const TokenId> prefix);

class ToyModel final : public ConditionalModel {
 public:
  explicit ToyModel(ToyModelParams params);

  std::size_t output_size() const override { return params_.dims.output_size; }
  LogitsVec logits(std::span<const TokenId> source, std::span<const TokenId> prefix) const override;

  const ToyModelParams& params() const noexcept { return params_; }

 private:
  ToyModelParams params_;
};

struct BatchGradient {
  ToyModelParams grad;  // same shapes as the parameters
  double loss = 0.0;    // mean step loss over the batch's target positions
  std::size_t tokens = 0;
};

/// Exact gradient of the mean step loss over every target position in batch.
BatchGradient backward(const ToyModelParams& params, const RegConfig& cfg, std::span<const SeqPair> batch);

/// Mean step loss only (the quantity backward differentiates).
double batch_loss(const ToyModelParams& params, const RegConfig& cfg, std::span<const SeqPair> batch);

/// Checkpoint selection and early-stopping signal.
enum class Selection {
  DevMetric,  ///< greedy token accuracy on dev, higher is better
  DevLoss,    ///< unregularized dev NLL per token, lower is better
};

std::string_view to_string(Selection s) noexcept;
Selection parse_selection(std::string_view name);

struct TrainHyper {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_epochs = 30;
  std::size_t batch = 32;
  int patience = 5;
  std::uint64_t seed = 1;
  std::size_t embed = 32;
  std::size_t hidden = 64;
  std::size_t window = 4;
  /// Extra decode length beyond the longest dev reference.
  std::size_t decode_slack = 5;
  Selection select = Selection::DevMetric;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // regularized objective, per token
  double dev_loss = 0.0;    // unregularized dev NLL, per token
  double dev_metric = 0.0;  // greedy token accuracy on dev
  double avg_normalized_entropy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;  // epoch 0 is the untrained initialization
  /// Best epoch under TrainHyper::select.
  int best_epoch = 0;
};

struct TrainResult {
  ToyModelParams params;  // best-dev-metric checkpoint
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on the regularized objective with early stopping on the dev metric.
/// Throws TrainingDiverged when the loss stops being finite.
TrainResult train(const RegConfig& cfg, const Corpus& train_corpus, const Corpus& dev_corpus,
                  const TrainHyper& hyper, const EpochCallback& on_epoch = {});

/// exp(mean per-token NLL).
double perplexity(const ConditionalModel& model, const Corpus& corpus);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ToyModelParams params;
  Vocab source_vocab;
  TargetVocab target_vocab;
  /// Free-form provenance lines written as '#' comments.
  std::vector<std::string> metadata;
};

/// Text format: a version line, '#' metadata, vocabularies, then each block as
/// "block <name> <rows> <cols>" followed by rows of hex floats (bit-exact).
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ger
