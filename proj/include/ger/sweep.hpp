// SPDX-License-Identifier: Apache-2.0
#pragma once

// Grid / random sweeps over (alpha, beta, seed), JSON-lines run records, and
// the aggregate report (best rows, entropy-vs-metric fit, NMI, conditional
// independence, beta robustness).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ger/analysis.hpp"
#include "ger/corpus.hpp"
#include "ger/divergence.hpp"
#include "ger/regularized_loss.hpp"
#include "ger/toy_model.hpp"

#include <json.hpp>

namespace ger {

inline constexpr int kRecordSchemaVersion = 1;

struct RunRecord {
  int schema_version = kRecordSchemaVersion;
  std::string task = "reversal";
  /// nullopt for beta = 0: the regularizer is inactive and alpha is meaningless.
  std::optional<double> alpha;
  double beta = 0.0;
  Generator generator = Generator::NegEntropy;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;

  double dev_metric = 0.0;   // greedy token accuracy, best epoch
  double dev_loss = 0.0;     // unregularized dev NLL per token, best epoch
  double test_metric = 0.0;  // greedy token accuracy on test
  double test_bleu = 0.0;
  double avg_normalized_entropy = 0.0;  // test set, decoded trajectory
  std::vector<double> sparsity;         // one per kSparsityThresholds
  double reference_rank = 0.0;
  double likelihood_ratio = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::string checkpoint;
  double seconds = 0.0;  // wall time of the run

  RegConfig config() const;
};

nlohmann::json to_json(const RunRecord& r);
/// Validates field types and invariants; throws FormatError.
RunRecord record_from_json(const nlohmann::json& j);

/// One JSON object per line.
void append_record(const std::filesystem::path& path, const RunRecord& r);
void save_records(const std::filesystem::path& path, const std::vector<RunRecord>& records);
/// Throws FormatError naming the line for malformed JSON and listing every
/// unsupported schema version found.
std::vector<RunRecord> load_records(const std::filesystem::path& path);
std::vector<RunRecord> read_records(std::istream& in);

struct RunKey {
  std::optional<double> alpha;
  double beta = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const RunKey&, const RunKey&) = default;
  friend bool operator<(const RunKey& a, const RunKey& b);
};

struct SweepGrid {
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> betas{0.0, 0.1, 0.25, 0.5, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// When non-empty, replaces the alphas x betas product (random sweeps).
  std::vector<std::pair<double, double>> points;
  Generator generator = Generator::NegEntropy;
  std::string task = "reversal";
  ReversalTaskSpec task_spec;
  /// Checkpoints are selected by dev loss unless overridden.
  TrainHyper hyper = [] {
    TrainHyper h;
    h.select = Selection::DevLoss;
    return h;
  }();
  /// Collapse beta = 0 across alpha: the objective is the same for every alpha.
  bool dedup_beta_zero = true;
};

/// Triples to run, sorted by (alpha, beta, seed) with nullopt alpha first.
/// Throws InvalidInput for empty axes, out-of-range values or duplicates.
std::vector<RunKey> expand_grid(const SweepGrid& grid);

/// n (alpha, beta) points drawn uniformly from the box.
std::vector<std::pair<double, double>> random_points(double alpha_lo, double alpha_hi, double beta_lo, double beta_hi,
                                                     std::size_t n, std::uint64_t seed);

/// Trains and evaluates one configuration. Divergence becomes a failed record.
RunRecord run_one(const SweepGrid& grid, const RunKey& key, const TaskSplits& data,
                  const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

struct SweepOptions {
  int parallelism = 1;
  std::optional<std::filesystem::path> records_path;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const RunRecord&)> on_record;
};

struct SweepResult {
  std::vector<RunRecord> records;  // sorted by key
  std::size_t trained = 0;         // runs executed in this call
};

/// Runs every key without an existing record in options.records_path.
SweepResult run_grid(const SweepGrid& grid, const SweepOptions& options);

struct ScatterRow {
  std::optional<double> alpha;
  double beta;
  std::uint64_t seed;
  double entropy;
  double metric;
};

struct Report {
  std::size_t n_records = 0;
  std::size_t n_failed = 0;
  RunRecord global_best;
  std::map<std::optional<double>, RunRecord> best_per_alpha;
  std::vector<ScatterRow> scatter;
  std::optional<QuadraticFit> fit;
  std::optional<double> nmi_alpha_metric;
  std::optional<double> nmi_entropy_metric;
  std::optional<double> ci_p_value;
  std::map<std::optional<double>, BetaRange> beta_ranges;
  std::vector<std::string> notes;  // why an optional statistic is absent
};

struct ReportOptions {
  double robustness_tol = 0.01;
  std::size_t n_perm = 999;
  std::uint64_t seed = 0;
};

/// Ties for best rows go to smaller beta, then smaller alpha.
Report report(const std::vector<RunRecord>& records, const ReportOptions& options = {});

nlohmann::json to_json(const Report& r);
void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records);
void write_scatter_csv(std::ostream& os, const Report& r);
void write_best_table_csv(std::ostream& os, const Report& r);

}  // namespace ger
