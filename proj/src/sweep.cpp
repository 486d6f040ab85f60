// SPDX-License-Identifier: Apache-2.0
#include "ger/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "ger/decoding.hpp"
#include "ger/errors.hpp"
#include "ger/format.hpp"

namespace ger {

using nlohmann::json;

RegConfig RunRecord::config() const {
  RegConfig cfg;
  cfg.alpha = Alpha(alpha.value_or(1.0));
  cfg.beta = beta;
  cfg.generator = generator;
  return cfg;
}

namespace {

std::string threshold_key(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "lt_exp_neg%.0f", -std::log(eps));
  return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double number_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw FormatError(std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

}  // namespace

json to_json(const RunRecord& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["task"] = r.task;
  j["alpha"] = optional_number(r.alpha);
  j["beta"] = r.beta;
  j["generator"] = std::string(to_string(r.generator));
  j["seed"] = r.seed;
  j["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) j["error"] = r.error;
  j["dev_metric"] = r.dev_metric;
  j["dev_loss"] = r.dev_loss;
  j["test_metric"] = r.test_metric;
  j["test_bleu"] = r.test_bleu;
  j["avg_normalized_entropy"] = r.avg_normalized_entropy;
  json sp = json::object();
  for (std::size_t i = 0; i < r.sparsity.size() && i < kSparsityThresholds.size(); ++i) {
    sp[threshold_key(kSparsityThresholds[i])] = r.sparsity[i];
  }
  j["sparsity"] = sp;
  j["reference_rank"] = r.reference_rank;
  j["likelihood_ratio"] = r.likelihood_ratio;
  j["best_epoch"] = r.best_epoch;
  j["epochs_run"] = r.epochs_run;
  j["checkpoint"] = r.checkpoint;
  j["seconds"] = r.seconds;
  return j;
}

RunRecord record_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("record is not a JSON object");
  RunRecord r;
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer()) {
    throw FormatError("missing integer field 'schema_version'");
  }
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kRecordSchemaVersion) {
    throw FormatError("unsupported schema version " + std::to_string(r.schema_version));
  }
  try {
    r.task = j.at("task").get<std::string>();
    if (j.at("alpha").is_null()) {
      r.alpha.reset();
    } else {
      r.alpha = j.at("alpha").get<double>();
    }
    r.beta = number_field(j, "beta");
    r.generator = parse_generator(j.at("generator").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") throw FormatError("status must be 'ok' or 'failed'");
    r.ok = status == "ok";
    if (!r.ok) r.error = j.value("error", std::string());
    r.dev_metric = number_field(j, "dev_metric");
    r.dev_loss = number_field(j, "dev_loss");
    r.test_metric = number_field(j, "test_metric");
    r.test_bleu = number_field(j, "test_bleu");
    r.avg_normalized_entropy = number_field(j, "avg_normalized_entropy");
    const json& sp = j.at("sparsity");
    for (double eps : kSparsityThresholds) {
      const auto key = threshold_key(eps);
      r.sparsity.push_back(sp.contains(key) ? sp.at(key).get<double>() : 0.0);
    }
    r.reference_rank = number_field(j, "reference_rank");
    r.likelihood_ratio = number_field(j, "likelihood_ratio");
    r.best_epoch = j.at("best_epoch").get<int>();
    r.epochs_run = j.at("epochs_run").get<int>();
    r.checkpoint = j.at("checkpoint").get<std::string>();
    r.seconds = number_field(j, "seconds");
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad record field: ") + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("bad record field: ") + e.what());
  }
  if (r.alpha && !(*r.alpha >= 0.0 && *r.alpha <= 1.0)) throw FormatError("alpha outside [0, 1]");
  if (!(r.beta >= 0.0)) throw FormatError("beta must be >= 0");
  if (r.ok && !(r.avg_normalized_entropy >= 0.0 && r.avg_normalized_entropy <= 1.0)) {
    throw FormatError("avg_normalized_entropy outside [0, 1]");
  }
  return r;
}

void append_record(const std::filesystem::path& path, const RunRecord& r) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw InvalidInput("cannot append to records file '" + path.string() + "'");
  out << to_json(r).dump() << '\n';
  out.flush();
}

void save_records(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw InvalidInput("cannot write records file '" + path.string() + "'");
    for (const auto& r : records) out << to_json(r).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<RunRecord> read_records(std::istream& in) {
  std::vector<RunRecord> out;
  std::map<int, std::vector<std::size_t>> bad_versions;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("records line " + std::to_string(lineno) + ": malformed JSON (" + e.what() + ")");
    }
    if (j.is_object() && j.contains("schema_version") && j["schema_version"].is_number_integer() &&
        j["schema_version"].get<int>() != kRecordSchemaVersion) {
      bad_versions[j["schema_version"].get<int>()].push_back(lineno);
      continue;
    }
    try {
      out.push_back(record_from_json(j));
    } catch (const FormatError& e) {
      throw FormatError("records line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!bad_versions.empty()) {
    std::ostringstream os;
    os << "records file mixes schema versions; expected " << kRecordSchemaVersion << ", found";
    for (const auto& [version, lines] : bad_versions) {
      os << " version " << version << " (lines";
      for (auto l : lines) os << ' ' << l;
      os << ')';
    }
    throw FormatError(os.str());
  }
  return out;
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open records file '" + path.string() + "'");
  return read_records(in);
}

bool operator<(const RunKey& a, const RunKey& b) {
  // nullopt alpha sorts first.
  if (a.alpha != b.alpha) return a.alpha < b.alpha;
  if (a.beta != b.beta) return a.beta < b.beta;
  return a.seed < b.seed;
}

std::vector<RunKey> expand_grid(const SweepGrid& grid) {
  if (grid.seeds.empty()) throw InvalidInput("sweep grid: no seeds");
  std::vector<std::pair<double, double>> points = grid.points;
  if (points.empty()) {
    if (grid.alphas.empty() || grid.betas.empty()) throw InvalidInput("sweep grid: empty alpha or beta axis");
    for (double a : grid.alphas) {
      for (double b : grid.betas) points.emplace_back(a, b);
    }
  }
  std::set<RunKey> seen_raw;
  std::set<RunKey> keys;
  for (const auto& [a, b] : points) {
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("sweep grid: alpha " + std::to_string(a) + " outside [0, 1]");
    if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidInput("sweep grid: beta " + std::to_string(b) + " must be >= 0");
    for (auto seed : grid.seeds) {
      if (!seen_raw.insert(RunKey{a, b, seed}).second) {
        throw InvalidInput("sweep grid: duplicate (alpha, beta, seed) triple");
      }
      RunKey k{a, b, seed};
      if (b == 0.0 && grid.dedup_beta_zero) k.alpha.reset();
      keys.insert(k);
    }
  }
  return {keys.begin(), keys.end()};
}

std::vector<std::pair<double, double>> random_points(double alpha_lo, double alpha_hi, double beta_lo, double beta_hi,
                                                     std::size_t n, std::uint64_t seed) {
  if (!(0.0 <= alpha_lo && alpha_lo <= alpha_hi && alpha_hi <= 1.0)) throw InvalidInput("alpha box outside [0, 1]");
  if (!(0.0 <= beta_lo && beta_lo <= beta_hi)) throw InvalidInput("beta box must satisfy 0 <= lo <= hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> da(alpha_lo, alpha_hi);
  std::uniform_real_distribution<double> db(beta_lo, beta_hi);
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = da(rng);
    out.emplace_back(a, db(rng));
  }
  return out;
}

namespace {

std::vector<std::vector<std::string>> to_strings(const Corpus& c, const std::vector<std::vector<TokenId>>& seqs) {
  std::vector<std::vector<std::string>> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    std::vector<std::string> words;
    for (TokenId t : s) words.push_back(c.target_vocab.table.token(t));
    out.push_back(std::move(words));
  }
  return out;
}

std::string checkpoint_name(const SweepGrid& grid, const RunKey& key) {
  char buf[128];
  if (key.alpha) {
    std::snprintf(buf, sizeof buf, "%s_%s_a%.4f_b%.4f_s%llu.ckpt", grid.task.c_str(),
                  std::string(to_string(grid.generator)).c_str(), *key.alpha, key.beta,
                  static_cast<unsigned long long>(key.seed));
  } else {
    std::snprintf(buf, sizeof buf, "%s_%s_anone_b%.4f_s%llu.ckpt", grid.task.c_str(),
                  std::string(to_string(grid.generator)).c_str(), key.beta, static_cast<unsigned long long>(key.seed));
  }
  return buf;
}

}  // namespace

RunRecord run_one(const SweepGrid& grid, const RunKey& key, const TaskSplits& data,
                  const std::optional<std::filesystem::path>& checkpoint_dir) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.task = grid.task;
  rec.alpha = key.alpha;
  rec.beta = key.beta;
  rec.generator = grid.generator;
  rec.seed = key.seed;
  rec.sparsity.assign(kSparsityThresholds.size(), 0.0);

  RegConfig cfg = rec.config();
  TrainHyper hyper = grid.hyper;
  hyper.seed = key.seed;
  try {
    TrainResult tr = train(cfg, data.train, data.dev, hyper);
    const auto& best = tr.history.epochs[static_cast<std::size_t>(tr.history.best_epoch)];
    rec.best_epoch = tr.history.best_epoch;
    rec.epochs_run = static_cast<int>(tr.history.epochs.size()) - 1;
    rec.dev_metric = best.dev_metric;
    rec.dev_loss = best.dev_loss;

    const ToyModel model(tr.params);
    std::size_t longest = 0;
    std::vector<std::vector<TokenId>> sources;
    std::vector<std::vector<TokenId>> refs;
    for (const auto& p : data.test.pairs) {
      sources.push_back(p.source);
      const auto b = p.body();
      refs.emplace_back(b.begin(), b.end());
      longest = std::max(longest, p.steps());
    }
    DecodeConfig greedy;
    greedy.strategy = Strategy::Greedy;
    greedy.max_len = longest + hyper.decode_slack;
    std::vector<std::vector<TokenId>> hyps;
    for (auto& d : decode_corpus(model, sources, greedy)) hyps.push_back(std::move(d.tokens));
    rec.test_metric = token_accuracy(hyps, refs);
    const auto hyp_words = to_strings(data.test, hyps);
    const auto ref_words = to_strings(data.test, refs);
    rec.test_bleu = corpus_bleu(hyp_words, ref_words);
    rec.avg_normalized_entropy = avg_normalized_entropy(model, data.test, Trajectory::Decoded, greedy.max_len);
    rec.sparsity = sparsity_fractions(model, data.test, kSparsityThresholds);
    rec.reference_rank = reference_word_rank(model, data.test);
    DecodeConfig beam;
    beam.max_len = greedy.max_len;
    rec.likelihood_ratio = likelihood_ratio(model, data.test, beam).ratio;

    if (checkpoint_dir) {
      std::filesystem::create_directories(*checkpoint_dir);
      const auto path = *checkpoint_dir / checkpoint_name(grid, key);
      Checkpoint ckpt{tr.params, data.train.source_vocab, data.train.target_vocab, {}};
      ckpt.metadata.push_back("record " + to_json(rec).dump());
      save_checkpoint(path, ckpt);
      rec.checkpoint = path.string();
    }
  } catch (const TrainingDiverged& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

namespace {

RunKey key_of(const RunRecord& r) { return RunKey{r.alpha, r.beta, r.seed}; }

}  // namespace

SweepResult run_grid(const SweepGrid& grid, const SweepOptions& options) {
  if (options.parallelism < 1) throw InvalidInput("parallelism must be >= 1");
  const auto keys = expand_grid(grid);

  std::vector<RunRecord> existing;
  if (options.records_path && std::filesystem::exists(*options.records_path)) {
    existing = load_records(*options.records_path);
  }
  std::set<RunKey> done;
  for (const auto& r : existing) {
    if (r.task == grid.task && r.generator == grid.generator) done.insert(key_of(r));
  }
  std::vector<RunKey> todo;
  for (const auto& k : keys) {
    if (!done.count(k)) todo.push_back(k);
  }

  const TaskSplits data = make_reversal_task(grid.task_spec);
  std::vector<RunRecord> fresh(todo.size());
  std::mutex write_lock;
  const auto n = static_cast<std::ptrdiff_t>(todo.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(options.parallelism)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    RunRecord rec = run_one(grid, todo[idx], data, options.checkpoint_dir);
    std::lock_guard<std::mutex> guard(write_lock);
    if (options.records_path) append_record(*options.records_path, rec);
    if (options.on_record) options.on_record(rec);
    fresh[idx] = std::move(rec);
  }

  SweepResult result;
  result.trained = todo.size();
  std::set<RunKey> wanted(keys.begin(), keys.end());
  for (auto& r : existing) {
    if (r.task == grid.task && r.generator == grid.generator && wanted.count(key_of(r))) {
      result.records.push_back(std::move(r));
    }
  }
  for (auto& r : fresh) result.records.push_back(std::move(r));
  std::sort(result.records.begin(), result.records.end(),
            [](const RunRecord& a, const RunRecord& b) { return key_of(a) < key_of(b); });
  return result;
}

// --- report -------------------------------------------------------------------

namespace {

bool better_record(const RunRecord& a, const RunRecord& b) {
  if (a.test_metric != b.test_metric) return a.test_metric > b.test_metric;
  if (a.beta != b.beta) return a.beta < b.beta;
  return a.alpha.value_or(-1.0) < b.alpha.value_or(-1.0);
}

}  // namespace

Report report(const std::vector<RunRecord>& records, const ReportOptions& options) {
  std::vector<RunRecord> ok;
  Report rep;
  rep.n_records = records.size();
  for (const auto& r : records) {
    if (r.ok) {
      ok.push_back(r);
    } else {
      ++rep.n_failed;
    }
  }
  if (ok.empty()) throw InvalidInput("report: no successful records");

  rep.global_best = *std::min_element(ok.begin(), ok.end(), better_record);
  for (const auto& r : ok) {
    auto it = rep.best_per_alpha.find(r.alpha);
    if (it == rep.best_per_alpha.end() || better_record(r, it->second)) rep.best_per_alpha[r.alpha] = r;
    rep.scatter.push_back({r.alpha, r.beta, r.seed, r.avg_normalized_entropy, r.test_metric});
  }

  std::vector<double> ent;
  std::vector<double> met;
  for (const auto& s : rep.scatter) {
    ent.push_back(s.entropy);
    met.push_back(s.metric);
  }
  try {
    rep.fit = quadratic_fit(ent, met);
  } catch (const DegenerateFit& e) {
    rep.notes.push_back(std::string("quadratic fit: ") + e.what());
  }
  try {
    rep.nmi_entropy_metric = nmi(ent, met);
  } catch (const std::exception& e) {
    rep.notes.push_back(std::string("nmi(entropy; metric): ") + e.what());
  }

  std::vector<double> ra;
  std::vector<double> rm;
  std::vector<double> re;
  for (const auto& r : ok) {
    if (!r.alpha) continue;
    ra.push_back(*r.alpha);
    rm.push_back(r.test_metric);
    re.push_back(r.avg_normalized_entropy);
  }
  try {
    rep.nmi_alpha_metric = nmi(ra, rm);
  } catch (const std::exception& e) {
    rep.notes.push_back(std::string("nmi(alpha; metric): ") + e.what());
  }
  try {
    rep.ci_p_value = cond_independence_test(ra, rm, re, options.n_perm, options.seed);
  } catch (const std::exception& e) {
    rep.notes.push_back(std::string("conditional independence (alpha, metric | entropy): ") + e.what());
  }

  std::vector<RobustnessPoint> pts;
  for (const auto& r : ok) pts.push_back({r.alpha, r.beta, r.test_metric});
  rep.beta_ranges = beta_robustness(pts, options.robustness_tol);
  return rep;
}

namespace {

json alpha_label(const std::optional<double>& a) { return a ? json(*a) : json(nullptr); }

}  // namespace

json to_json(const Report& r) {
  json j;
  j["n_records"] = r.n_records;
  j["n_failed"] = r.n_failed;
  j["metric"] = "test_metric (greedy token accuracy)";
  j["global_best"] = to_json(r.global_best);
  json per = json::array();
  for (const auto& [a, rec] : r.best_per_alpha) per.push_back(to_json(rec));
  j["best_per_alpha"] = per;
  if (r.fit) {
    j["quadratic_fit"] = {{"a", r.fit->a},
                          {"b", r.fit->b},
                          {"c", r.fit->c},
                          {"r_squared", r.fit->r_squared},
                          {"argmax_entropy", optional_number(r.fit->argmax)}};
  } else {
    j["quadratic_fit"] = nullptr;
  }
  j["nmi_alpha_metric"] = optional_number(r.nmi_alpha_metric);
  j["nmi_entropy_metric"] = optional_number(r.nmi_entropy_metric);
  j["ci_test_alpha_metric_given_entropy_p_value"] = optional_number(r.ci_p_value);
  json ranges = json::array();
  for (const auto& [a, range] : r.beta_ranges) {
    ranges.push_back({{"alpha", alpha_label(a)},
                      {"beta_min", optional_number(range.beta_min)},
                      {"beta_max", optional_number(range.beta_max)}});
  }
  j["beta_robustness"] = ranges;
  j["notes"] = r.notes;
  return j;
}

namespace {

std::string alpha_cell(const std::optional<double>& a) { return a ? format_double(*a) : std::string(); }

std::string num(double v) { return format_double(v); }

}  // namespace

void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "task,alpha,beta,generator,seed,status,dev_metric,dev_loss,test_metric,test_bleu,avg_normalized_entropy";
  for (double eps : kSparsityThresholds) os << ",sparsity_" << threshold_key(eps);
  os << ",reference_rank,likelihood_ratio,best_epoch,epochs_run,checkpoint\n";
  for (const auto& r : records) {
    os << r.task << ',' << alpha_cell(r.alpha) << ',' << num(r.beta) << ',' << to_string(r.generator) << ',' << r.seed
       << ',' << (r.ok ? "ok" : "failed") << ',' << num(r.dev_metric) << ',' << num(r.dev_loss) << ',' << num(r.test_metric) << ','
       << num(r.test_bleu) << ',' << num(r.avg_normalized_entropy);
    for (std::size_t i = 0; i < kSparsityThresholds.size(); ++i) {
      os << ',' << num(i < r.sparsity.size() ? r.sparsity[i] : 0.0);
    }
    os << ',' << num(r.reference_rank) << ',' << num(r.likelihood_ratio) << ',' << r.best_epoch << ',' << r.epochs_run << ','
       << r.checkpoint << '\n';
  }
}

void write_scatter_csv(std::ostream& os, const Report& r) {
  os << "alpha,beta,seed,avg_normalized_entropy,metric\n";
  for (const auto& s : r.scatter) {
    os << alpha_cell(s.alpha) << ',' << num(s.beta) << ',' << s.seed << ',' << num(s.entropy) << ',' << num(s.metric) << '\n';
  }
}

void write_best_table_csv(std::ostream& os, const Report& r) {
  os << "row,alpha,beta,avg_normalized_entropy,test_metric,test_bleu\n";
  auto row = [&](const std::string& label, const RunRecord& rec) {
    os << label << ',' << alpha_cell(rec.alpha) << ',' << num(rec.beta) << ',' << num(rec.avg_normalized_entropy) << ','
       << num(rec.test_metric) << ',' << num(rec.test_bleu) << '\n';
  };
  for (const auto& [a, rec] : r.best_per_alpha) row(a ? "best_for_alpha" : "no_regularization", rec);
  row("global_best", r.global_best);
}

}  // namespace ger
