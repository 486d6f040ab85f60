// SPDX-License-Identifier: Apache-2.0
// ger: command-line front end for the regularizer library, the toy model, the
// decoders and the sweep/analysis pipeline.
//
// Exit codes: 0 success, 1 validation error, 2 property failure, 3 runtime fault.

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ger/analysis.hpp"
#include "ger/decoding.hpp"
#include "ger/divergence.hpp"
#include "ger/errors.hpp"
#include "ger/format.hpp"
#include "ger/prob_core.hpp"
#include "ger/properties.hpp"
#include "ger/sweep.hpp"
#include "ger/toy_model.hpp"
#include "ger/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitPropertyFailure = 2;
constexpr int kExitRuntime = 3;

// Metadata block written at the top of every text artifact.
void write_header(std::ostream& os, const json& config, std::uint64_t seed) {
  os << "# ger " << ger::kVersion << '\n';
  os << "# config: " << config.dump() << '\n';
  os << "# seed: " << seed << '\n';
}

json meta_json(const json& config, std::uint64_t seed) {
  return {{"tool", "ger"}, {"version", std::string(ger::kVersion)}, {"config", config}, {"seed", seed}};
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ger::InvalidInput("cannot write '" + path.string() + "'");
  out.precision(17);
  return out;
}

void check_alpha_beta(double alpha, double beta) {
  ger::Alpha{alpha};
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ger::InvalidInput("beta must be finite and >= 0, got " + std::to_string(beta));
  }
}

// ---------------------------------------------------------------- divergence

struct DivergenceArgs {
  std::string generator = "neg_entropy";
  std::vector<double> p;
  std::vector<double> q;
  std::optional<double> alpha;
  std::optional<std::size_t> alpha_grid;
  std::optional<std::size_t> fig1;
  std::string out;
};

void fig1_table(std::ostream& os, std::size_t points) {
  if (points < 1) throw ger::InvalidInput("--fig1 needs at least 1 point");
  const ger::ProbVec u = ger::uniform(2);
  os << "p1,kl_p_u,kl_u_p,entropy,js4,eu\n";
  for (std::size_t i = 1; i <= points; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(points + 1);
    const std::vector<double> p{x, 1.0 - x};
    using ger::format_double;
    os << format_double(x) << ',' << format_double(ger::kl(p, u.values())) << ','
       << format_double(ger::kl(u.values(), p)) << ',' << format_double(ger::entropy(p)) << ','
       << format_double(ger::skew_jensen(ger::Generator::NegEntropy, ger::Alpha(0.5), u, p)) << ','
       << format_double(ger::skew_jensen(ger::Generator::SquaredL2, ger::Alpha(0.5), u, p)) << '\n';
  }
}

int cmd_divergence(const DivergenceArgs& a) {
  const ger::Generator g = ger::parse_generator(a.generator);
  json config{{"command", "divergence"}, {"generator", a.generator}};

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!a.out.empty()) {
    file = open_out(a.out);
    os = &file;
  }
  os->precision(17);

  if (a.fig1) {
    config["fig1"] = *a.fig1;
    if (!a.out.empty()) write_header(*os, config, 0);
    fig1_table(*os, *a.fig1);
    return kExitOk;
  }
  if (a.p.empty()) throw ger::InvalidInput("--p is required unless --fig1 is given");
  const ger::ProbVec p(a.p);
  const ger::ProbVec q = a.q.empty() ? ger::uniform(p.size()) : ger::ProbVec(a.q);
  if (q.size() != p.size()) throw ger::InvalidInput("--p and --q differ in length");
  config["p"] = a.p;
  config["q"] = q.vec();

  if (a.alpha_grid) {
    config["alpha_grid"] = *a.alpha_grid;
    const auto curve = ger::divergence_curve(g, q, p, ger::alpha_grid(*a.alpha_grid));
    if (!a.out.empty()) write_header(*os, config, 0);
    ger::write_curve_csv(*os, curve, g);
    return kExitOk;
  }
  const double alpha = a.alpha.value_or(0.5);
  config["alpha"] = alpha;
  if (!a.out.empty()) write_header(*os, config, 0);
  *os << ger::format_double(ger::skew_jensen(g, ger::Alpha(alpha), q, p)) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------- check-properties

struct PropertyArgs {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::string profile = "strict";
  bool inject_fault = false;
};

int cmd_check_properties(const PropertyArgs& a) {
  ger::PropertyOptions opt;
  opt.trials = a.trials;
  opt.seed = a.seed;
  opt.profile = ger::parse_tolerance_profile(a.profile);
  opt.inject_fault = a.inject_fault;
  const auto results = ger::run_property_suite(opt);
  const bool ok = ger::print_property_report(std::cout, results);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << (ok ? "all " + std::to_string(results.size()) + " properties passed"
                   : std::to_string(failed) + " of " + std::to_string(results.size()) + " properties failed")
            << '\n';
  return ok ? kExitOk : kExitPropertyFailure;
}

// --------------------------------------------------------------------- train

struct TaskArgs {
  std::uint64_t task_seed = 7;
  std::size_t alphabet = 30;
  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::size_t n_test = 200;
  std::size_t min_len = 3;
  std::size_t max_len = 10;

  ger::ReversalTaskSpec spec() const {
    return {task_seed, alphabet, n_train, n_dev, n_test, min_len, max_len};
  }
  json to_json() const {
    return {{"task_seed", task_seed}, {"alphabet", alphabet}, {"n_train", n_train}, {"n_dev", n_dev},
            {"n_test", n_test},       {"min_len", min_len},   {"max_len", max_len}};
  }
};

struct HyperArgs {
  ger::TrainHyper h;

  json to_json() const {
    return {{"lr", h.lr},         {"beta1", h.beta1},     {"beta2", h.beta2},   {"eps", h.eps},
            {"epochs", h.max_epochs}, {"batch", h.batch}, {"patience", h.patience}, {"embed", h.embed},
            {"hidden", h.hidden}, {"window", h.window},   {"seed", h.seed},
            {"select", std::string(ger::to_string(h.select))}};
  }
};

void add_task_flags(CLI::App* sub, TaskArgs& t) {
  sub->add_option("--task-seed", t.task_seed, "seed of the generated reversal task")->capture_default_str();
  sub->add_option("--alphabet", t.alphabet, "reversal task alphabet size")->capture_default_str();
  sub->add_option("--n-train", t.n_train, "generated training pairs")->capture_default_str();
  sub->add_option("--n-dev", t.n_dev, "generated development pairs")->capture_default_str();
  sub->add_option("--n-test", t.n_test, "generated test pairs")->capture_default_str();
  sub->add_option("--min-len", t.min_len, "shortest generated sequence")->capture_default_str();
  sub->add_option("--max-len", t.max_len, "longest generated sequence")->capture_default_str();
}

void add_hyper_flags(CLI::App* sub, HyperArgs& a) {
  auto& h = a.h;
  sub->add_option("--lr", h.lr, "Adam learning rate")->capture_default_str();
  sub->add_option("--epochs", h.max_epochs, "maximum epochs")->capture_default_str();
  sub->add_option("--batch", h.batch, "minibatch size (pairs)")->capture_default_str();
  sub->add_option("--patience", h.patience, "epochs without dev improvement before stopping")->capture_default_str();
  sub->add_option("--embed", h.embed, "embedding width d")->capture_default_str();
  sub->add_option("--hidden", h.hidden, "hidden width h")->capture_default_str();
  sub->add_option("--window", h.window, "target context window k")->capture_default_str();
  sub->add_option_function<std::string>(
         "--select", [&h](const std::string& v) { h.select = ger::parse_selection(v); },
         "checkpoint selection: dev_metric or dev_loss")
      ->check(CLI::IsMember({"dev_metric", "dev_loss"}))
      ->default_str(std::string(ger::to_string(h.select)));
}

struct TrainArgs {
  double alpha = 1.0;
  double beta = 0.0;
  std::string generator = "neg_entropy";
  std::uint64_t seed = 0;
  std::string train_path;
  std::string dev_path;
  std::string out;
  std::string history;
  TaskArgs task;
  HyperArgs hyper;
};

int cmd_train(TrainArgs a) {
  check_alpha_beta(a.alpha, a.beta);
  a.hyper.h.seed = a.seed;
  const ger::RegConfig cfg{ger::Alpha(a.alpha), a.beta, ger::parse_generator(a.generator), std::nullopt};

  ger::Corpus train_corpus;
  ger::Corpus dev_corpus;
  json config{{"command", "train"}, {"alpha", a.alpha},     {"beta", a.beta},
              {"generator", a.generator}, {"hyper", a.hyper.to_json()}};
  if (!a.train_path.empty() || !a.dev_path.empty()) {
    if (a.train_path.empty() || a.dev_path.empty()) throw ger::InvalidInput("--train and --dev go together");
    train_corpus = ger::read_corpus_file(a.train_path);
    dev_corpus = ger::read_corpus_file(a.dev_path, &train_corpus.source_vocab, &train_corpus.target_vocab);
    config["train"] = a.train_path;
    config["dev"] = a.dev_path;
  } else {
    auto splits = ger::make_reversal_task(a.task.spec());
    train_corpus = std::move(splits.train);
    dev_corpus = std::move(splits.dev);
    config["task"] = a.task.to_json();
  }

  std::ofstream hist;
  if (!a.history.empty()) {
    hist = open_out(a.history);
    write_header(hist, config, a.seed);
    hist << "epoch,train_loss,dev_loss,dev_metric,avg_normalized_entropy\n";
  }
  const auto result = ger::train(cfg, train_corpus, dev_corpus, a.hyper.h, [&](const ger::EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss << " dev_loss " << e.dev_loss
              << " dev_metric " << e.dev_metric << " entropy " << e.avg_normalized_entropy << '\n';
    if (hist) {
      hist << e.epoch << ',' << e.train_loss << ',' << e.dev_loss << ',' << e.dev_metric << ','
           << e.avg_normalized_entropy << '\n';
    }
  });

  ger::Checkpoint ckpt{result.params, train_corpus.source_vocab, train_corpus.target_vocab, {}};
  ckpt.metadata = {"ger " + std::string(ger::kVersion), "config: " + config.dump(),
                   "seed: " + std::to_string(a.seed), "best_epoch: " + std::to_string(result.history.best_epoch)};
  ger::save_checkpoint(a.out, ckpt);

  const auto& best = result.history.epochs.at(static_cast<std::size_t>(result.history.best_epoch));
  std::cout << "best_epoch " << best.epoch << " dev_loss " << best.dev_loss << " dev_metric " << best.dev_metric
            << " entropy " << best.avg_normalized_entropy << '\n';
  return kExitOk;
}

// -------------------------------------------------------------------- decode

struct DecodeArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  std::string strategy;
  std::optional<std::size_t> beam;
  bool no_length_norm = false;
  double temperature = 1.0;
  std::size_t max_len = 64;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool scores = false;
};

std::vector<std::vector<ger::TokenId>> read_sources(const fs::path& path, const ger::Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw ger::InvalidInput("cannot open input file '" + path.string() + "'");
  std::vector<std::vector<ger::TokenId>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string src = line.substr(0, line.find('\t'));
    std::vector<ger::TokenId> ids;
    for (const auto& w : ger::split_whitespace(src)) {
      if (!vocab.contains(w)) {
        throw ger::InvalidInput(path.string() + " line " + std::to_string(n) + ": unknown source token '" + w + "'");
      }
      ids.push_back(vocab.id(w));
    }
    if (ids.empty()) throw ger::InvalidInput(path.string() + " line " + std::to_string(n) + ": empty source");
    out.push_back(std::move(ids));
  }
  return out;
}

int cmd_decode(const DecodeArgs& a) {
  const ger::Checkpoint ckpt = ger::load_checkpoint(a.checkpoint);
  const ger::ToyModel model(ckpt.params);

  ger::DecodeConfig cfg;
  if (!a.strategy.empty()) cfg.strategy = ger::parse_strategy(a.strategy);
  if (a.beam) {
    if (!a.strategy.empty() && cfg.strategy != ger::Strategy::Beam) {
      throw ger::InvalidInput("--beam only applies to the beam strategy");
    }
    cfg.strategy = ger::Strategy::Beam;
    cfg.beam_size = *a.beam;
  }
  cfg.length_normalize = !a.no_length_norm;
  cfg.temperature = a.temperature;
  cfg.max_len = a.max_len;
  cfg.seed = a.seed;
  cfg.validate();

  const auto sources = read_sources(a.input, ckpt.source_vocab);
  if (a.jobs < 1) throw ger::InvalidInput("--jobs must be >= 1");
  omp_set_num_threads(a.jobs);
  const auto decoded = ger::decode_corpus(model, sources, cfg);

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!a.out.empty()) {
    file = open_out(a.out);
    os = &file;
  }
  os->precision(17);
  for (const auto& d : decoded) {
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      if (i) *os << ' ';
      *os << ckpt.target_vocab.table.token(d.tokens[i]);
    }
    if (a.scores) *os << '\t' << d.log_prob;
    *os << '\n';
  }

  // Provenance goes to a sidecar so the hypothesis file holds hypotheses only.
  if (!a.out.empty()) {
    json config{{"command", "decode"},
                {"checkpoint", a.checkpoint},
                {"input", a.input},
                {"strategy", std::string(ger::to_string(cfg.strategy))},
                {"beam", cfg.beam_size},
                {"length_normalize", cfg.length_normalize},
                {"temperature", cfg.temperature},
                {"max_len", cfg.max_len},
                {"jobs", a.jobs}};
    std::size_t truncated = 0;
    for (const auto& d : decoded) truncated += d.truncated ? 1 : 0;
    json meta = meta_json(config, a.seed);
    meta["sentences"] = decoded.size();
    meta["truncated"] = truncated;
    auto side = open_out(a.out + ".meta.json");
    side << meta.dump(2) << '\n';
  }
  return kExitOk;
}

// --------------------------------------------------------------------- sweep

struct SweepArgs {
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> betas{0.0, 0.1, 0.25, 0.5, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string generator = "neg_entropy";
  std::size_t random = 0;
  std::vector<double> alpha_range{0.0, 1.0};
  std::vector<double> beta_range{0.0, 1.0};
  std::uint64_t random_seed = 0;
  bool no_dedup = false;
  int jobs = 1;
  std::string records = "records.jsonl";
  std::string checkpoint_dir;
  TaskArgs task;
  HyperArgs hyper{ger::SweepGrid{}.hyper};
};

int cmd_sweep(const SweepArgs& a) {
  ger::SweepGrid grid;
  grid.alphas = a.alphas;
  grid.betas = a.betas;
  grid.seeds = a.seeds;
  grid.generator = ger::parse_generator(a.generator);
  grid.task_spec = a.task.spec();
  grid.hyper = a.hyper.h;
  grid.dedup_beta_zero = !a.no_dedup;
  if (a.random > 0) {
    if (a.alpha_range.size() != 2 || a.beta_range.size() != 2) {
      throw ger::InvalidInput("--alpha-range and --beta-range take two values");
    }
    grid.points = ger::random_points(a.alpha_range[0], a.alpha_range[1], a.beta_range[0], a.beta_range[1],
                                     a.random, a.random_seed);
  }
  for (double al : grid.alphas) check_alpha_beta(al, 0.0);
  for (double b : grid.betas) check_alpha_beta(0.0, b);
  if (a.jobs < 1) throw ger::InvalidInput("--jobs must be >= 1");

  const std::size_t planned = ger::expand_grid(grid).size();
  ger::SweepOptions opt;
  opt.parallelism = a.jobs;
  opt.records_path = fs::path(a.records);
  if (!a.checkpoint_dir.empty()) opt.checkpoint_dir = fs::path(a.checkpoint_dir);
  opt.on_record = [](const ger::RunRecord& r) {
    std::cerr << "run alpha=" << (r.alpha ? std::to_string(*r.alpha) : std::string("-")) << " beta=" << r.beta
              << " seed=" << r.seed << (r.ok ? " ok" : " failed: " + r.error) << '\n';
  };
  const auto result = ger::run_grid(grid, opt);

  json config{{"command", "sweep"},          {"alphas", a.alphas},       {"betas", a.betas},
              {"seeds", a.seeds},            {"generator", a.generator}, {"dedup_beta_zero", !a.no_dedup},
              {"random", a.random},          {"jobs", a.jobs},           {"task", a.task.to_json()},
              {"hyper", a.hyper.to_json()}};
  if (a.random > 0) {
    config["alpha_range"] = a.alpha_range;
    config["beta_range"] = a.beta_range;
  }
  auto side = open_out(a.records + ".meta.json");
  side << meta_json(config, a.random_seed).dump(2) << '\n';

  std::size_t failed = 0;
  for (const auto& r : result.records) failed += r.ok ? 0 : 1;
  std::cout << "records " << result.records.size() << " planned " << planned << " trained " << result.trained
            << " failed " << failed << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string records = "records.jsonl";
  std::string out_dir = ".";
  double tol = 0.01;
  std::size_t n_perm = 999;
  std::uint64_t seed = 0;
};

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream os;
  os << *v;
  return os.str();
}

int cmd_analyze(const AnalyzeArgs& a) {
  const auto records = ger::load_records(a.records);
  const ger::Report rep = ger::report(records, {a.tol, a.n_perm, a.seed});
  const json config{{"command", "analyze"}, {"records", a.records}, {"tol", a.tol}, {"n_perm", a.n_perm}};
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);

  {
    json j = ger::to_json(rep);
    j["meta"] = meta_json(config, a.seed);
    auto out = open_out(dir / "report.json");
    out << j.dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "scatter.csv");
    write_header(out, config, a.seed);
    ger::write_scatter_csv(out, rep);
  }
  {
    auto out = open_out(dir / "best.csv");
    write_header(out, config, a.seed);
    ger::write_best_table_csv(out, rep);
  }
  {
    auto out = open_out(dir / "records.csv");
    write_header(out, config, a.seed);
    ger::write_records_csv(out, records);
  }

  std::cout << "records " << rep.n_records << " failed " << rep.n_failed << '\n';
  std::cout << "best alpha=" << opt_str(rep.global_best.alpha) << " beta=" << rep.global_best.beta
            << " seed=" << rep.global_best.seed << " test_metric=" << rep.global_best.test_metric << '\n';
  if (rep.fit) {
    std::cout << "quadratic_fit a=" << rep.fit->a << " b=" << rep.fit->b << " c=" << rep.fit->c
              << " r2=" << rep.fit->r_squared << " argmax=" << opt_str(rep.fit->argmax) << '\n';
  }
  std::cout << "nmi_entropy_metric " << opt_str(rep.nmi_entropy_metric) << '\n';
  std::cout << "nmi_alpha_metric " << opt_str(rep.nmi_alpha_metric) << '\n';
  std::cout << "ci_p_value " << opt_str(rep.ci_p_value) << '\n';
  for (const auto& [alpha, range] : rep.beta_ranges) {
    std::cout << "beta_range alpha=" << opt_str(alpha) << " [" << opt_str(range.beta_min) << ", "
              << opt_str(range.beta_max) << "]\n";
  }
  for (const auto& n : rep.notes) std::cout << "note: " << n << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized entropy regularization: divergences, training, decoding and analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ger::kVersion));
  app.set_config("--config", "", "TOML/INI file of flag values; command-line flags win");

  DivergenceArgs div;
  auto* s_div = app.add_subcommand("divergence", "skew-Jensen divergence J_alpha(q || p) values and curves");
  s_div->add_option("--generator", div.generator, "neg_entropy or squared_l2")->capture_default_str();
  s_div->add_option("--p", div.p, "model distribution, comma separated")->delimiter(',');
  s_div->add_option("--q", div.q, "baseline distribution (default uniform)")->delimiter(',');
  auto* o_alpha = s_div->add_option("--alpha", div.alpha, "single alpha in [0, 1] (default 0.5)");
  auto* o_grid = s_div->add_option("--alpha-grid", div.alpha_grid, "curve over 0, N interior points, 1");
  o_alpha->excludes(o_grid);
  auto* o_fig1 = s_div->add_option("--fig1", div.fig1, "Bernoulli table of KL(p||u), KL(u||p), H, 4JS, Eu on N points");
  o_fig1->excludes(o_alpha)->excludes(o_grid);
  s_div->add_option("--out", div.out, "output file (stdout when omitted)");

  PropertyArgs prop;
  auto* s_prop = app.add_subcommand("check-properties", "run the property suite; exit 2 on any failure");
  s_prop->add_option("--trials", prop.trials, "random draws per property")->capture_default_str();
  s_prop->add_option("--seed", prop.seed, "RNG seed")->capture_default_str();
  s_prop->add_option("--profile", prop.profile, "strict or loose (x100 tolerances)")->capture_default_str();
  s_prop->add_flag("--inject-fault", prop.inject_fault, "flip the logit-gradient sign (harness test)")->group("");

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "train the toy model with the regularized objective");
  s_train->add_option("--alpha", tr.alpha, "skew parameter in [0, 1]")->capture_default_str();
  s_train->add_option("--beta", tr.beta, "regularizer strength >= 0")->capture_default_str();
  s_train->add_option("--generator", tr.generator, "neg_entropy or squared_l2")->capture_default_str();
  s_train->add_option("--seed", tr.seed, "initialization and shuffling seed")->capture_default_str();
  s_train->add_option("--train", tr.train_path, "training corpus (source<TAB>target); default: reversal task")
      ->envname("GER_TRAIN");
  s_train->add_option("--dev", tr.dev_path, "development corpus")->envname("GER_DEV");
  s_train->add_option("--out", tr.out, "checkpoint path")->required()->envname("GER_CHECKPOINT");
  s_train->add_option("--history", tr.history, "per-epoch CSV");
  add_task_flags(s_train, tr.task);
  add_hyper_flags(s_train, tr.hyper);

  DecodeArgs dec;
  auto* s_dec = app.add_subcommand("decode", "decode source sentences with a trained checkpoint");
  s_dec->add_option("--checkpoint", dec.checkpoint, "checkpoint path")->required()->envname("GER_CHECKPOINT");
  s_dec->add_option("--input", dec.input, "sources, one per line (text after a TAB is ignored)")->required();
  s_dec->add_option("--out", dec.out, "hypothesis file; provenance goes to <out>.meta.json");
  s_dec->add_option("--strategy", dec.strategy, "greedy, beam or sample (default beam)");
  s_dec->add_option("--beam", dec.beam, "beam width (default 5)");
  s_dec->add_flag("--no-length-norm", dec.no_length_norm, "rank beam hypotheses by raw log-probability");
  s_dec->add_option("--temperature", dec.temperature, "sampling temperature")->capture_default_str();
  s_dec->add_option("--max-len", dec.max_len, "maximum generated tokens, EOS included")->capture_default_str();
  s_dec->add_option("--seed", dec.seed, "sampling seed (sentence i uses seed + i)")->capture_default_str();
  s_dec->add_option("--jobs", dec.jobs, "decoder threads")->capture_default_str();
  s_dec->add_flag("--scores", dec.scores, "append the hypothesis log-probability after a TAB");

  SweepArgs sw;
  auto* s_sweep = app.add_subcommand("sweep", "train and evaluate every (alpha, beta, seed); resumable");
  s_sweep->add_option("--alphas", sw.alphas, "alpha axis")->delimiter(',')->capture_default_str();
  s_sweep->add_option("--betas", sw.betas, "beta axis")->delimiter(',')->capture_default_str();
  s_sweep->add_option("--seeds", sw.seeds, "seed axis")->delimiter(',')->capture_default_str();
  s_sweep->add_option("--generator", sw.generator, "neg_entropy or squared_l2")->capture_default_str();
  s_sweep->add_option("--random", sw.random, "draw N uniform (alpha, beta) points instead of the product");
  s_sweep->add_option("--alpha-range", sw.alpha_range, "lo,hi for --random")->delimiter(',')->capture_default_str();
  s_sweep->add_option("--beta-range", sw.beta_range, "lo,hi for --random")->delimiter(',')->capture_default_str();
  s_sweep->add_option("--random-seed", sw.random_seed, "seed for --random")->capture_default_str();
  s_sweep->add_flag("--no-dedup", sw.no_dedup, "keep one beta = 0 run per alpha");
  s_sweep->add_option("--jobs", sw.jobs, "concurrent runs")->capture_default_str();
  s_sweep->add_option("--records", sw.records, "JSONL record file")->envname("GER_RECORDS")->capture_default_str();
  s_sweep->add_option("--checkpoint-dir", sw.checkpoint_dir, "save each run's checkpoint here")
      ->envname("GER_CHECKPOINT_DIR");
  add_task_flags(s_sweep, sw.task);
  add_hyper_flags(s_sweep, sw.hyper);

  AnalyzeArgs an;
  auto* s_an = app.add_subcommand("analyze", "summary tables, scatter, fit and dependence statistics");
  s_an->add_option("--records", an.records, "JSONL record file")->envname("GER_RECORDS")->capture_default_str();
  s_an->add_option("--out-dir", an.out_dir, "output directory")->envname("GER_OUT_DIR")->capture_default_str();
  s_an->add_option("--tol", an.tol, "relative metric tolerance for beta ranges")->capture_default_str();
  s_an->add_option("--n-perm", an.n_perm, "permutations for the conditional-independence test")
      ->capture_default_str();
  s_an->add_option("--seed", an.seed, "permutation seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*s_div) return cmd_divergence(div);
    if (*s_prop) return cmd_check_properties(prop);
    if (*s_train) return cmd_train(tr);
    if (*s_dec) return cmd_decode(dec);
    if (*s_sweep) return cmd_sweep(sw);
    if (*s_an) return cmd_analyze(an);
  } catch (const ger::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ger::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ger::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
