// SPDX-License-Identifier: Apache-2.0
#include "ger/properties.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "ger/divergence.hpp"
#include "ger/errors.hpp"
#include "ger/gradients.hpp"
#include "ger/prob_core.hpp"
#include "ger/random.hpp"
#include "ger/regularized_loss.hpp"
#include "ger/toy_model.hpp"

namespace ger {

ToleranceProfile parse_tolerance_profile(std::string_view name) {
  if (name == "strict") return ToleranceProfile::Strict;
  if (name == "loose") return ToleranceProfile::Loose;
  throw InvalidInput("unknown tolerance profile '" + std::string(name) + "' (expected strict or loose)");
}

namespace {

class Suite {
 public:
  explicit Suite(const PropertyOptions& o)
      : opt_(o), rng_(o.seed), scale_(o.profile == ToleranceProfile::Loose ? 100.0 : 1.0) {}

  std::vector<PropertyResult> run() {
    js_identity();
    kl_limits();
    bounds();
    non_monotone();
    sparsity_dichotomy();
    bregman_forms();
    gradient_agreement();
    endpoint_gradients();
    gradient_continuity();
    asymmetry();
    loss_decompositions();
    return std::move(results_);
  }

 private:
  double tol(double t) const { return t * scale_; }
  std::size_t dim() { return std::uniform_int_distribution<std::size_t>(2, 64)(rng_); }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  void add(std::string name, double worst, double tolerance, std::string detail = {}) {
    results_.push_back({std::move(name), worst <= tolerance, worst, tolerance, std::move(detail)});
  }

  GradVec logit_grad(Generator g, Alpha a, std::span<const double> u, std::span<const double> z) {
    GradVec out = dJ_dlogits(g, a, u, z);
    if (opt_.inject_fault) {
      for (double& v : out) v = -v;
    }
    return out;
  }

  void js_identity() {
    double worst = 0.0;
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      const auto q = random_simplex(rng_, n);
      const auto p = random_simplex(rng_, n);
      const double j = skew_jensen(Generator::NegEntropy, Alpha(0.5), q, p);
      const double js4 = 4.0 * js_divergence(q, p);
      worst = std::max(worst, std::abs(j - js4) / std::max(js4, 1e-300));
    }
    add("js_identity: J_1/2 = 4 JS", worst, tol(1e-12));
  }

  void kl_limits() {
    double worst0 = 0.0;
    double worst1 = 0.0;
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      const ProbVec u = uniform(n);
      const auto p = random_simplex(rng_, n, 0.01);
      const double k0 = kl(p, u.values());
      const double k1 = kl(u.values(), p);
      worst0 = std::max(worst0, std::abs(skew_jensen(Generator::NegEntropy, Alpha(1e-4), u, p) - k0) / k0);
      worst1 = std::max(worst1, std::abs(skew_jensen(Generator::NegEntropy, Alpha(1.0 - 1e-4), u, p) - k1) / k1);
    }
    add("kl_limit: J_1e-4(u||p) -> KL(p||u)", worst0, tol(1e-3));
    add("kl_limit: J_(1-1e-4)(u||p) -> KL(u||p)", worst1, tol(1e-3));
  }

  void bounds() {
    std::size_t violations = 0;
    const auto grid = alpha_grid(99);
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      const ProbVec u = uniform(n);
      const auto p = random_simplex(rng_, n, 1e-3);
      const double upper = kl(u.values(), p) + kl(p, u.values());
      const double slack = 1e-12 * (1.0 + upper);
      for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const double j = skew_jensen(Generator::NegEntropy, Alpha(grid[i]), u, p);
        if (j < -slack || j > upper + slack) ++violations;
      }
    }
    add("bounds: 0 <= J_a(u||p) <= KL(u||p) + KL(p||u)", static_cast<double>(violations), 0.0, "violations");
  }

  void non_monotone() {
    // Non-monotonicity is existential: one of three candidate p suffices.
    const std::array<std::array<double, 3>, 3> operands{{{0.0001, 0.49995, 0.49995}, {0.15, 0.15, 0.7}, {0.25, 0.25, 0.5}}};
    const ProbVec u = uniform(3);
    std::string witness;
    for (const auto& p : operands) {
      const auto grid = alpha_grid(99);
      const std::vector<double> interior(grid.begin() + 1, grid.end() - 1);
      const auto curve = divergence_curve(Generator::NegEntropy, u, p, interior);
      bool rise = false;
      bool fall = false;
      for (std::size_t i = 1; i < curve.size(); ++i) {
        rise = rise || curve[i].value > curve[i - 1].value;
        fall = fall || curve[i].value < curve[i - 1].value;
      }
      if (rise && fall && witness.empty()) {
        witness = "witness p=(" + std::to_string(p[0]) + "," + std::to_string(p[1]) + "," + std::to_string(p[2]) + ")";
      }
    }
    add("non_monotone: J_a(u||p) not monotone in a for some p", witness.empty() ? 1.0 : 0.0, 0.0,
        witness.empty() ? "no witness" : witness);
  }

  void sparsity_dichotomy() {
    std::size_t bad = 0;
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      auto p = random_simplex(rng_, n);
      const std::size_t zero = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
      p[zero] = 0.0;
      double s = 0.0;
      for (double v : p) s += v;
      for (double& v : p) v /= s;
      const ProbVec u = uniform(n);
      for (double a : {0.0, 0.25, 0.5, 0.75, 0.999}) {
        if (!std::isfinite(skew_jensen(Generator::NegEntropy, Alpha(a), u, p))) ++bad;
      }
      if (!std::isinf(skew_jensen(Generator::NegEntropy, Alpha(1.0), u, p))) ++bad;
    }
    add("sparsity: J_a finite for a < 1, J_1 = +inf with a zero coordinate", static_cast<double>(bad), 0.0,
        "violations");
  }

  void bregman_forms() {
    double worst = 0.0;
    double worst_kl = 0.0;
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      const auto q = random_simplex(rng_, n, 0.01);
      const auto p = random_simplex(rng_, n, 0.01);
      const Alpha a(std::clamp(uniform01(), 1e-3, 1.0 - 1e-3));
      for (Generator g : {Generator::NegEntropy, Generator::SquaredL2}) {
        const double direct = skew_jensen(g, a, q, p);
        const double form = skew_jensen_bregman_form(g, a, q, p);
        worst = std::max(worst, std::abs(direct - form) / std::max(std::abs(direct), 1e-300));
      }
      const double k = kl(p, q);
      worst_kl = std::max(worst_kl, std::abs(bregman(Generator::NegEntropy, p, q) - k) / std::max(k, 1e-300));
    }
    add("bregman_form: Jensen gap = weighted Bregman sum", worst, tol(1e-10));
    add("bregman_kl: D_negH(p, q) = KL(p||q)", worst_kl, tol(1e-12));
  }

  void gradient_agreement() {
    const std::size_t draws = std::min<std::size_t>(opt_.trials, 200);
    double worst_p = 0.0;
    double worst_z = 0.0;
    double worst_ce = 0.0;
    for (std::size_t t = 0; t < draws; ++t) {
      const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 16)(rng_);
      const ProbVec u = uniform(n);
      const Generator g = t % 2 == 0 ? Generator::NegEntropy : Generator::SquaredL2;
      double av = std::clamp(uniform01(), 0.01, 0.99);
      if (t % 10 == 3) av = 0.0;
      if (t % 10 == 7) av = 1.0;
      const Alpha a(av);

      const auto p = random_simplex(rng_, n, 0.2);
      const auto fd_p = finite_difference_grad([&](std::span<const double> x) { return skew_jensen(g, a, u, x); }, p);
      worst_p = std::max(worst_p, relative_error(dJ_dp(g, a, u, p), fd_p));

      const auto z = random_logits(rng_, n);
      const auto fd_z = finite_difference_grad(
          [&](std::span<const double> x) { return skew_jensen(g, a, u, softmax(x).values()); }, z);
      worst_z = std::max(worst_z, relative_error(logit_grad(g, a, u, z), fd_z));

      const std::size_t target = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
      const auto fd_ce =
          finite_difference_grad([&](std::span<const double> x) { return -log_softmax(x)[target]; }, z);
      worst_ce = std::max(worst_ce, relative_error(dCE_dlogits(target, z), fd_ce));
    }
    add("gradient: dJ_dp vs finite differences", worst_p, tol(1e-6));
    add("gradient: dJ_dlogits vs finite differences", worst_z, tol(1e-6));
    add("gradient: dCE_dlogits vs finite differences", worst_ce, tol(1e-6));
  }

  void endpoint_gradients() {
    double worst_ls = 0.0;
    double worst_cp = 0.0;
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      const ProbVec u = uniform(n);
      const auto z = random_logits(rng_, n, 2.0);
      const ProbVec p = softmax(z);
      // Label smoothing term H(u, softmax(z)): gradient p - u.
      GradVec ls(n);
      for (std::size_t i = 0; i < n; ++i) ls[i] = p[i] - u[i];
      worst_ls = std::max(worst_ls, max_abs_diff(logit_grad(Generator::NegEntropy, Alpha(1.0), u, z), ls));
      // Confidence penalty term -H(softmax(z)): gradient p (log p - sum p log p).
      const double neg_h = -entropy(p.values());
      GradVec cp(n);
      for (std::size_t i = 0; i < n; ++i) cp[i] = p[i] * (std::log(p[i]) - neg_h);
      worst_cp = std::max(worst_cp, max_abs_diff(logit_grad(Generator::NegEntropy, Alpha(0.0), u, z), cp));
    }
    add("endpoint: logit gradient at a = 1 equals p - u", worst_ls, tol(1e-10));
    add("endpoint: logit gradient at a = 0 equals p (log p - sum p log p)", worst_cp, tol(1e-10));
  }

  void gradient_continuity() {
    double worst = 0.0;
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      const ProbVec u = uniform(n);
      const auto z = random_logits(rng_, n);
      for (Generator g : {Generator::NegEntropy, Generator::SquaredL2}) {
        worst = std::max(worst, max_abs_diff(logit_grad(g, Alpha(1.0 - 1e-6), u, z), logit_grad(g, Alpha(1.0), u, z)));
        worst = std::max(worst, max_abs_diff(logit_grad(g, Alpha(1e-6), u, z), logit_grad(g, Alpha(0.0), u, z)));
      }
    }
    add("continuity: logit gradient near the endpoints", worst, tol(1e-4));
  }

  void asymmetry() {
    const std::vector<double> q{0.7, 0.2, 0.1};
    const std::vector<double> p{0.2, 0.3, 0.5};
    const double fwd = skew_jensen(Generator::NegEntropy, Alpha(0.3), q, p);
    const double bwd = skew_jensen(Generator::NegEntropy, Alpha(0.3), p, q);
    add("asymmetry: J_0.3(q||p) != J_0.3(p||q) for a witness", std::abs(fwd - bwd) > 1e-6 ? 0.0 : 1.0, 0.0);
    double worst = 0.0;
    for (std::size_t t = 0; t < opt_.trials; ++t) {
      const std::size_t n = dim();
      const auto a = random_simplex(rng_, n);
      const auto b = random_simplex(rng_, n);
      const double ab = skew_jensen(Generator::SquaredL2, Alpha(0.5), a, b);
      const double ba = skew_jensen(Generator::SquaredL2, Alpha(0.5), b, a);
      worst = std::max(worst, std::abs(ab - ba) / std::max(ab, 1e-300));
    }
    add("symmetry: squared-L2 generator at a = 0.5", worst, tol(1e-12));
  }

  void loss_decompositions() {
    ReversalTaskSpec spec;
    spec.seed = opt_.seed + 11;
    spec.alphabet = 6;
    spec.n_train = 12;
    spec.n_dev = 1;
    spec.n_test = 1;
    spec.min_len = 2;
    spec.max_len = 5;
    const Corpus corpus = make_reversal_task(spec).train;
    ModelDims dims{corpus.source_vocab.size(), corpus.vocab_size(), 6, 8, 2};
    ToyModelParams params = init_params(dims, opt_.seed + 5);
    for (double& b : params.out_b.data) b = std::normal_distribution<double>(0.0, 1.5)(rng_);
    const ToyModel model(params);

    const double log_v = std::log(static_cast<double>(corpus.vocab_size()));
    const ProbVec u = uniform(corpus.vocab_size());
    double sum_entropy = 0.0;
    double sum_ce_u = 0.0;
    std::size_t steps = 0;
    for (const auto& pair : corpus.pairs) {
      const std::span<const TokenId> target(pair.target);
      for (std::size_t s = 1; s < pair.target.size(); ++s) {
        const ProbVec p = softmax(model.logits(pair.source, target.first(s)).values());
        sum_entropy += entropy(p.values());
        sum_ce_u += cross_entropy(u.values(), p.values());
        ++steps;
      }
    }
    const double n = static_cast<double>(steps);

    RegConfig cp{Alpha(0.0), 1.0, Generator::NegEntropy, std::nullopt};
    const double cp_reg = corpus_regularizer(cp, model, corpus);
    add("confidence penalty: sum J_0 = N log|Y| - sum H", std::abs(cp_reg - (n * log_v - sum_entropy)) / n, tol(1e-10));

    RegConfig ls{Alpha(1.0), 1.0, Generator::NegEntropy, std::nullopt};
    const double ls_reg = corpus_regularizer(ls, model, corpus);
    add("label smoothing: sum J_1 = sum H(u, p) - N log|Y|", std::abs(ls_reg - (sum_ce_u - n * log_v)) / n, tol(1e-10));

    double worst_scaled = 0.0;
    for (double gamma : {0.1, 0.3, 0.5}) {
      RegConfig c{Alpha(1.0), gamma / (1.0 - gamma), Generator::NegEntropy, std::nullopt};
      const double lhs = (1.0 - gamma) * total_loss(c, model, corpus);
      worst_scaled = std::max(worst_scaled, std::abs(lhs - label_smoothing_scaled_loss(gamma, model, corpus)));
    }
    add("label smoothing scaling: (1-g) L_GER(b = g/(1-g)) = L_LS(g)", worst_scaled, tol(1e-10));

    const double ce0 = evaluate_corpus(RegConfig{}, model, corpus).ce_sum;
    double ce_drift = 0.0;
    double prev = -kInf;
    std::size_t non_monotone = 0;
    for (double a : {0.0, 0.5, 1.0}) {
      prev = -kInf;
      for (double b : {0.0, 0.1, 0.5, 1.0, 2.0}) {
        RegConfig c{Alpha(a), b, Generator::NegEntropy, std::nullopt};
        ce_drift = std::max(ce_drift, std::abs(evaluate_corpus(c, model, corpus).ce_sum - ce0));
        const double l = total_loss(c, model, corpus);
        if (l < prev) ++non_monotone;
        prev = l;
      }
    }
    add("cross-entropy term independent of alpha and beta", ce_drift, 0.0);
    add("total loss nondecreasing in beta", static_cast<double>(non_monotone), 0.0, "violations");
  }

  PropertyOptions opt_;
  std::mt19937_64 rng_;
  double scale_;
  std::vector<PropertyResult> results_;
};

}  // namespace

std::vector<PropertyResult> run_property_suite(const PropertyOptions& options) {
  if (options.trials == 0) throw InvalidInput("trials must be >= 1");
  return Suite(options).run();
}

bool print_property_report(std::ostream& os, const std::vector<PropertyResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    os << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(66) << r.name << " worst=" << std::setprecision(3)
       << std::scientific << r.worst << " tol=" << r.tolerance << std::defaultfloat;
    if (!r.detail.empty()) os << "  (" << r.detail << ')';
    os << '\n';
  }
  return all;
}

}  // namespace ger
