// SPDX-License-Identifier: Apache-2.0
#include "ger/divergence.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "ger/errors.hpp"
#include "ger/format.hpp"

namespace ger {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << op << ": length mismatch (" << a.size() << " vs " << b.size() << ")";
    throw InvalidInput(os.str());
  }
}

double x_log_x(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

std::string_view to_string(Generator g) noexcept {
  switch (g) {
    case Generator::NegEntropy:
      return "neg_entropy";
    case Generator::SquaredL2:
      return "squared_l2";
  }
  return "unknown";
}

Generator parse_generator(std::string_view name) {
  if (name == "neg_entropy" || name == "negH") return Generator::NegEntropy;
  if (name == "squared_l2" || name == "l2") return Generator::SquaredL2;
  throw InvalidInput("unknown generator '" + std::string(name) + "' (expected neg_entropy or squared_l2)");
}

Alpha::Alpha(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    std::ostringstream os;
    os << "alpha must lie in [0, 1], got " << value;
    throw InvalidInput(os.str());
  }
}

double generator_value(Generator g, std::span<const double> p) {
  double s = 0.0;
  switch (g) {
    case Generator::NegEntropy:
      for (double v : p) s += x_log_x(v);
      break;
    case Generator::SquaredL2:
      for (double v : p) s += v * v;
      break;
  }
  return s;
}

std::vector<double> generator_grad(Generator g, std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g == Generator::SquaredL2) {
      out[i] = 2.0 * p[i];
    } else {
      if (!(p[i] > 0.0)) {
        throw DomainError("negative-entropy gradient undefined at zero coordinate " + std::to_string(i));
      }
      out[i] = std::log(p[i]) + 1.0;
    }
  }
  return out;
}

double bregman(Generator g, std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "bregman");
  const auto grad_q = generator_grad(g, q);
  double inner = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) inner += (p[i] - q[i]) * grad_q[i];
  return generator_value(g, p) - generator_value(g, q) - inner;
}

double skew_jensen(Generator g, Alpha alpha, std::span<const double> q, std::span<const double> p) {
  require_same_length(q, p, "skew_jensen");
  if (alpha.is_zero()) {
    if (g == Generator::NegEntropy) return kl(p, q);
    return bregman(g, p, q);
  }
  if (alpha.is_one()) {
    if (g == Generator::NegEntropy) return kl(q, p);
    return bregman(g, q, p);
  }
  // The gap summed coordinate by coordinate, each term rewritten so that it
  // carries its own factor of a (1 - a). Subtracting the three generator
  // values directly loses most digits once that factor is divided out.
  const double a = alpha.value();
  double gap = 0.0;
  if (g == Generator::SquaredL2) {
    for (std::size_t i = 0; i < q.size(); ++i) gap += a * (1.0 - a) * (q[i] - p[i]) * (q[i] - p[i]);
  } else {
    // (1-a) q log q + a p log p - m log m = (1-a) q log(q/m) + a p log(p/m)
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double m = (1.0 - a) * q[i] + a * p[i];
      if (q[i] > 0.0) gap += (1.0 - a) * q[i] * std::log1p(a * (q[i] - p[i]) / m);
      if (p[i] > 0.0) gap += a * p[i] * std::log1p((1.0 - a) * (p[i] - q[i]) / m);
    }
  }
  return gap / (a * (1.0 - a));
}

double skew_jensen_bregman_form(Generator g, Alpha alpha, std::span<const double> q,
                                std::span<const double> p) {
  require_same_length(q, p, "skew_jensen_bregman_form");
  if (!alpha.interior()) {
    throw InvalidInput("Bregman form needs alpha strictly inside (0, 1); use skew_jensen at the endpoints");
  }
  const double a = alpha.value();
  std::vector<double> m(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) m[i] = (1.0 - a) * q[i] + a * p[i];
  return ((1.0 - a) * bregman(g, q, m) + a * bregman(g, p, m)) / (a * (1.0 - a));
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  require_same_length(p, q, "js_divergence");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl(p, m) + 0.5 * kl(q, m);
}

std::vector<double> alpha_grid(std::size_t interior_points) {
  std::vector<double> grid;
  grid.reserve(interior_points + 2);
  grid.push_back(0.0);
  const double denom = static_cast<double>(interior_points + 1);
  for (std::size_t i = 1; i <= interior_points; ++i) grid.push_back(static_cast<double>(i) / denom);
  grid.push_back(1.0);
  return grid;
}

std::vector<CurvePoint> divergence_curve(Generator g, std::span<const double> q,
                                         std::span<const double> p, std::span<const double> alphas) {
  std::vector<CurvePoint> out;
  out.reserve(alphas.size());
  for (double a : alphas) out.push_back({a, skew_jensen(g, Alpha(a), q, p)});
  return out;
}

void write_curve_csv(std::ostream& os, std::span<const CurvePoint> curve, Generator g) {
  os << "alpha,value,generator\n";
  for (const auto& pt : curve) {
    os << format_double(pt.alpha) << ',' << format_double(pt.value) << ',' << to_string(g) << '\n';
  }
}

}  // namespace ger
