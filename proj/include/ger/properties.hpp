// SPDX-License-Identifier: Apache-2.0
#pragma once

// Executable suite of the formal properties of the regularizer family: limit
// identities, bounds, the sparsity dichotomy, Bregman/JS rewrites, gradient
// identities and the loss decompositions.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ger {

enum class ToleranceProfile {
  Strict,  ///< the tolerances the library is specified to
  Loose,   ///< every tolerance x100, for exploratory builds
};

ToleranceProfile parse_tolerance_profile(std::string_view name);

struct PropertyOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  ToleranceProfile profile = ToleranceProfile::Strict;
  /// Test hook: flips the sign of the analytic logit gradient under test.
  bool inject_fault = false;
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // worst observed error (or violation count)
  double tolerance = 0.0;
  std::string detail;
};

std::vector<PropertyResult> run_property_suite(const PropertyOptions& options);

/// One line per property; returns true when every property passed.
bool print_property_report(std::ostream& os, const std::vector<PropertyResult>& results);

}  // namespace ger
