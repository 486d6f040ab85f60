// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ger {

/// Malformed or out-of-range argument (length mismatch, non-finite logits, bad id).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Function evaluated outside its domain (log of zero in a gradient, non-finite FD probe).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Statistic undefined for the given sample (zero entropy, zero variance).
class UndefinedResult : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Persisted file that does not match the expected schema or version.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ger
