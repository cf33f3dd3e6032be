#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tbmeta {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain input. Carries one message per offending field.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what), problems_{what} {}
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
      if (!out.empty()) out += "; ";
      out += p;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

/// A well-formed computation that could not be carried out numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A matrix that had to be inverted was (numerically) singular.
class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(std::string which, double rcond)
      : NumericalError("singular matrix '" + which + "' (reciprocal condition estimate " +
                       std::to_string(rcond) + ")"),
        which_(std::move(which)),
        rcond_(rcond) {}

  const std::string& which() const noexcept { return which_; }
  double rcond() const noexcept { return rcond_; }

 private:
  std::string which_;
  double rcond_;
};

/// Structural hypotheses of the block spectral-radius reduction do not hold.
class HypothesisViolation : public NumericalError {
 public:
  HypothesisViolation(const std::string& what, double conjugation_residual,
                      double commutation_residual)
      : NumericalError(what),
        conjugation_residual_(conjugation_residual),
        commutation_residual_(commutation_residual) {}

  double conjugation_residual() const noexcept { return conjugation_residual_; }
  double commutation_residual() const noexcept { return commutation_residual_; }

 private:
  double conjugation_residual_;
  double commutation_residual_;
};

}  // namespace tbmeta
