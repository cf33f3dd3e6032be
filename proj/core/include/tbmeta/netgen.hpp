#pragma once

#include "tbmeta/numeric.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tbmeta {

inline constexpr double kNormalizationTol = 1e-12;
inline constexpr double kBalanceTol = 1e-10;

/// Degree support k_1 < ... < k_n (only degrees present in the network) with p(k_i) > 0.
/// Immutable once built.
class DegreeDistribution {
 public:
  /// Validates: n >= 2, strictly increasing positive degrees, p > 0, sum p = 1 within 1e-12.
  static DegreeDistribution create(std::vector<int> degrees, std::vector<double> probs);

  std::size_t size() const noexcept { return degrees_.size(); }
  std::span<const int> degrees() const noexcept { return degrees_; }
  std::span<const double> probs() const noexcept { return probs_; }
  int degree(std::size_t i) const { return degrees_.at(i); }
  double prob(std::size_t i) const { return probs_.at(i); }
  int k_min() const noexcept { return degrees_.front(); }
  int k_max() const noexcept { return degrees_.back(); }
  /// <k> = sum_k k p(k)
  double mean_degree() const noexcept { return mean_degree_; }

  Vector degree_vector() const;
  Vector prob_vector() const;

 private:
  DegreeDistribution(std::vector<int> degrees, std::vector<double> probs);

  std::vector<int> degrees_;
  std::vector<double> probs_;
  double mean_degree_ = 0.0;
};

/// Conditional probabilities P(k'|k); row index is k, column index is k'.
class MixingKernel {
 public:
  /// Correlated kernel given as a dense row-stochastic matrix. Consistency with a
  /// distribution is checked separately by validate_consistency().
  static MixingKernel from_matrix(Matrix conditional);

  const Matrix& matrix() const noexcept { return p_; }
  bool uncorrelated() const noexcept { return uncorrelated_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(p_.rows()); }

 private:
  friend MixingKernel uncorrelated_kernel(const DegreeDistribution& dist);
  MixingKernel(Matrix p, bool uncorrelated) : p_(std::move(p)), uncorrelated_(uncorrelated) {}

  Matrix p_;
  bool uncorrelated_ = false;
};

/// Truncated power law p(k) proportional to k^-exponent on the integer range [k_min, k_max].
DegreeDistribution build_truncated_power_law(double exponent, int k_min, int k_max);

struct MeanDegreeCalibration {
  DegreeDistribution dist;
  double exponent;
  int k_max;
  double achieved_mean;
  bool reached;  // |achieved_mean - target| <= tol
};

/// Searches k_max in (k_min, k_max_limit] first, then the exponent (keeping k_max_limit),
/// to approach a target <k>. Probabilities are never rescaled after the fact.
MeanDegreeCalibration calibrate_mean_degree(double target_mean, double exponent, int k_min,
                                            int k_max_limit, double tol = 1e-6);

/// P(k'|k) = k' p(k') / <k> for every row.
MixingKernel uncorrelated_kernel(const DegreeDistribution& dist);

/// C_{kk'} = (k/k') P(k'|k).
Matrix connectivity_matrix(const DegreeDistribution& dist, const MixingKernel& kernel);

/// Uncorrelated closure C_{kk'} = k p(k') / <k>, built directly.
Matrix uncorrelated_connectivity(const DegreeDistribution& dist);

struct ConsistencyViolation {
  enum class Kind { RowSum, DetailedBalance };
  Kind kind;
  std::size_t row;
  std::size_t col;  // equals row for RowSum
  double deviation;
};

std::string to_string(const ConsistencyViolation& v);

/// Row sums within 1e-12 and k P(k'|k) p(k) = k' P(k|k') p(k') within 1e-10.
/// Each unordered pair is reported once as (row < col).
std::vector<ConsistencyViolation> validate_consistency(const DegreeDistribution& dist,
                                                       const MixingKernel& kernel);

}  // namespace tbmeta
