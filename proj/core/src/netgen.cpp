#include "tbmeta/netgen.hpp"

#include "tbmeta/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tbmeta {

DegreeDistribution DegreeDistribution::create(std::vector<int> degrees, std::vector<double> probs) {
  std::vector<std::string> problems;
  if (degrees.size() != probs.size()) {
    problems.push_back("degrees and probs have different lengths (" +
                       std::to_string(degrees.size()) + " vs " + std::to_string(probs.size()) +
                       ")");
  }
  if (degrees.size() < 2) {
    problems.push_back("at least two distinct degrees are required");
  }
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (degrees[i] < 1) problems.push_back("degree " + std::to_string(degrees[i]) + " is not positive");
    if (i > 0 && degrees[i] <= degrees[i - 1]) {
      problems.push_back("degrees must be strictly increasing (position " + std::to_string(i) + ")");
    }
  }
  CompensatedSum total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] > 0.0) || !std::isfinite(probs[i])) {
      problems.push_back("p(k) at position " + std::to_string(i) + " must be positive and finite");
    }
    total.add(probs[i]);
  }
  if (std::abs(total.value() - 1.0) > kNormalizationTol) {
    std::ostringstream os;
    os << "probabilities sum to " << total.value() << ", not 1";
    problems.push_back(os.str());
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return DegreeDistribution(std::move(degrees), std::move(probs));
}

DegreeDistribution::DegreeDistribution(std::vector<int> degrees, std::vector<double> probs)
    : degrees_(std::move(degrees)), probs_(std::move(probs)) {
  CompensatedSum m;
  for (std::size_t i = 0; i < degrees_.size(); ++i) m.add(degrees_[i] * probs_[i]);
  mean_degree_ = m.value();
}

Vector DegreeDistribution::degree_vector() const {
  Vector k(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) k[static_cast<Eigen::Index>(i)] = degrees_[i];
  return k;
}

Vector DegreeDistribution::prob_vector() const {
  return Eigen::Map<const Vector>(probs_.data(), static_cast<Eigen::Index>(probs_.size()));
}

MixingKernel MixingKernel::from_matrix(Matrix conditional) {
  if (conditional.rows() != conditional.cols() || conditional.rows() < 2) {
    throw ValidationError("kernel must be a square matrix with at least two rows");
  }
  if (!conditional.allFinite() || (conditional.array() < 0.0).any()) {
    throw ValidationError("kernel entries must be finite and nonnegative");
  }
  return MixingKernel(std::move(conditional), false);
}

DegreeDistribution build_truncated_power_law(double exponent, int k_min, int k_max) {
  if (!(exponent > 1.0)) {
    throw ValidationError("non-normalizable degree distribution: exponent must exceed 1");
  }
  if (k_min < 1) throw ValidationError("k_min must be at least 1");
  if (k_max <= k_min) throw ValidationError("k_max must exceed k_min");

  std::vector<int> degrees;
  std::vector<double> weights;
  CompensatedSum z;
  for (int k = k_min; k <= k_max; ++k) {
    const double w = std::pow(static_cast<double>(k), -exponent);
    degrees.push_back(k);
    weights.push_back(w);
    z.add(w);
  }
  const double norm = z.value();
  for (auto& w : weights) w /= norm;
  // Renormalization leaves a residual of a few ulps; fold it into the largest weight.
  CompensatedSum check;
  for (double w : weights) check.add(w);
  weights.front() += 1.0 - check.value();
  return DegreeDistribution::create(std::move(degrees), std::move(weights));
}

MeanDegreeCalibration calibrate_mean_degree(double target_mean, double exponent, int k_min,
                                            int k_max_limit, double tol) {
  if (k_max_limit <= k_min) throw ValidationError("k_max limit must exceed k_min");
  if (!(target_mean > k_min)) {
    throw ValidationError("target mean degree must exceed k_min");
  }

  // <k> increases monotonically with k_max at fixed exponent.
  int best_k = k_min + 1;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int k_max = k_min + 1; k_max <= k_max_limit; ++k_max) {
    const double m = build_truncated_power_law(exponent, k_min, k_max).mean_degree();
    const double gap = std::abs(m - target_mean);
    if (gap < best_gap) {
      best_gap = gap;
      best_k = k_max;
    }
    if (m >= target_mean) break;
  }
  if (best_gap <= tol) {
    auto dist = build_truncated_power_law(exponent, k_min, best_k);
    const double m = dist.mean_degree();
    return {std::move(dist), exponent, best_k, m, true};
  }

  // Exponent search at k_max_limit; <k> decreases with the exponent.
  const auto mean_at = [&](double e) {
    return build_truncated_power_law(e, k_min, k_max_limit).mean_degree();
  };
  double lo = 1.0 + 1e-9;
  double hi = std::max(exponent, 2.0);
  while (mean_at(hi) > target_mean && hi < 64.0) hi *= 2.0;
  const bool bracketed = mean_at(lo) >= target_mean && mean_at(hi) <= target_mean;
  if (bracketed) {
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mean_at(mid) > target_mean ? lo : hi) = mid;
    }
  }
  const double e = bracketed ? 0.5 * (lo + hi) : (mean_at(lo) < target_mean ? lo : hi);
  auto dist = build_truncated_power_law(e, k_min, k_max_limit);
  const double m = dist.mean_degree();
  return {std::move(dist), e, k_max_limit, m, std::abs(m - target_mean) <= tol};
}

MixingKernel uncorrelated_kernel(const DegreeDistribution& dist) {
  const auto n = static_cast<Eigen::Index>(dist.size());
  const double mean = dist.mean_degree();
  Vector row(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    row[j] = dist.degree(static_cast<std::size_t>(j)) * dist.prob(static_cast<std::size_t>(j)) / mean;
  }
  Matrix p = row.transpose().replicate(n, 1);
  return MixingKernel(std::move(p), true);
}

Matrix connectivity_matrix(const DegreeDistribution& dist, const MixingKernel& kernel) {
  if (kernel.size() != dist.size()) {
    throw ValidationError("kernel dimension " + std::to_string(kernel.size()) +
                          " does not match distribution size " + std::to_string(dist.size()));
  }
  const auto n = static_cast<Eigen::Index>(dist.size());
  Matrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double k = dist.degree(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      c(i, j) = k / dist.degree(static_cast<std::size_t>(j)) * kernel.matrix()(i, j);
    }
  }
  return c;
}

Matrix uncorrelated_connectivity(const DegreeDistribution& dist) {
  const Vector k = dist.degree_vector();
  const Vector p = dist.prob_vector();
  return (k * p.transpose()) / dist.mean_degree();
}

std::string to_string(const ConsistencyViolation& v) {
  std::ostringstream os;
  if (v.kind == ConsistencyViolation::Kind::RowSum) {
    os << "row " << v.row << " sums to 1" << std::showpos << v.deviation;
  } else {
    os << "detailed balance broken for pair (" << v.row << ", " << v.col << ") by " << v.deviation;
  }
  return os.str();
}

std::vector<ConsistencyViolation> validate_consistency(const DegreeDistribution& dist,
                                                       const MixingKernel& kernel) {
  if (kernel.size() != dist.size()) {
    throw ValidationError("kernel dimension does not match distribution size");
  }
  std::vector<ConsistencyViolation> out;
  const Matrix& p = kernel.matrix();
  const std::size_t n = dist.size();
  for (std::size_t i = 0; i < n; ++i) {
    CompensatedSum row;
    for (std::size_t j = 0; j < n; ++j) row.add(p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    const double dev = row.value() - 1.0;
    if (std::abs(dev) > kNormalizationTol) {
      out.push_back({ConsistencyViolation::Kind::RowSum, i, i, dev});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      const double lhs = dist.degree(i) * p(a, b) * dist.prob(i);
      const double rhs = dist.degree(j) * p(b, a) * dist.prob(j);
      if (std::abs(lhs - rhs) > kBalanceTol) {
        out.push_back({ConsistencyViolation::Kind::DetailedBalance, i, j, lhs - rhs});
      }
    }
  }
  return out;
}

}  // namespace tbmeta
