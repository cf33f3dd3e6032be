#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>

namespace tbmeta {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Neumaier-compensated accumulator. Summation order is the call order.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Compensated dot product sum_i w_i * x_i.
inline double weighted_sum(std::span<const double> w, const Vector& x) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < w.size(); ++i) acc.add(w[i] * x[static_cast<Eigen::Index>(i)]);
  return acc.value();
}

}  // namespace tbmeta
