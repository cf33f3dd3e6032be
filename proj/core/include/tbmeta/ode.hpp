#pragma once

#include "tbmeta/numeric.hpp"

namespace tbmeta {

/// Autonomous system y' = f(y) as seen by the integrators.
class OdeSystem {
 public:
  virtual ~OdeSystem() = default;
  virtual Eigen::Index dimension() const = 0;
  /// Must accept slightly negative stage values produced by explicit stages.
  virtual void evaluate(const Vector& y, Vector& dydt) const = 0;
  virtual Matrix jacobian(const Vector& y) const = 0;
};

}  // namespace tbmeta
