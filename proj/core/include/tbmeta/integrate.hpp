#pragma once

#include "tbmeta/dynamics.hpp"
#include "tbmeta/errors.hpp"
#include "tbmeta/ode.hpp"

#include <limits>
#include <span>
#include <vector>

namespace tbmeta {

struct IntegratorControls {
  double rtol = 1e-8;
  double atol = 1e-12;
  double h_init = 0.0;  // 0 picks a starting step from the initial slope
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 50'000'000;
  bool clip_negative = true;
  /// Switch to implicit trapezoid steps once the explicit stability limit keeps binding.
  bool stiff_fallback = true;
};

struct IntegrationStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
  long clips = 0;           // entries projected back to 0 after an accepted step
  long implicit_steps = 0;  // steps taken by the trapezoid fallback
  bool switched_to_implicit = false;
};

/// Step size fell below the representable resolution at time t.
class StepUnderflowError : public NumericalError {
 public:
  StepUnderflowError(double t, double h)
      : NumericalError("step size underflow at t = " + std::to_string(t) + " (h = " + std::to_string(h) + ")"),
        t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

struct OdeSolution {
  std::vector<double> times;
  std::vector<Vector> states;
  IntegrationStats stats;
};

/// Dormand-Prince 5(4) with step control on atol + rtol |y|; every requested time is hit
/// exactly (no interpolation). times must be strictly increasing; times[0] is the start.
OdeSolution integrate_ode(const OdeSystem& sys, const Vector& y0, std::span<const double> times,
                          const IntegratorControls& controls = {});

struct Trajectory {
  std::vector<double> times;
  std::vector<MetapopState> states;
  std::vector<Aggregates> aggregates;
  IntegrationStats stats;
  bool started_in_region = true;  // initial state inside the invariant region
};

/// Samples at 0, cadence, 2 cadence, ..., t_end (t_end always included).
std::vector<double> sample_times(double t_end, double cadence);

Trajectory integrate(const ModelRhs& rhs, const MetapopState& state0, double t_end, double cadence,
                     const IntegratorControls& controls = {});

}  // namespace tbmeta
