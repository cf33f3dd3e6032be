#include "tbmeta/integrate.hpp"

#include <algorithm>
#include <cmath>

namespace tbmeta {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

// Consecutive stability-limited steps before the implicit fallback is considered.
constexpr int kStiffRun = 1000;
constexpr double kStiffStepFraction = 1e-4;

class Driver {
 public:
  Driver(const OdeSystem& sys, const IntegratorControls& c, IntegrationStats& st)
      : sys_(sys), c_(c), st_(st) {}

  Vector eval(const Vector& y) {
    Vector f;
    sys_.evaluate(y, f);
    ++st_.evaluations;
    return f;
  }

  double norm(const Vector& e, const Vector& y0, const Vector& y1) const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      const double sc = c_.atol + c_.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      worst = std::max(worst, std::abs(e[i]) / sc);
    }
    return worst;
  }

  double initial_step(const Vector& y, const Vector& f, double span) const {
    if (c_.h_init > 0.0) return std::min(c_.h_init, span);
    const double d0 = norm(y, y, y), d1 = norm(f, y, y);
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min({h, span, c_.h_max});
  }

  struct DpResult {
    Vector y, f;
    double err;
    double stiffness;  // h * lambda estimate
  };

  DpResult dp_step(const Vector& y, const Vector& k1, double h) {
    const Vector k2 = eval(y + h * a21 * k1);
    const Vector k3 = eval(y + h * (a31 * k1 + a32 * k2));
    const Vector k4 = eval(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = eval(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector y6 = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    const Vector k6 = eval(y6);
    DpResult r;
    r.y = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    r.f = eval(r.y);
    const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.f);
    r.err = norm(err, y, r.y);
    const double den = (r.y - y6).squaredNorm();
    r.stiffness = den > 0.0 ? h * std::sqrt((r.f - k6).squaredNorm() / den) : 0.0;
    return r;
  }

  /// One trapezoid step by simplified Newton; false when Newton does not settle.
  bool trapezoid(const Vector& y, const Vector& fy, double h, Vector& out) {
    const auto n = y.size();
    const Matrix m = Matrix::Identity(n, n) - 0.5 * h * sys_.jacobian(y);
    const Eigen::PartialPivLU<Matrix> lu(m);
    Vector Y = y + h * fy;
    for (int it = 0; it < 10; ++it) {
      const Vector g = Y - y - 0.5 * h * (fy + eval(Y));
      const Vector dy = lu.solve(g);
      if (!dy.allFinite()) return false;
      Y -= dy;
      if (norm(dy, y, Y) <= 1e-3) {
        out = Y;
        return true;
      }
    }
    return false;
  }

 private:
  const OdeSystem& sys_;
  const IntegratorControls& c_;
  IntegrationStats& st_;
};

void validate(const IntegratorControls& c, std::span<const double> times, const Vector& y0,
              Eigen::Index dim) {
  std::vector<std::string> bad;
  if (!(c.rtol > 0.0)) bad.push_back("rtol must be positive");
  if (!(c.atol >= 0.0)) bad.push_back("atol must be nonnegative");
  if (!(c.h_max > 0.0)) bad.push_back("h_max must be positive");
  if (times.size() < 2) bad.push_back("at least a start and an end time are required");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      bad.push_back("sample times must be strictly increasing");
      break;
    }
  }
  if (y0.size() != dim) bad.push_back("initial state has the wrong dimension");
  if (!y0.allFinite()) bad.push_back("initial state has non-finite entries");
  if (!bad.empty()) throw ValidationError(std::move(bad));
}

}  // namespace

OdeSolution integrate_ode(const OdeSystem& sys, const Vector& y0, std::span<const double> times,
                          const IntegratorControls& controls) {
  validate(controls, times, y0, sys.dimension());
  OdeSolution out;
  out.times.assign(times.begin(), times.end());
  out.states.reserve(times.size());
  out.states.push_back(y0);

  Driver drv(sys, controls, out.stats);
  IntegrationStats& st = out.stats;
  const double span = times.back() - times.front();
  double t = times.front();
  Vector y = y0;
  Vector f = drv.eval(y);
  double h = drv.initial_step(y, f, span);
  bool implicit = false;
  int stiff_run = 0, calm_run = 0;

  for (std::size_t s = 1; s < times.size(); ++s) {
    const double target = times[s];
    while (t < target) {
      if (st.accepted + st.rejected >= controls.max_steps) {
        throw NumericalError("step budget exhausted at t = " + std::to_string(t));
      }
      const double remaining = target - t;
      const bool hit = h >= remaining;
      const double h_try = std::min(h, remaining);
      if (h_try <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
        if (controls.stiff_fallback && !implicit) {
          implicit = true;
          st.switched_to_implicit = true;
          h = std::max(h, 1e-6 * span);
          continue;
        }
        throw StepUnderflowError(t, h_try);
      }

      Vector y_new;
      double err = 0.0;
      double factor = 1.0;
      if (!implicit) {
        const auto r = drv.dp_step(y, f, h_try);
        err = r.err;
        if (err <= 1.0) {
          y_new = r.y;
          f = r.f;  // first-same-as-last
          // the estimate hovers around the stability boundary, so a few misses do not reset the run
          if (r.stiffness > 3.25 && h_try < kStiffStepFraction * span) {
            calm_run = 0;
            if (++stiff_run >= kStiffRun && controls.stiff_fallback) {
              implicit = true;
              st.switched_to_implicit = true;
            }
          } else if (++calm_run >= 6) {
            stiff_run = 0;
          }
        }
        factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        factor = std::clamp(factor, 0.2, 5.0);
        if (!std::isfinite(err)) {
          err = 2.0;
          factor = 0.2;
        }
      } else {
        Vector full, half, two;
        bool ok = drv.trapezoid(y, f, h_try, full) && drv.trapezoid(y, f, 0.5 * h_try, half);
        if (ok) ok = drv.trapezoid(half, drv.eval(half), 0.5 * h_try, two);
        if (ok) {
          err = drv.norm(two - full, y, two) / 3.0;
          factor = err > 0.0 ? std::clamp(0.9 * std::pow(err, -1.0 / 3.0), 0.2, 2.0) : 2.0;
        } else {
          err = 2.0;
          factor = 0.5;
        }
        if (err <= 1.0) {
          y_new = two;
          ++st.implicit_steps;
        }
      }

      if (err <= 1.0) {
        ++st.accepted;
        t = hit ? target : t + h_try;
        y = std::move(y_new);
        if (controls.clip_negative) {
          long clipped = 0;
          for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (y[i] < 0.0) {
              y[i] = 0.0;
              ++clipped;
            }
          }
          if (clipped > 0) {
            st.clips += clipped;
            f = drv.eval(y);
          }
        }
        if (implicit) f = drv.eval(y);
        const double proposal = std::min(h_try * factor, controls.h_max);
        h = hit ? std::max(h, proposal) : proposal;
        h = std::min(h, controls.h_max);
      } else {
        ++st.rejected;
        h = h_try * std::min(factor, 1.0);
      }
    }
    out.states.push_back(y);
  }
  return out;
}

std::vector<double> sample_times(double t_end, double cadence) {
  if (!(t_end > 0.0)) throw ValidationError("t_end must be positive");
  if (!(cadence > 0.0)) throw ValidationError("cadence must be positive");
  std::vector<double> t{0.0};
  const auto steps = static_cast<long>(std::floor(t_end / cadence + 1e-9));
  for (long i = 1; i <= steps; ++i) {
    const double ti = static_cast<double>(i) * cadence;
    if (ti < t_end * (1.0 - 1e-12)) t.push_back(ti);
  }
  t.push_back(t_end);
  return t;
}

Trajectory integrate(const ModelRhs& rhs, const MetapopState& state0, double t_end, double cadence,
                     const IntegratorControls& controls) {
  if (static_cast<std::size_t>(state0.size()) != rhs.dist().size()) {
    throw ValidationError("initial state does not match the degree distribution");
  }
  if (!state0.nonnegative()) throw ValidationError("initial state has negative entries");
  const auto times = sample_times(t_end, cadence);
  const OdeSolution sol = integrate_ode(rhs, state0.flat(), times, controls);

  Trajectory traj;
  traj.started_in_region = check_invariant_region(state0, rhs.dist(), rhs.params()).inside;
  traj.times = sol.times;
  traj.stats = sol.stats;
  traj.states.reserve(sol.states.size());
  traj.aggregates.reserve(sol.states.size());
  for (const auto& y : sol.states) {
    traj.states.push_back(MetapopState::from_flat(y));
    traj.aggregates.push_back(aggregate(traj.states.back(), rhs.dist()));
  }
  return traj;
}

}  // namespace tbmeta
