#include "tbmeta/sweep.hpp"

#include "tbmeta/errors.hpp"
#include "tbmeta/ngm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace tbmeta {

MetapopState perturbed_dfe(const Params& p, const DegreeDistribution& dist, double fraction,
                           std::optional<std::uint64_t> seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("infectious fraction must lie in [0, 1]");
  MetapopState x = dfe(p, dist);
  std::mt19937_64 rng(seed.value_or(0));
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double f = std::min(1.0, fraction * (seed ? jitter(rng) : 1.0));
    x.I[k] = f * x.S[k];
    x.S[k] -= x.I[k];
  }
  return x;
}

std::vector<DegreePrevalence> prevalence_by_degree(const MetapopState& state, const DegreeDistribution& dist) {
  if (static_cast<std::size_t>(state.size()) != dist.size()) {
    throw ValidationError("state does not match the degree distribution");
  }
  std::vector<DegreePrevalence> out;
  const Vector total = state.total();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.push_back({dist.degree(i), total[k] > 0.0 ? state.I[k] / total[k] : 0.0});
  }
  return out;
}

std::vector<DegreePrevalence> prevalence_by_degree(const Trajectory& traj, const DegreeDistribution& dist,
                                                   double at) {
  if (traj.times.empty()) throw ValidationError("empty trajectory");
  if (at < traj.times.front() || at > traj.times.back()) {
    throw ValidationError("requested time lies outside the trajectory");
  }
  const auto it = std::min_element(traj.times.begin(), traj.times.end(),
                                   [at](double a, double b) { return std::abs(a - at) < std::abs(b - at); });
  return prevalence_by_degree(traj.states[static_cast<std::size_t>(it - traj.times.begin())], dist);
}

std::vector<double> SweepAxis::values() const {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double f = static_cast<double>(i) / (steps - 1);
    v.push_back(log ? std::pow(10.0, std::log10(min) + f * (std::log10(max) - std::log10(min)))
                    : min + f * (max - min));
  }
  v.back() = max;
  return v;
}

SweepAxis parse_axis(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.size() != 4 && parts.size() != 5) {
    throw ValidationError("axis '" + text + "' must read name:min:max:steps[:log]");
  }
  SweepAxis a;
  a.name = parts[0];
  try {
    std::size_t pos = 0;
    a.min = std::stod(parts[1], &pos);
    if (pos != parts[1].size()) throw std::invalid_argument("min");
    a.max = std::stod(parts[2], &pos);
    if (pos != parts[2].size()) throw std::invalid_argument("max");
    a.steps = std::stoi(parts[3], &pos);
    if (pos != parts[3].size()) throw std::invalid_argument("steps");
  } catch (const std::exception&) {
    throw ValidationError("axis '" + text + "' has a malformed number");
  }
  if (parts.size() == 5) {
    if (parts[4] == "log") a.log = true;
    else if (parts[4] != "lin") throw ValidationError("axis scale must be lin or log, got '" + parts[4] + "'");
  }
  return a;
}

namespace {

bool valid_axis_name(const std::string& name) {
  if (name == "k_max") return true;
  const auto& n = Params::names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

void check_axis(const SweepAxis& a, const char* which, std::vector<std::string>& bad) {
  const std::string tag = std::string(which) + " axis";
  if (!valid_axis_name(a.name)) bad.push_back(tag + ": unknown parameter '" + a.name + "'");
  if (a.steps < 2) bad.push_back(tag + ": steps must be at least 2");
  if (!std::isfinite(a.min) || !std::isfinite(a.max) || !(a.max > a.min)) {
    bad.push_back(tag + ": need finite min < max");
  }
  if (a.log && !(a.min > 0.0)) bad.push_back(tag + ": log scale needs min > 0");
}

}  // namespace

void SweepSpec::validate() const {
  std::vector<std::string> bad;
  check_axis(x, "x", bad);
  check_axis(y, "y", bad);
  if (x.name == y.name) bad.push_back("axes must sweep different parameters");
  if (!(check_fraction >= 0.0 && check_fraction <= 1.0)) bad.push_back("check fraction must lie in [0, 1]");
  if (x.name == "k_max" || y.name == "k_max") {
    const SweepAxis& k = x.name == "k_max" ? x : y;
    if (k.min <= network.k_min) bad.push_back("k_max axis must start above k_min");
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
}

namespace {

SweepCell evaluate_cell(const SweepSpec& spec, double xv, double yv) {
  SweepCell cell;
  cell.x = xv;
  cell.y = yv;
  cell.r0_printed = std::numeric_limits<double>::quiet_NaN();
  try {
    Params p = spec.base;
    int k_max = spec.network.k_max;
    bool k_axis = false;
    for (const auto& [axis, v] : {std::pair{&spec.x, xv}, std::pair{&spec.y, yv}}) {
      if (axis->name == "k_max") {
        k_max = static_cast<int>(std::lround(v));
        k_axis = true;
      } else {
        p.set(axis->name, v);
      }
    }
    p.validate();
    const DegreeDistribution dist = !k_axis && spec.fixed
                                        ? *spec.fixed
                                        : build_truncated_power_law(spec.network.exponent, spec.network.k_min, k_max);
    cell.mean_degree = dist.mean_degree();
    if (spec.kind == IncidenceKind::StandardIncidence) {
      const auto m = modal_coefficients(p);
      cell.r0 = p.beta * (m.a8 + m.b8);
      try {
        cell.r0_printed = r0_closed_form_freq(p).value;
      } catch (const NumericalError&) {
      }
    } else {
      cell.r0 = r0_mass_structured(p, dist, CoefficientSource::Modal).value;
      try {
        cell.r0_printed = r0_mass_structured(p, dist, CoefficientSource::Printed).value;
      } catch (const NumericalError&) {
      }
    }
  } catch (const Error& e) {
    cell.valid = false;
    cell.error = e.what();
  }
  return cell;
}

double numeric_for_cell(const SweepSpec& spec, const SweepCell& cell) {
  Params p = spec.base;
  int k_max = spec.network.k_max;
  bool k_axis = false;
  for (const auto& [axis, v] : {std::pair{&spec.x, cell.x}, std::pair{&spec.y, cell.y}}) {
    if (axis->name == "k_max") {
      k_max = static_cast<int>(std::lround(v));
      k_axis = true;
    } else {
      p.set(axis->name, v);
    }
  }
  const DegreeDistribution dist = !k_axis && spec.fixed
                                      ? *spec.fixed
                                      : build_truncated_power_law(spec.network.exponent, spec.network.k_min, k_max);
  return r0_numeric(p, dist, spec.kind).value;
}

bool monotone(const SweepResult& r, bool along_x, int direction, double rel_tol) {
  const std::size_t outer = along_x ? r.ny : r.nx;
  const std::size_t inner = along_x ? r.nx : r.ny;
  for (std::size_t o = 0; o < outer; ++o) {
    const SweepCell* prev = nullptr;
    for (std::size_t i = 0; i < inner; ++i) {
      const SweepCell& c = along_x ? r.at(i, o) : r.at(o, i);
      if (!c.valid) continue;
      if (prev) {
        const double slack = rel_tol * std::max(std::abs(prev->r0), std::abs(c.r0));
        const double step = c.r0 - prev->r0;
        if (direction > 0 && step < -slack) return false;
        if (direction < 0 && step > slack) return false;
      }
      prev = &c;
    }
  }
  return true;
}

}  // namespace

bool SweepResult::monotone_along_x(int direction, double rel_tol) const {
  return monotone(*this, true, direction, rel_tol);
}
bool SweepResult::monotone_along_y(int direction, double rel_tol) const {
  return monotone(*this, false, direction, rel_tol);
}

SweepResult sweep_r0_phase(const SweepSpec& spec) {
  spec.validate();
  const auto xs = spec.x.values();
  const auto ys = spec.y.values();
  SweepResult out;
  out.nx = xs.size();
  out.ny = ys.size();
  out.cells.reserve(out.nx * out.ny);
  for (double yv : ys) {
    for (double xv : xs) out.cells.push_back(evaluate_cell(spec, xv, yv));
  }

  std::vector<std::size_t> order(out.cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto wanted = spec.check_fraction > 0.0
                          ? std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                                         spec.check_fraction * static_cast<double>(order.size()))))
                          : 0;
  for (std::size_t idx : order) {
    if (out.checked >= wanted) break;
    SweepCell& c = out.cells[idx];
    if (!c.valid) continue;
    try {
      c.r0_numeric = numeric_for_cell(spec, c);
      const double ref = std::max(std::abs(*c.r0_numeric), std::numeric_limits<double>::min());
      const double gap = *c.r0_numeric == 0.0 && c.r0 == 0.0 ? 0.0 : std::abs(c.r0 - *c.r0_numeric) / ref;
      out.max_check_error = std::max(out.max_check_error, gap);
      ++out.checked;
    } catch (const Error&) {
      c.r0_numeric.reset();
    }
  }

  auto straddles = [&](std::size_t a, std::size_t b) {
    const SweepCell &ca = out.cells[a], &cb = out.cells[b];
    return ca.valid && cb.valid && ((ca.r0 < 1.0) != (cb.r0 < 1.0));
  };
  for (std::size_t iy = 0; iy < out.ny; ++iy) {
    for (std::size_t ix = 0; ix < out.nx; ++ix) {
      const std::size_t i = iy * out.nx + ix;
      if (ix + 1 < out.nx && straddles(i, i + 1)) out.contour.push_back({i, i + 1});
      if (iy + 1 < out.ny && straddles(i, i + out.nx)) out.contour.push_back({i, i + out.nx});
    }
  }
  return out;
}

double scaled_rhs_norm(const ModelRhs& rhs, const MetapopState& state) {
  const Vector f = rhs.derivative(state).flat();
  return f.lpNorm<Eigen::Infinity>() / std::max(1.0, state.flat().lpNorm<Eigen::Infinity>());
}

namespace {

std::optional<MetapopState> newton_polish(const ModelRhs& rhs, const MetapopState& start, double threshold) {
  const Vector y0 = start.flat();
  Vector y = y0;
  const double reach = 1e-3 * std::max(1.0, y0.lpNorm<Eigen::Infinity>());
  for (int it = 0; it < 30; ++it) {
    Vector f;
    rhs.evaluate(y, f);
    if (!f.allFinite()) return std::nullopt;
    if (f.lpNorm<Eigen::Infinity>() / std::max(1.0, y.lpNorm<Eigen::Infinity>()) < 0.1 * threshold) {
      if ((y.array() < 0.0).any() || (y - y0).lpNorm<Eigen::Infinity>() > reach) return std::nullopt;
      return MetapopState::from_flat(y);
    }
    const Eigen::PartialPivLU<Matrix> lu(rhs.jacobian(y));
    const Vector dy = lu.solve(-f);
    if (!dy.allFinite()) return std::nullopt;
    y += dy;
    if ((y - y0).lpNorm<Eigen::Infinity>() > reach) return std::nullopt;
  }
  return std::nullopt;
}

void add_stats(IntegrationStats& a, const IntegrationStats& b) {
  a.accepted += b.accepted;
  a.rejected += b.rejected;
  a.evaluations += b.evaluations;
  a.clips += b.clips;
  a.implicit_steps += b.implicit_steps;
  a.switched_to_implicit = a.switched_to_implicit || b.switched_to_implicit;
}

}  // namespace

SettleResult settle_to_steady_state(const ModelRhs& rhs, const MetapopState& start, const SettleOptions& options) {
  if (!(options.chunk > 0.0) || !(options.max_time > 0.0) || !(options.threshold > 0.0)) {
    throw ValidationError("settle options must be positive");
  }
  SettleResult out;
  out.state = start;
  while (true) {
    out.rhs_norm = scaled_rhs_norm(rhs, out.state);
    if (out.rhs_norm < options.threshold) {
      out.settled = true;
      return out;
    }
    if (options.newton_polish) {
      if (auto polished = newton_polish(rhs, out.state, options.threshold)) {
        out.state = std::move(*polished);
        out.polished = true;
        out.rhs_norm = scaled_rhs_norm(rhs, out.state);
        out.settled = out.rhs_norm < options.threshold;
        if (out.settled) return out;
      }
    }
    if (out.time >= options.max_time) return out;
    const double span = std::min(options.chunk, options.max_time - out.time);
    const Trajectory traj = integrate(rhs, out.state, span, span, options.controls);
    out.state = traj.states.back();
    out.time += span;
    add_stats(out.stats, traj.stats);
  }
}

std::vector<MigrationRow> sweep_migration(const std::vector<double>& d_values, const Params& base,
                                          const DegreeDistribution& dist, const ModelOptions& options,
                                          const SettleOptions& settle) {
  if (d_values.empty()) throw ValidationError("at least one diffusion value is required");
  for (double d : d_values) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError("diffusion values must be positive");
  }
  std::vector<MigrationRow> rows;
  for (double d : d_values) {
    const Params p = base.with_diffusion(d);
    const ModelRhs rhs(p, dist, options);
    const SettleResult s = settle_to_steady_state(rhs, perturbed_dfe(p, dist), settle);
    rows.push_back({d, s.settled, s.rhs_norm, s.time, prevalence_by_degree(s.state, dist)});
  }
  return rows;
}

}  // namespace tbmeta
