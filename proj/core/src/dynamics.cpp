#include "tbmeta/dynamics.hpp"

#include "tbmeta/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tbmeta {

Params Params::with_diffusion(double D) const {
  Params out = *this;
  out.D_S = out.D_E = out.D_I = out.D_R = D;
  return out;
}

std::vector<std::string> Params::violations() const {
  std::vector<std::string> out;
  for (auto name : names()) {
    const double v = get(name);
    if (!std::isfinite(v)) {
      out.push_back(std::string(name) + " must be finite");
    } else if (v < 0.0) {
      out.push_back(std::string(name) + " must be nonnegative (got " + std::to_string(v) + ")");
    }
  }
  if (mu == 0.0) out.push_back("mu must be positive");
  for (auto [name, v] : {std::pair{"q", q}, std::pair{"theta", theta}, std::pair{"xi", xi}}) {
    if (v > 1.0) out.push_back(std::string(name) + " must lie in [0, 1] (got " + std::to_string(v) + ")");
  }
  for (auto [name, v] : {std::pair{"D_S", D_S}, std::pair{"D_E", D_E}, std::pair{"D_I", D_I},
                         std::pair{"D_R", D_R}}) {
    if (std::isfinite(v) && v == 0.0) out.push_back(std::string(name) + " must be strictly positive");
  }
  return out;
}

void Params::validate() const {
  auto v = violations();
  if (!v.empty()) throw ValidationError(std::move(v));
}

const std::array<std::string_view, 15>& Params::names() {
  static const std::array<std::string_view, 15> kNames = {
      "lambda", "beta", "mu",    "q", "alpha", "theta", "delta", "eta",
      "gamma",  "d",    "xi",    "D_S", "D_E", "D_I",   "D_R"};
  return kNames;
}

namespace {

template <typename Self>
auto& field(Self& p, std::string_view name) {
  if (name == "lambda") return p.lambda;
  if (name == "beta") return p.beta;
  if (name == "mu") return p.mu;
  if (name == "q") return p.q;
  if (name == "alpha") return p.alpha;
  if (name == "theta") return p.theta;
  if (name == "delta") return p.delta;
  if (name == "eta") return p.eta;
  if (name == "gamma") return p.gamma;
  if (name == "d") return p.d;
  if (name == "xi") return p.xi;
  if (name == "D_S") return p.D_S;
  if (name == "D_E") return p.D_E;
  if (name == "D_I") return p.D_I;
  if (name == "D_R") return p.D_R;
  throw ValidationError("unknown parameter '" + std::string(name) + "'");
}

}  // namespace

double Params::get(std::string_view name) const { return field(*this, name); }
void Params::set(std::string_view name, double value) { field(*this, name) = value; }

std::string_view to_string(IncidenceKind kind) {
  return kind == IncidenceKind::StandardIncidence ? "standard" : "mass";
}

IncidenceKind parse_incidence(std::string_view text) {
  if (text == "standard" || text == "freq" || text == "frequency") return IncidenceKind::StandardIncidence;
  if (text == "mass" || text == "mass-action" || text == "density") return IncidenceKind::MassAction;
  throw ValidationError("unknown incidence kind '" + std::string(text) + "' (use standard or mass)");
}

MetapopState::MetapopState(Eigen::Index n)
    : S(Vector::Zero(n)), E(Vector::Zero(n)), I(Vector::Zero(n)), R(Vector::Zero(n)) {}

MetapopState::MetapopState(Vector s, Vector e, Vector i, Vector r)
    : S(std::move(s)), E(std::move(e)), I(std::move(i)), R(std::move(r)) {
  if (E.size() != S.size() || I.size() != S.size() || R.size() != S.size()) {
    throw ValidationError("compartment vectors must have equal length");
  }
}

Vector MetapopState::flat() const {
  Vector y(4 * size());
  y << S, E, I, R;
  return y;
}

MetapopState MetapopState::from_flat(const Vector& y) {
  if (y.size() % 4 != 0) throw ValidationError("packed state length must be a multiple of 4");
  const auto n = y.size() / 4;
  return MetapopState(y.segment(0, n), y.segment(n, n), y.segment(2 * n, n), y.segment(3 * n, n));
}

bool MetapopState::nonnegative() const {
  return (S.array() >= 0).all() && (E.array() >= 0).all() && (I.array() >= 0).all() &&
         (R.array() >= 0).all();
}

Aggregates aggregate(const MetapopState& state, const DegreeDistribution& dist) {
  if (static_cast<std::size_t>(state.size()) != dist.size()) {
    throw ValidationError("state size does not match the degree distribution");
  }
  const auto p = dist.probs();
  Aggregates a{};
  a.S = weighted_sum(p, state.S);
  a.E = weighted_sum(p, state.E);
  a.I = weighted_sum(p, state.I);
  a.R = weighted_sum(p, state.R);
  CompensatedSum total;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    total.add(p[k] * state.S[i]);
    total.add(p[k] * state.E[i]);
    total.add(p[k] * state.I[i]);
    total.add(p[k] * state.R[i]);
  }
  a.total = total.value();
  return a;
}

InvariantCheck check_invariant_region(const MetapopState& state, const DegreeDistribution& dist,
                                      const Params& p) {
  InvariantCheck out{};
  out.min_entry = std::min({state.S.minCoeff(), state.E.minCoeff(), state.I.minCoeff(), state.R.minCoeff()});
  out.aggregate_total = aggregate(state, dist).total;
  out.bound = p.lambda / p.mu;
  out.margin = out.bound * (1.0 + 1e-6) - out.aggregate_total;
  out.inside = out.min_entry >= 0.0 && out.margin >= 0.0;
  return out;
}

namespace {

void require_valid(const MetapopState& state, const DegreeDistribution& dist) {
  if (static_cast<std::size_t>(state.size()) != dist.size()) {
    throw ValidationError("state size does not match the degree distribution");
  }
  if (!state.nonnegative()) throw ValidationError("state has negative entries");
}

/// Local reaction terms, shared by all diffusion closures.
MetapopState reaction(const MetapopState& x, const Params& p, const ModelOptions& options) {
  const auto n = x.size();
  MetapopState out(n);
  const double ap = p.progression();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double s = x.S[k], e = x.E[k], i = x.I[k], r = x.R[k];
    double force = 0.0;
    if (options.incidence == IncidenceKind::MassAction) {
      force = p.beta * i;
    } else {
      const double total = s + e + i + r;
      // 0/0 limit along nonnegative states: i <= total, so the force vanishes with total.
      force = total > 0.0 ? p.beta * i / total : 0.0;
    }
    const double incidence = force * s;
    const double reinfection = options.reinfection ? (1.0 - p.xi) * force * r : 0.0;
    out.S[k] = p.lambda - incidence - p.mu * s;
    out.E[k] = (1.0 - p.q) * incidence + reinfection + p.gamma * i - (p.mu + p.eta + ap) * e;
    out.I[k] = p.q * incidence + ap * e - (p.mu + p.d + p.gamma + p.delta) * i + p.xi * r;
    out.R[k] = -reinfection + p.eta * e + p.delta * i - (p.mu + p.xi) * r;
  }
  return out;
}

/// -D (x_k - k/<k> sum_j p_j x_j)
void add_uncorrelated_diffusion(Vector& out, const Vector& x, double D, const DegreeDistribution& dist) {
  const double mean = weighted_sum(dist.probs(), x);
  const double kbar = dist.mean_degree();
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    out[k] -= D * (x[k] - dist.degree(static_cast<std::size_t>(k)) / kbar * mean);
  }
}

/// k D sum_k' P(k'|k) x_{k'} / k' - D x_k, written term by term.
void add_kernel_diffusion(Vector& out, const Vector& x, double D, const DegreeDistribution& dist,
                          const MixingKernel& kernel) {
  const Matrix& P = kernel.matrix();
  const auto n = x.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    CompensatedSum inflow;
    for (Eigen::Index j = 0; j < n; ++j) {
      inflow.add(P(k, j) * x[j] / dist.degree(static_cast<std::size_t>(j)));
    }
    out[k] += dist.degree(static_cast<std::size_t>(k)) * D * inflow.value() - D * x[k];
  }
}

}  // namespace

namespace {

MetapopState general_unchecked(const MetapopState& state, const Params& p, const DegreeDistribution& dist,
                               const MixingKernel& kernel, const ModelOptions& options) {
  MetapopState out = reaction(state, p, options);
  add_kernel_diffusion(out.S, state.S, p.D_S, dist, kernel);
  add_kernel_diffusion(out.E, state.E, p.D_E, dist, kernel);
  add_kernel_diffusion(out.I, state.I, p.D_I, dist, kernel);
  add_kernel_diffusion(out.R, state.R, p.D_R, dist, kernel);
  return out;
}

MetapopState uncorrelated_unchecked(const MetapopState& state, const Params& p,
                                    const DegreeDistribution& dist, const ModelOptions& options) {
  MetapopState out = reaction(state, p, options);
  add_uncorrelated_diffusion(out.S, state.S, p.D_S, dist);
  add_uncorrelated_diffusion(out.E, state.E, p.D_E, dist);
  add_uncorrelated_diffusion(out.I, state.I, p.D_I, dist);
  add_uncorrelated_diffusion(out.R, state.R, p.D_R, dist);
  return out;
}

}  // namespace

MetapopState rhs_general(const MetapopState& state, const Params& p, const DegreeDistribution& dist,
                         const MixingKernel& kernel, const ModelOptions& options) {
  require_valid(state, dist);
  if (kernel.size() != dist.size()) throw ValidationError("kernel does not match the distribution");
  return general_unchecked(state, p, dist, kernel, options);
}

MetapopState rhs_uncorrelated(const MetapopState& state, const Params& p,
                              const DegreeDistribution& dist, const ModelOptions& options) {
  require_valid(state, dist);
  return uncorrelated_unchecked(state, p, dist, options);
}

MetapopState rhs_uncorrelated_freq(const MetapopState& state, const Params& p,
                                   const DegreeDistribution& dist, bool reinfection) {
  return rhs_uncorrelated(state, p, dist, {IncidenceKind::StandardIncidence, reinfection});
}

MetapopState rhs_uncorrelated_mass(const MetapopState& state, const Params& p,
                                   const DegreeDistribution& dist, bool reinfection) {
  return rhs_uncorrelated(state, p, dist, {IncidenceKind::MassAction, reinfection});
}

Matrix rhs_jacobian(const MetapopState& x, const Params& p, const Matrix& c,
                    const ModelOptions& options) {
  const auto n = x.size();
  if (c.rows() != n || c.cols() != n) throw ValidationError("connectivity matrix does not match state");
  Matrix J = Matrix::Zero(4 * n, 4 * n);
  const Matrix id = Matrix::Identity(n, n);
  J.block(0, 0, n, n) = p.D_S * (c - id);
  J.block(n, n, n, n) = p.D_E * (c - id);
  J.block(2 * n, 2 * n, n, n) = p.D_I * (c - id);
  J.block(3 * n, 3 * n, n, n) = p.D_R * (c - id);

  const double ap = p.progression();
  const double reinf = options.reinfection ? 1.0 - p.xi : 0.0;
  enum { kS = 0, kE = 1, kI = 2, kR = 3 };
  for (Eigen::Index k = 0; k < n; ++k) {
    const double s = x.S[k], e = x.E[k], i = x.I[k], r = x.R[k];
    double force = 0.0;
    std::array<double, 4> dforce{};  // d(force)/d(S,E,I,R)
    if (options.incidence == IncidenceKind::MassAction) {
      force = p.beta * i;
      dforce[kI] = p.beta;
    } else {
      const double total = s + e + i + r;
      if (total > 0.0) {
        force = p.beta * i / total;
        const double t2 = total * total;
        dforce = {-p.beta * i / t2, -p.beta * i / t2, p.beta * (total - i) / t2, -p.beta * i / t2};
      }
    }
    std::array<double, 4> dinc{}, dre{};
    for (int v = 0; v < 4; ++v) {
      dinc[v] = s * dforce[v] + (v == kS ? force : 0.0);
      dre[v] = reinf * (r * dforce[v] + (v == kR ? force : 0.0));
    }
    const auto col = [&](int v) { return v * n + k; };
    for (int v = 0; v < 4; ++v) {
      J(kS * n + k, col(v)) += -dinc[v];
      J(kE * n + k, col(v)) += (1.0 - p.q) * dinc[v] + dre[v];
      J(kI * n + k, col(v)) += p.q * dinc[v];
      J(kR * n + k, col(v)) += -dre[v];
    }
    J(kS * n + k, col(kS)) -= p.mu;
    J(kE * n + k, col(kI)) += p.gamma;
    J(kE * n + k, col(kE)) -= p.mu + p.eta + ap;
    J(kI * n + k, col(kE)) += ap;
    J(kI * n + k, col(kI)) -= p.mu + p.d + p.gamma + p.delta;
    J(kI * n + k, col(kR)) += p.xi;
    J(kR * n + k, col(kE)) += p.eta;
    J(kR * n + k, col(kI)) += p.delta;
    J(kR * n + k, col(kR)) -= p.mu + p.xi;
  }
  return J;
}

ModelRhs::ModelRhs(Params p, DegreeDistribution dist, ModelOptions options)
    : p_(p), dist_(std::move(dist)), options_(options), c_(uncorrelated_connectivity(dist_)) {
  p_.validate();
}

ModelRhs::ModelRhs(Params p, DegreeDistribution dist, MixingKernel kernel, ModelOptions options)
    : p_(p), dist_(std::move(dist)), kernel_(std::move(kernel)), options_(options) {
  p_.validate();
  if (kernel_->size() != dist_.size()) throw ValidationError("kernel does not match the distribution");
  c_ = connectivity_matrix(dist_, *kernel_);
}

MetapopState ModelRhs::derivative(const MetapopState& x) const {
  if (kernel_ && !kernel_->uncorrelated()) return general_unchecked(x, p_, dist_, *kernel_, options_);
  return uncorrelated_unchecked(x, p_, dist_, options_);
}

void ModelRhs::evaluate(const Vector& y, Vector& dydt) const {
  dydt = derivative(MetapopState::from_flat(y)).flat();
}

Matrix ModelRhs::jacobian(const Vector& y) const {
  return rhs_jacobian(MetapopState::from_flat(y), p_, c_, options_);
}

}  // namespace tbmeta
