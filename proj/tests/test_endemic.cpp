#include "support.hpp"

#include <tbmeta/endemic.hpp>
#include <tbmeta/errors.hpp>
#include <tbmeta/ngm.hpp>
#include <tbmeta/sweep.hpp>

#include <doctest.h>

using namespace tbmeta;

namespace {

Vector random_positive(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = oracle::uniform(rng, lo, hi);
  return z;
}

oracle::Draw supercritical(std::mt19937_64& rng, double r0) {
  auto d = oracle::generic_draw(rng);
  oracle::set_r0(d, true, r0);
  return d;
}

/// Dense V^{-1} with the same layout as the library, from the oracle's V.
Matrix oracle_g(const oracle::Draw& d) {
  const auto fv = oracle::fv(d.p, d.dist, false);
  const auto n = static_cast<Eigen::Index>(d.dist.size());
  const Matrix w = fv.V.fullPivLu().inverse();
  Matrix k = Matrix::Zero(3 * n, n);
  k.topRows(n) = (1 - d.p.q) * Matrix::Identity(n, n);
  k.middleRows(n, n) = d.p.q * Matrix::Identity(n, n);
  return d.p.beta * w.middleRows(n, n) * k;
}

}  // namespace

TEST_CASE("compact form vectors") {
  const Params p = Params::table1();
  const auto d = build_truncated_power_law(3.0, 3, 10);
  const auto n = static_cast<Eigen::Index>(d.size());
  const auto cf = compact_form_vectors(p, d);
  REQUIRE(cf.B.rows() == n);
  REQUIRE(cf.B.cols() == 3 * n);
  std::mt19937_64 rng(1);
  const Vector y = random_positive(rng, 3 * n, 0, 1);
  CHECK(oracle::max_abs(cf.B * y - p.beta * y.segment(n, n)) == 0.0);
  REQUIRE(cf.K.size() == d.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector& k = cf.K[static_cast<std::size_t>(i)];
    CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((k.array() >= 0.0).all());
    CHECK((k.array() != 0.0).count() == 2);
    CHECK(k[i] == 1 - p.q);
    CHECK(k[n + i] == p.q);
  }
}

TEST_CASE("closed-form inverse of P(z)") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    auto draw = oracle::generic_draw(rng);
    const auto n = static_cast<Eigen::Index>(draw.dist.size());
    const Vector z = trial == 0 ? Vector::Zero(n) : random_positive(rng, n, 0, 10);
    const Matrix pm = p_matrix(z, draw.p, draw.dist);
    const Matrix ref = Matrix(z.asDiagonal()) - draw.p.D_S * oracle::connectivity(draw.dist) +
                       (draw.p.mu + draw.p.D_S) * Matrix::Identity(n, n);
    CHECK(oracle::max_abs(pm - ref) <= 1e-14 * oracle::max_abs(ref));
    const Matrix inv = p_inverse(z, draw.p, draw.dist);
    CHECK(oracle::max_abs(inv * pm - Matrix::Identity(n, n)) <= 1e-10 * static_cast<double>(n));
    CHECK(oracle::max_abs(inv - ref.fullPivLu().inverse()) <= 1e-10 * oracle::max_abs(inv));
  }
}

TEST_CASE("P(0) identities at the DFE") {
  const Params p = Params::table1();
  const auto d = build_truncated_power_law(3.0, 3, 50);
  const auto n = static_cast<Eigen::Index>(d.size());
  const Vector x0 = dfe_susceptible(p, d);
  const Matrix p0 = p_matrix(Vector::Zero(n), p, d);
  CHECK(oracle::max_abs(p0 * x0 - Vector::Constant(n, p.lambda)) <= 1e-10 * p.lambda);
  CHECK(oracle::max_abs(p_inverse(Vector::Zero(n), p, d) * p0 * x0 - x0) <= 1e-10 * x0.maxCoeff());
  Params iso = p;
  iso.D_S = 1e-15;
  const Matrix inv = p_inverse(Vector::Zero(n), iso, d);
  CHECK(oracle::max_abs(inv - Matrix::Identity(n, n) / p.mu) <= 1e-9 / p.mu);
}

TEST_CASE("P inverse rejects a vanishing core and negative z") {
  const Params p = Params::table1();
  const auto d = build_truncated_power_law(3.0, 3, 5);
  Vector z = Vector::Ones(static_cast<Eigen::Index>(d.size()));
  z[0] = -1.0;
  CHECK_THROWS_AS(p_inverse(z, p, d), ValidationError);
  // mu -> 0 at z = 0 sends the core 1 - D_S/(mu + D_S) to zero
  Params tiny = p;
  tiny.mu = 1e-300;
  try {
    p_inverse(Vector::Zero(static_cast<Eigen::Index>(d.size())), tiny, d);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.which() == "core");
  }
}

TEST_CASE("G, column weights and the h-limit matrix against an independent assembly") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto draw = supercritical(rng, oracle::uniform(rng, 0.5, 3.0));
    const EndemicSystem sys(draw.p, draw.dist);
    const Matrix g = oracle_g(draw);
    CHECK(oracle::max_abs(sys.g() - g) <= 1e-12 * oracle::max_abs(g));
    const Vector c = g.colwise().sum().transpose();
    CHECK(oracle::max_abs(sys.column_weights() - c) <= 1e-12 * c.maxCoeff());
    const Vector x0 = oracle::dfe_s(draw.p, draw.dist);
    const Matrix a = g * x0.asDiagonal();
    CHECK(oracle::max_abs(h_limit_matrix(draw.p, draw.dist) - a) <= 1e-11 * oracle::max_abs(a));
    const double h0 = h_limit_zero(draw.p, draw.dist);
    CHECK(h0 == doctest::Approx(a.sum()).epsilon(1e-11));
    CHECK(h0 >= oracle::spectral_radius(a));
    // rho(A) is the mass-action R0
    CHECK(oracle::spectral_radius(a) == doctest::Approx(oracle::r0(draw.p, draw.dist, true)).epsilon(1e-9));
    CHECK(h0 >= r0_numeric(draw.p, draw.dist, IncidenceKind::MassAction).value - 1e-8);
  }
}

TEST_CASE("h_limit_zero at beta = 0") {
  Params p = Params::table1();
  p.beta = 0.0;
  const auto d = build_truncated_power_law(3.0, 3, 20);
  CHECK(h_limit_zero(p, d) == 0.0);
  CHECK(r0_numeric(p, d, IncidenceKind::MassAction).value == 0.0);
}

TEST_CASE("H near zero and at infinity") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto draw = supercritical(rng, 1.5);
    const auto n = static_cast<Eigen::Index>(draw.dist.size());
    const double h0 = h_limit_zero(draw.p, draw.dist);
    // along z = eps 1 the ratio tends to the per-class average of the summed form
    const double h_eps = h_function(Vector::Constant(n, 1e-8), draw.p, draw.dist);
    CHECK(h_eps == doctest::Approx(h0 / static_cast<double>(n)).epsilon(1e-4));
    // concentrating z on one class recovers that class's term x0_i c_i
    const EndemicSystem sys(draw.p, draw.dist);
    Vector e = Vector::Constant(n, 1e-20);
    e[0] = 1e-8;
    CHECK(h_function(e, sys) == doctest::Approx(sys.x0()[0] * sys.column_weights()[0]).epsilon(1e-4));
    CHECK(h_function(Vector::Constant(n, 1e8), draw.p, draw.dist) < 1e-3);
  }
  const auto d = build_truncated_power_law(3.0, 3, 5);
  CHECK_THROWS_AS(h_function(Vector::Zero(3), Params::table1(), d), ValidationError);
}

TEST_CASE("solve_endemic on supercritical draws") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto draw = supercritical(rng, oracle::uniform(rng, 1.2, 3.0));
    const auto n = static_cast<Eigen::Index>(draw.dist.size());
    const Vector init = Vector::Constant(n, draw.p.beta * draw.p.lambda / draw.p.mu * 0.01);
    const auto sol = solve_endemic(draw.p, draw.dist, init);
    REQUIRE(sol.status == EndemicStatus::Converged);
    CHECK(sol.rhs_ok);
    CHECK(sol.endemic());
    CHECK(std::abs(sol.h_value - 1.0) <= 1e-8);
    CHECK((sol.z_star.array() > 0.0).all());
    CHECK((sol.x_star.array() > 0.0).all());
    CHECK((sol.y_star.array() >= 0.0).all());
    // beta I* is Phi(z*), so the gap is the fixed-point residual
    CHECK(oracle::max_abs(sol.z_star - draw.p.beta * sol.state.I) <= 1e-10 * (1 + sol.z_star.maxCoeff()));
    // independent RHS oracle, no re-infection
    const Vector f = oracle::rhs(draw.p, draw.dist, sol.state.flat(), true, false);
    const double scale = std::max(draw.p.lambda, sol.state.flat().cwiseAbs().maxCoeff());
    CHECK(f.cwiseAbs().maxCoeff() <= 1e-6 * scale);
    // fixed point of the independently assembled map
    const Vector x = p_inverse(sol.z_star, draw.p, draw.dist) * Vector::Constant(n, draw.p.lambda);
    const Vector phi = oracle_g(draw) * x.cwiseProduct(sol.z_star);
    CHECK(oracle::max_abs(phi - sol.z_star) <= 1e-9 * (1 + sol.z_star.maxCoeff()));
  }
}

TEST_CASE("solve_endemic collapses when R0 < 1") {
  std::mt19937_64 rng(6);
  const auto draw = supercritical(rng, 0.9);
  const auto n = static_cast<Eigen::Index>(draw.dist.size());
  for (int start = 0; start < 10; ++start) {
    const Vector init = random_positive(rng, n, 1e-3, 1.0) * draw.p.beta * draw.p.lambda / draw.p.mu;
    const auto sol = solve_endemic(draw.p, draw.dist, init);
    CHECK(sol.status == EndemicStatus::Collapsed);
    CHECK_FALSE(sol.endemic());
  }
  CHECK(multi_start_scan(draw.p, draw.dist, 10, 42).empty());
}

TEST_CASE("endemic equilibrium attracts the ODE flow") {
  std::mt19937_64 rng(7);
  const auto draw = supercritical(rng, 1.5);
  const auto sols = multi_start_scan(draw.p, draw.dist, 5, 7);
  REQUIRE(sols.size() == 1);
  const ModelRhs rhs(draw.p, draw.dist, ModelOptions{IncidenceKind::MassAction, false});
  MetapopState start = sols[0].state;
  for (Vector* v : {&start.S, &start.E, &start.I, &start.R}) *v *= 1.05;
  // no Newton polish; a tight tolerance keeps step-size noise under the settle threshold
  SettleOptions opts;
  opts.newton_polish = false;
  opts.controls.rtol = 1e-11;
  const auto settled = settle_to_steady_state(rhs, start, opts);
  CHECK(settled.settled);
  const Vector a = settled.state.flat(), b = sols[0].state.flat();
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-3 * b.cwiseAbs().maxCoeff());
}

TEST_CASE("endemic level grows with beta past the threshold") {
  std::mt19937_64 rng(8);
  auto draw = oracle::generic_draw(rng);
  oracle::set_r0(draw, true, 1.0);
  const double beta_c = draw.p.beta;
  const auto n = static_cast<Eigen::Index>(draw.dist.size());
  double prev = 0.0;
  for (double f : {0.8, 0.95, 1.05, 1.2, 1.5, 2.0, 3.0}) {
    draw.p.beta = f * beta_c;
    const Vector init = Vector::Constant(n, draw.p.beta * draw.p.lambda / draw.p.mu * 0.05);
    const auto sol = solve_endemic(draw.p, draw.dist, init);
    const double size = sol.status == EndemicStatus::Converged ? sol.z_star.norm() : 0.0;
    if (f < 1.0) {
      CHECK(sol.status == EndemicStatus::Collapsed);
    } else {
      CHECK(sol.endemic());
      CHECK(size > prev);
    }
    prev = size;
  }
}

TEST_CASE("multi-start determinism and ordering") {
  std::mt19937_64 rng(9);
  const auto draw = supercritical(rng, 2.0);
  const auto a = multi_start_scan(draw.p, draw.dist, 8, 123);
  const auto b = multi_start_scan(draw.p, draw.dist, 8, 123);
  REQUIRE(a.size() == b.size());
  REQUIRE_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].iterations == b[i].iterations);
    CHECK(a[i].z_star == b[i].z_star);
    if (i > 0) CHECK(a[i - 1].z_star.norm() <= a[i].z_star.norm());
  }
  CHECK_THROWS_AS(multi_start_scan(draw.p, draw.dist, 0, 1), ValidationError);
}

TEST_CASE("table1 mass-action regime at beta = 1e-3 has an endemic equilibrium") {
  Params p = Params::table1();
  p.beta = 1e-3;
  const auto d = build_truncated_power_law(3.0, 3, 100);
  const auto sols = multi_start_scan(p, d, 4, 1);
  REQUIRE_FALSE(sols.empty());
  CHECK(std::abs(sols[0].h_value - 1.0) <= 1e-8);
  CHECK(sols[0].rhs_ok);
}

TEST_CASE("solver option validation and non-convergence report") {
  const auto d = build_truncated_power_law(3.0, 3, 5);
  const Params p = Params::table1();
  const Vector ones = Vector::Ones(3);
  EndemicOptions bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(solve_endemic(p, d, ones, bad), ValidationError);
  CHECK_THROWS_AS(solve_endemic(p, d, -ones), ValidationError);
  EndemicOptions short_run;
  short_run.max_iter = 3;
  const auto sol = solve_endemic(p, d, ones, short_run);
  CHECK(sol.status == EndemicStatus::NotConverged);
  CHECK(sol.residual_history.size() == 3);
  CHECK_FALSE(sol.endemic());
}

TEST_CASE("H curve export points") {
  const auto d = build_truncated_power_law(3.0, 3, 10);
  Params p = Params::table1();
  p.beta = 1e-3;
  const auto pts = h_curve(p, d, 1e-6, 1e2, 9);
  REQUIRE(pts.size() == 9);
  CHECK(pts.front().c == doctest::Approx(1e-6));
  CHECK(pts.back().c == doctest::Approx(1e2));
  CHECK(pts[1].c == doctest::Approx(1e-5));
  CHECK_THROWS_AS(h_curve(p, d, 0.0, 1.0, 5), ValidationError);
}
