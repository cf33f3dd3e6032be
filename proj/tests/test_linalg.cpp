#include "support.hpp"

#include <tbmeta/errors.hpp>
#include <tbmeta/linalg.hpp>

#include <doctest.h>

using namespace tbmeta;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                     double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = oracle::uniform(rng, lo, hi);
  return m;
}

Matrix well_conditioned(std::mt19937_64& rng, Eigen::Index n) {
  return random_matrix(rng, n, n) + static_cast<double>(n) * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("block inverse on a hand example") {
  Block2x2 b{Matrix::Identity(1, 1) * 2, Matrix::Identity(1, 1), Matrix::Identity(1, 1),
             Matrix::Identity(1, 1) * 3};
  const Matrix inv = block_2x2_inverse(b);
  Matrix expect(2, 2);
  expect << 0.6, -0.2, -0.2, 0.4;
  CHECK(oracle::max_abs(inv - expect) < 1e-15);
}

TEST_CASE("block inverse matches LU on random blocks") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = oracle::uniform_int(rng, 1, 8), m = oracle::uniform_int(rng, 1, 8);
    Block2x2 b{well_conditioned(rng, n), random_matrix(rng, n, m), random_matrix(rng, m, n),
               well_conditioned(rng, m)};
    const Matrix full = b.assemble();
    const Matrix inv = block_2x2_inverse(b);
    CHECK(oracle::max_abs(full * inv - Matrix::Identity(n + m, n + m)) < 1e-12);
    CHECK(oracle::max_abs(inv - full.fullPivLu().inverse()) < 1e-12);
  }
}

TEST_CASE("block inverse names the singular piece") {
  Block2x2 b{Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
             Matrix::Identity(2, 2)};
  try {
    block_2x2_inverse(b);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.which() == "N1");
  }
  Block2x2 s{Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
             Matrix::Identity(2, 2)};
  try {
    block_2x2_inverse(s);
    FAIL("expected SingularMatrixError");
  } catch (const SingularMatrixError& e) {
    CHECK(e.which() == "Schur complement");
  }
}

TEST_CASE("rank-one update inverse") {
  SUBCASE("hand example") {
    // (I + 1 1^T)^{-1} = I - 1 1^T / (1 + n)
    const Eigen::Index n = 4;
    const Matrix inv = rank_one_update_inverse(Matrix::Identity(n, n), Matrix::Ones(n, 1),
                                               Matrix::Identity(1, 1), Matrix::Ones(1, n));
    const Matrix expect = Matrix::Identity(n, n) - Matrix::Ones(n, n) / 5.0;
    CHECK(oracle::max_abs(inv - expect) < 1e-15);
  }
  SUBCASE("random low-rank updates") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const auto n = oracle::uniform_int(rng, 2, 10), r = oracle::uniform_int(rng, 1, 3);
      const Matrix u = well_conditioned(rng, n);
      const Matrix x = random_matrix(rng, n, r, -0.3, 0.3), z = random_matrix(rng, r, n, -0.3, 0.3);
      const Matrix w = well_conditioned(rng, r);
      const Matrix full = u + x * w * z;
      CHECK(oracle::max_abs(rank_one_update_inverse(u, x, w, z) - full.fullPivLu().inverse()) < 1e-11);
    }
  }
  SUBCASE("singular core") {
    // I - 1 1^T / n has 1 in its null space
    const Eigen::Index n = 3;
    try {
      rank_one_update_inverse(Matrix::Identity(n, n), Matrix::Ones(n, 1), Matrix::Identity(1, 1) * -1.0 / 3.0,
                              Matrix::Ones(1, n));
      FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError& e) {
      CHECK(e.which() == "core");
    }
  }
  SUBCASE("singular U") {
    Matrix u = Matrix::Identity(3, 3);
    u(2, 2) = 0.0;
    try {
      rank_one_update_inverse(u, Matrix::Ones(3, 1), Matrix::Identity(1, 1), Matrix::Ones(1, 3));
      FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError& e) {
      CHECK(e.which() == "U");
    }
  }
}

TEST_CASE("block spectral radius: trivial identity blocks") {
  const Matrix I = Matrix::Identity(3, 3);
  const auto r = block_spectral_radius(I, I, I, I);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.commuting);
}

TEST_CASE("block spectral radius rejects M1 = M4 = 0, M2 = M3 = I") {
  // M2 M3 = I but M2 M4 M2^{-1} M1 = 0
  const Matrix I = Matrix::Identity(2, 2), Z = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(block_spectral_radius(Z, I, I, Z), HypothesisViolation);
}

TEST_CASE("block spectral radius rejects a singular M2") {
  const Matrix I = Matrix::Identity(2, 2), Z = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(block_spectral_radius(I, Z, I, I), HypothesisViolation);
}

TEST_CASE("block spectral radius against the full eigensolver") {
  // M3 = M4 M2^{-1} M1 satisfies the conjugation hypothesis for any M1, M2, M4
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = oracle::uniform_int(rng, 1, 6);
    const Matrix m1 = random_matrix(rng, n, n, 0, 1), m4 = random_matrix(rng, n, n, 0, 1);
    const Matrix m2 = well_conditioned(rng, n);
    const Matrix m3 = m4 * m2.inverse() * m1;
    Matrix full(2 * n, 2 * n);
    full << m1, m2, m3, m4;
    const auto r = block_spectral_radius(m1, m2, m3, m4);
    CHECK(r.conjugation_residual <= 1e-8);
    CHECK(r.value == doctest::Approx(oracle::spectral_radius(full)).epsilon(1e-9));
  }
}

TEST_CASE("block spectral radius, commuting case") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto n = oracle::uniform_int(rng, 1, 6);
    const Matrix m1 = random_matrix(rng, n, n, 0, 1);
    const Matrix base = random_matrix(rng, n, n, 0, 1);
    // polynomials in the same matrix commute
    const Matrix m2 = base + 3.0 * Matrix::Identity(n, n);
    const Matrix m4 = base * base + base;
    const Matrix m3 = m4 * m2.inverse() * m1;
    Matrix full(2 * n, 2 * n);
    full << m1, m2, m3, m4;
    const auto r = block_spectral_radius(m1, m2, m3, m4);
    CHECK(r.commuting);
    CHECK(r.value == doctest::Approx(oracle::spectral_radius(full)).epsilon(1e-9));
    CHECK(r.value == doctest::Approx(oracle::spectral_radius(m1 + m4)).epsilon(1e-9));
  }
}

TEST_CASE("power iteration on hand examples") {
  SUBCASE("identity converges immediately") {
    const auto r = spectral_radius_power_iteration(Matrix::Identity(5, 5));
    CHECK(r.value == doctest::Approx(1.0));
    CHECK(r.converged);
    CHECK_FALSE(r.used_fallback);
  }
  SUBCASE("diagonal never closes the bracket and falls back") {
    Matrix m = Matrix::Zero(3, 3);
    m.diagonal() << 1, 2, 3;
    const auto r = spectral_radius_power_iteration(m, 1e-12, 200);
    CHECK(r.value == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.used_fallback);
  }
  SUBCASE("[[2,1],[1,2]] has Perron root 3") {
    Matrix m(2, 2);
    m << 2, 1, 1, 2;
    CHECK(spectral_radius_power_iteration(m).value == doctest::Approx(3.0).epsilon(1e-14));
  }
}

TEST_CASE("power iteration agrees with the dense eigensolver on positive matrices") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = oracle::uniform_int(rng, 1, 40);
    const Matrix m = random_matrix(rng, n, n, 0.01, 1.0);
    const auto r = spectral_radius_power_iteration(m);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(oracle::spectral_radius(m)).epsilon(1e-10));
    CHECK(dense_spectral_radius(m) == doctest::Approx(oracle::spectral_radius(m)).epsilon(1e-12));
    const auto [lo, hi] = column_sum_bounds(m);
    CHECK(lo <= r.value * (1 + 1e-12));
    CHECK(r.value <= hi * (1 + 1e-12));
  }
}

TEST_CASE("power iteration on a signed matrix uses the fallback") {
  Matrix m(2, 2);
  m << 0, -1, 1, 0;
  const auto r = spectral_radius_power_iteration(m);
  CHECK(r.used_fallback);
  CHECK(r.value == doctest::Approx(1.0));
}

TEST_CASE("column-sum bounds") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const auto [lo, hi] = column_sum_bounds(m);
  CHECK(lo == 4.0);
  CHECK(hi == 6.0);
  m(0, 0) = -1.0;
  CHECK_THROWS_AS(column_sum_bounds(m), ValidationError);
}

TEST_CASE("checked inverse and condition estimate") {
  Matrix m(2, 2);
  m << 1, 1, 1, 1 + 1e-16;
  CHECK_THROWS_AS(checked_inverse(m, "M"), SingularMatrixError);
  CHECK(rcond_estimate(Matrix::Identity(4, 4)) == doctest::Approx(1.0));
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 1) = std::nan("");
  CHECK_THROWS(dense_spectral_radius(nan));
}
