#include <doctest.h>

#include <cmath>

#include "fredgame/errors.hpp"
#include "fredgame/grid.hpp"
#include "helpers.hpp"

using namespace fredgame;
using testing::max_abs;

TEST_CASE("build_grid places left endpoints") {
  TimeGrid g = build_grid(1.0, 4);
  CHECK(g.dt == doctest::Approx(0.25));
  VectorXd t = g.times();
  REQUIRE(t.size() == 4);
  CHECK(t(0) == 0.0);
  CHECK(t(3) == doctest::Approx(0.75));
  for (int k = 1; k < 4; ++k) CHECK(t(k) > t(k - 1));
  CHECK(g.dt * g.n == doctest::Approx(1.0));

  TimeGrid h = build_grid(2.0, 2);
  CHECK(h.times()(1) == doctest::Approx(1.0));
  CHECK(h.dt == doctest::Approx(1.0));

  CHECK_THROWS_AS(build_grid(1.0, 0), Error);
  CHECK_THROWS_AS(build_grid(-1.0, 4), Error);
}

TEST_CASE("extend adds the terminal node") {
  TimeGrid g = extend(build_grid(1.0, 4));
  CHECK(g.n == 5);
  CHECK(g.time(4) == doctest::Approx(1.0));
}

TEST_CASE("discretize_kernel families") {
  TimeGrid g = build_grid(1.0, 4);
  GridKernel K = discretize_kernel(KernelSpec::constant(1.0), g);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(K(i, j) == (j < i ? 1.0 : 0.0));
  CHECK(max_abs(discretize_kernel(KernelSpec::zero(), g).values) == 0.0);

  // Cell average of (t_1 - s)^{-0.3} over s in [0, dt].
  GridKernel P = discretize_kernel(KernelSpec::power_law(1.0, 0.3), g);
  CHECK(P(1, 0) == doctest::Approx(std::pow(g.dt, -0.3) / 0.7).epsilon(1e-12));
  CHECK(is_strictly_lower(P.values));
  CHECK_THROWS_AS(discretize_kernel(KernelSpec::power_law(1.0, 0.6), g), Error);

  GridKernel E = discretize_kernel(KernelSpec::exponential(2.0, 1.5), g);
  CHECK(is_strictly_lower(E.values));
  CHECK(E.values.allFinite());
}

TEST_CASE("apply and adjoint") {
  TimeGrid g = build_grid(1.0, 4);
  GridKernel K = discretize_kernel(KernelSpec::constant(1.0), g);
  VectorXd Kf = apply(K, VectorXd::Ones(4));
  for (int i = 0; i < 4; ++i) CHECK(Kf(i) == doctest::Approx(g.time(i)));
  CHECK(max_abs(apply(zero_kernel(g), VectorXd::Ones(4))) == 0.0);

  std::mt19937_64 rng(1);
  GridKernel E = discretize_kernel(KernelSpec::exponential(1.0, 0.7), build_grid(1.0, 12));
  VectorXd f = testing::random_vector(rng, 12), h = testing::random_vector(rng, 12);
  double lhs = f.dot(apply(E, h)) * E.grid.dt;
  double rhs = apply(adjoint(E), f).dot(h) * E.grid.dt;
  CHECK(std::abs(lhs - rhs) <= 1e-14);
  CHECK(max_abs(adjoint(adjoint(E)).values - E.values) == 0.0);
  CHECK(max_abs(adjoint(zero_kernel(g)).values) == 0.0);
}

TEST_CASE("star_product") {
  TimeGrid g = build_grid(1.0, 4);
  GridKernel C = discretize_kernel(KernelSpec::constant(1.0), g);
  CHECK(star_product(C, C)(3, 0) == doctest::Approx(0.5));
  CHECK(max_abs(star_product(C, zero_kernel(g)).values) == 0.0);

  TimeGrid h = build_grid(1.0, 10);
  GridKernel A = discretize_kernel(KernelSpec::exponential(1.0, 0.5), h);
  GridKernel B = discretize_kernel(KernelSpec::power_law(0.5, 0.2), h);
  GridKernel D = discretize_kernel(KernelSpec::constant(0.3), h);
  CHECK(max_abs(star_product(star_product(A, B), D).values - star_product(A, star_product(B, D)).values) <= 1e-14);
}

TEST_CASE("resolvent of the constant kernel") {
  TimeGrid g4 = build_grid(1.0, 4);
  CHECK(max_abs(resolvent(zero_kernel(g4)).values) == 0.0);

  TimeGrid g = build_grid(1.0, 256);
  GridKernel K = discretize_kernel(KernelSpec::constant(1.0), g);
  GridKernel R = resolvent(K);
  double err = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < i; ++j) err = std::max(err, std::abs(R(i, j) - std::exp(g.time(i) - g.time(j))));
  CHECK(err <= 5e-2);
  CHECK(max_abs(R.values - K.values - star_product(K, R).values) <= 1e-10);

  // Closed form on the grid: c (1 + c dt)^{i - j - 1}.
  TimeGrid s = build_grid(1.0, 8);
  GridKernel R8 = resolvent(discretize_kernel(KernelSpec::constant(0.7), s));
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < i; ++j) CHECK(R8(i, j) == doctest::Approx(0.7 * std::pow(1 + 0.7 * s.dt, i - j - 1)));
}

TEST_CASE("mask_from") {
  TimeGrid g = build_grid(1.0, 5);
  GridKernel K = discretize_kernel(KernelSpec::exponential(1.0, 1.0), g);
  CHECK(max_abs(mask_from(K, 0).values - K.values) == 0.0);
  GridKernel last = mask_from(K, 4);
  CHECK(max_abs(last.values.leftCols(4)) == 0.0);
  CHECK(max_abs(last.values.col(4) - K.values.col(4)) == 0.0);
  CHECK(max_abs(mask_from(zero_kernel(g), 2).values) == 0.0);
}

TEST_CASE("nonnegative definiteness") {
  TimeGrid g = build_grid(1.0, 64);
  CHECK(check_nonneg_definite(zero_kernel(g), 1e-8));
  CHECK(check_nonneg_definite(discretize_kernel(KernelSpec::exponential(1.0, 1.0), g), 1e-8));
  CHECK(check_nonneg_definite(discretize_kernel(KernelSpec::power_law(1.0, 0.3), g), 1e-8));

  TimeGrid two = build_grid(1.0, 2);
  MatrixXd m = MatrixXd::Zero(2, 2);
  m(1, 0) = -5.0;
  CHECK_FALSE(check_nonneg_definite(kernel_from_matrix(two, m), 1e-8));
}

TEST_CASE("invert_id_minus") {
  TimeGrid g4 = build_grid(1.0, 4);
  IdMinusSolver id = invert_id_minus(zero_kernel(g4));
  VectorXd a(4);
  a << 1, 2, 3, 4;
  CHECK(max_abs(id(a) - a) == 0.0);
  CHECK(max_abs(id(VectorXd::Zero(4))) == 0.0);

  TimeGrid g = build_grid(1.0, 256);
  IdMinusSolver decay = invert_id_minus(discretize_kernel(KernelSpec::constant(-1.0), g));
  VectorXd h = decay(VectorXd::Ones(g.n));
  double err = 0.0;
  for (int i = 0; i < g.n; ++i) err = std::max(err, std::abs(h(i) - std::exp(-g.time(i))));
  CHECK(err <= 5e-2);
}
