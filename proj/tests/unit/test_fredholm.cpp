#include <doctest.h>

#include <cmath>

#include "fredgame/errors.hpp"
#include "fredgame/fredholm.hpp"
#include "helpers.hpp"

using namespace fredgame;
using testing::max_abs;

namespace {

GridKernel K_of(const KernelSpec& s, const TimeGrid& g) { return discretize_kernel(s, g); }

// lambda v + dt (K + L^T) v = f for deterministic f, solved as one dense system.
VectorXd dense_solution(const GridKernel& K, const GridKernel& L, double lambda, const VectorXd& f) {
  const int n = K.size();
  MatrixXd M = lambda * MatrixXd::Identity(n, n) + K.grid.dt * (K.values + L.values.transpose());
  return M.partialPivLu().solve(f);
}

GridKernel random_kernel(std::mt19937_64& rng, const TimeGrid& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (static_cast<int>(u(rng) * 3)) {
    case 0:
      return K_of(KernelSpec::exponential(0.2 + 2 * u(rng), 3 * u(rng)), g);
    case 1:
      return K_of(KernelSpec::power_law(0.2 + u(rng), 0.45 * u(rng)), g);
    default:
      return K_of(KernelSpec::constant(0.2 + 2 * u(rng)), g);
  }
}

}  // namespace

TEST_CASE("zero kernels divide by lambda") {
  TimeGrid g = build_grid(1.0, 6);
  NoiseBundle b(g, 1, {"common"}, 4);
  FredholmSolver s(zero_kernel(g), zero_kernel(g), 2.0);
  SignalPath f = simulate(SignalFamily::martingale(1.0, "common", 0.5), g, b, 0);
  FredholmSolution sol = s.solve(f);
  CHECK(max_abs(sol.v - f.values / 2.0) <= 1e-15);
  MatrixXd surf = s.conditional_solution(f, sol.v);
  CHECK(max_abs(surf - f.surface / 2.0) <= 1e-15);
  CHECK(s.residual(f, sol.v, surf) == 0.0);
  CHECK(max_abs(s.B()) == 0.0);
  for (int k = 0; k < g.n; ++k) CHECK(max_abs(s.dt_block(k) - 2.0 * MatrixXd::Identity(g.n - k, g.n - k)) == 0.0);
  CHECK(max_abs(s.assemble_a(deterministic_path(VectorXd::Zero(g.n), g.n))) == 0.0);
}

TEST_CASE("B without backward kernel") {
  TimeGrid g = build_grid(1.0, 8);
  GridKernel K = K_of(KernelSpec::exponential(1.3, 0.4), g);
  FredholmSolver s(K, zero_kernel(g), 1.7, {false});
  for (int k = 0; k < g.n; ++k)
    for (int j = 0; j < k; ++j) CHECK(s.B()(k, j) == doctest::Approx(-K(k, j) / 1.7));
  VectorXd f = VectorXd::LinSpaced(g.n, 1.0, 2.0);
  CHECK(max_abs(s.assemble_a(deterministic_path(f, g.n)) - f / 1.7) <= 1e-15);
}

TEST_CASE("B and a match a naive evaluation") {
  TimeGrid g = build_grid(1.0, 8);
  GridKernel K = K_of(KernelSpec::constant(0.9), g);
  FredholmSolver s(K, K, 1.0);
  VectorXd f(g.n);
  for (int k = 0; k < g.n; ++k) f(k) = std::cos(3.0 * g.time(k));
  VectorXd a = s.assemble_a(deterministic_path(f, g.n));
  const double dt = g.dt;
  for (int k = 0; k < g.n; ++k) {
    const int m = g.n - k;
    MatrixXd D(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) D(r, c) = (r == c ? 1.0 : 0.0) + dt * (K(k + r, k + c) + K(k + c, k + r));
    MatrixXd Dinv = D.inverse();
    for (int j = 0; j < k; ++j) {
      double b = 0.0;
      for (int r = 0; r < m; ++r) b -= Dinv(0, r) * K(k + r, j);
      CHECK(std::abs(s.B()(k, j) - b) <= 1e-12);
    }
    double ak = 0.0;
    for (int r = 0; r < m; ++r) ak += Dinv(0, r) * f(k + r);
    CHECK(std::abs(a(k) - ak) <= 1e-12);
  }
}

TEST_CASE("deterministic drivers agree with the dense system") {
  std::mt19937_64 rng(11);
  TimeGrid g = build_grid(2.0, 20);
  for (int trial = 0; trial < 10; ++trial) {
    GridKernel K = random_kernel(rng, g);
    FredholmSolver s(K, K, 0.5 + trial * 0.1);
    VectorXd f = testing::random_vector(rng, g.n);
    SignalPath p = deterministic_path(f, g.n);
    FredholmSolution sol = s.solve(p);
    CHECK(max_abs(sol.v - dense_solution(K, K, 0.5 + trial * 0.1, f)) <= 1e-12);
    MatrixXd surf = s.conditional_solution(p, sol.v);
    CHECK(max_abs(surf.rowwise() - sol.v.transpose()) <= 1e-12);
  }
}

TEST_CASE("constant kernel solutions") {
  const double c = 1.0;
  TimeGrid g = build_grid(1.0, 256);
  GridKernel C = K_of(KernelSpec::constant(c), g);
  SignalPath one = deterministic_path(VectorXd::Ones(g.n), g.n);

  VectorXd v = FredholmSolver(C, zero_kernel(g), 1.0, {false}).solve(one).v;
  double err = 0.0;
  for (int k = 0; k < g.n; ++k) {
    CHECK(v(k) == doctest::Approx(std::pow(1 - c * g.dt, k)).epsilon(1e-10));
    err = std::max(err, std::abs(v(k) - std::exp(-c * g.time(k))));
  }
  CHECK(err <= 5e-2);

  VectorXd w = FredholmSolver(C, C, 1.0).solve(one).v;
  for (int k = 0; k < g.n; ++k) {
    CHECK(w(k) == doctest::Approx(1.0 / (1.0 + c * (1.0 - g.dt))).epsilon(1e-10));
    CHECK(std::abs(w(k) - 1.0 / (1.0 + c)) <= 5e-2);
  }
}

TEST_CASE("hand solved small system") {
  // n = 2, dt = 1/2, K = L = ConstantLower(1), lambda = 1, f = (1, 2):
  // v0 + v1/2 = 1 and v0/2 + v1 = 2 give v = (0, 2).
  TimeGrid g = build_grid(1.0, 2);
  GridKernel K = K_of(KernelSpec::constant(1.0), g);
  FredholmSolver s(K, K, 1.0);
  VectorXd f(2);
  f << 1.0, 2.0;
  SignalPath p = deterministic_path(f, 2);
  VectorXd v = s.solve(p).v;
  CHECK(std::abs(v(0)) <= 1e-15);
  CHECK(std::abs(v(1) - 2.0) <= 1e-15);
  CHECK(s.residual(p, v, s.conditional_solution(p, v)) <= 1e-12);
}

TEST_CASE("stochastic drivers satisfy the discrete equation") {
  std::mt19937_64 rng(5);
  TimeGrid g = build_grid(1.0, 64);
  NoiseBundle b(g, 3, {"common", "idio/1"}, 9);
  SignalFamily f = SignalFamily::combination({{1.0, SignalFamily::ou(1.0, 0.7, 0.2, "common")},
                                              {0.5, SignalFamily::martingale(1.0, "idiosyncratic", 1.0)}});
  for (int trial = 0; trial < 10; ++trial) {
    GridKernel K = random_kernel(rng, g);
    GridKernel L = random_kernel(rng, g);
    // K + L^T is symmetric when K = L; otherwise the closed form still holds.
    FredholmSolver s(K, trial % 2 ? L : K, 1.0, {false});
    for (int p = 0; p < b.paths(); ++p) {
      SignalPath path = simulate(f, g, b, p);
      VectorXd v = s.solve(path).v;
      MatrixXd surf = s.conditional_solution(path, v);
      CHECK(s.residual(path, v, surf) <= 1e-9);
      for (int k = 0; k < g.n; ++k) CHECK(std::abs(surf(k, k) - v(k)) <= 1e-12);
    }
  }
}

TEST_CASE("masking does not worsen conditioning") {
  std::mt19937_64 rng(8);
  TimeGrid g = build_grid(1.0, 32);
  for (int trial = 0; trial < 5; ++trial) {
    GridKernel K = random_kernel(rng, g);
    FredholmSolver s(K, K, 1.0);
    auto cond = [](const MatrixXd& m) {
      Eigen::JacobiSVD<MatrixXd> svd(m);
      return svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    };
    double c0 = cond(s.dt_block(0));
    for (int k = 1; k < g.n; ++k) CHECK(cond(s.dt_block(k)) <= c0 + 1.0);
  }
}

TEST_CASE("asymmetric pair is rejected in strict mode") {
  TimeGrid g = build_grid(1.0, 6);
  GridKernel K = K_of(KernelSpec::constant(1.0), g);
  CHECK_THROWS_AS(FredholmSolver(K, zero_kernel(g), 1.0), Error);
  FredholmSolver relaxed(K, zero_kernel(g), 1.0, {false});
  CHECK_FALSE(relaxed.self_adjoint());
  CHECK_FALSE(relaxed.warning().empty());
  CHECK_THROWS_AS(FredholmSolver(K, K, 0.0), Error);
}

TEST_CASE("stability gap") {
  TimeGrid g = build_grid(1.0, 16);
  NoiseBundle b(g, 200, {"common", "aux"}, 2);
  GridKernel K = K_of(KernelSpec::exponential(1.0, 1.0), g);
  GridKernel C = K_of(KernelSpec::constant(1.0), g);
  Signal f = lower_signal(SignalFamily::ou(1.0, 0.5, 1.0, "common"), g);
  Signal aux = lower_signal(SignalFamily::martingale(1.0, "aux"), g);
  FredholmProblem base{K, K, 1.0, {}};
  CHECK(stability_gap(base, f, base, f, b) <= 1e-20);

  std::vector<double> Ns, kernel_gap, driver_gap;
  for (int N : {4, 8, 16, 32, 64}) {
    FredholmProblem pert{K + (1.0 / N) * C, K + (1.0 / N) * C, 1.0, {}};
    Ns.push_back(N);
    kernel_gap.push_back(stability_gap(pert, f, base, f, b));
    driver_gap.push_back(stability_gap(base, f + (1.0 / std::sqrt(N)) * aux, base, f, b));
  }
  auto slope = [&](const std::vector<double>& y) {
    double mx = 0, my = 0, sxy = 0, sxx = 0;
    for (size_t i = 0; i < y.size(); ++i) mx += std::log(Ns[i]) / y.size(), my += std::log(y[i]) / y.size();
    for (size_t i = 0; i < y.size(); ++i)
      sxy += (std::log(Ns[i]) - mx) * (std::log(y[i]) - my), sxx += std::pow(std::log(Ns[i]) - mx, 2);
    return sxy / sxx;
  };
  CHECK(slope(kernel_gap) >= -2.4);
  CHECK(slope(kernel_gap) <= -1.6);
  CHECK(slope(driver_gap) >= -1.4);
  CHECK(slope(driver_gap) <= -0.6);
}
