#include <doctest.h>

#include <cmath>

#include "fredgame/errors.hpp"
#include "fredgame/nplayer.hpp"
#include "fredgame/oracle.hpp"
#include "helpers.hpp"

using namespace fredgame;
using testing::max_abs;

namespace {

const KernelSpec kZero = KernelSpec::zero();

GameSpec zero_game(const TimeGrid& g, int N, double lambda, const std::vector<SignalFamily>& b,
                   const SignalFamily& b0) {
  return make_game(g, N, lambda, kZero, kZero, kZero, b, b0);
}

GameSpec exp_game(const TimeGrid& g, int N, const std::vector<SignalFamily>& b, const SignalFamily& b0) {
  return make_game(g, N, 0.8, KernelSpec::exponential(0.6, 1.0), KernelSpec::exponential(1.0, 0.5),
                   KernelSpec::exponential(0.4, 2.0), b, b0);
}

}  // namespace

TEST_CASE("build_GH") {
  TimeGrid g = build_grid(1.0, 6);
  GameSpec only2 = make_game(g, 3, 1.0, kZero, KernelSpec::exponential(1.0, 1.0), kZero, {SignalFamily::constant(1)},
                             SignalFamily::constant(0));
  GameOperators o = build_GH(only2);
  CHECK(max_abs(o.G.values - only2.A2hat.values) == 0.0);
  CHECK(max_abs(o.H.values) == 0.0);

  GameSpec one = exp_game(g, 1, {SignalFamily::constant(1)}, SignalFamily::constant(0));
  GameOperators p = build_GH(one);
  CHECK(max_abs(p.G.values - (one.A1.values + 2 * one.A3.values + one.A2hat.values)) <= 1e-14);
  CHECK(max_abs(p.H.values - (one.A1.values + one.A3.values)) <= 1e-14);

  GameSpec four = exp_game(g, 4, {SignalFamily::constant(1)}, SignalFamily::constant(0));
  GameOperators q = build_GH(four);
  CHECK(max_abs(q.G.values - q.H.values / 4 - (four.A2hat.values + four.A3.values / 4)) <= 1e-14);
}

TEST_CASE("admissibility") {
  TimeGrid g = build_grid(1.0, 8);
  GameSpec s = exp_game(g, 2, {SignalFamily::constant(1)}, SignalFamily::constant(0));
  CHECK_NOTHROW(validate_game(s));
  CHECK(symmetric_cross(s));
  GameSpec neg = s;
  neg.A2hat = (-3.0) * neg.A2hat;
  CHECK_THROWS_AS(validate_game(neg), Error);
  GameSpec lam = s;
  lam.lambda = 0.0;
  CHECK_THROWS_AS(validate_game(lam), Error);
}

TEST_CASE("zero kernels decouple the players") {
  TimeGrid g = build_grid(1.0, 8);
  std::vector<SignalFamily> b = {SignalFamily::affine(1.0, 2.0), SignalFamily::martingale(0.5, "idiosyncratic", 1.0),
                                 SignalFamily::constant(-1.0)};
  SignalFamily b0 = SignalFamily::ou(1.0, 0.3, 0.4, "common");
  GameSpec s = zero_game(g, 3, 1.5, b, b0);
  NoiseBundle bundle(g, 3, game_sources(s), 4);
  NashSolution sol = solve_nash(s, bundle);
  for (int p = 0; p < bundle.paths(); ++p) {
    auto dW = bundle.lookup(p);
    VectorXd b0v = realize(s.b0[0], g.n, dW).values;
    VectorXd bbar = VectorXd::Zero(g.n);
    for (int i = 0; i < 3; ++i) {
      VectorXd bi = realize(s.b[i], g.n, dW).values;
      bbar += bi / 3;
      CHECK(max_abs(sol.u[p][i] - (bi + b0v / 3) / 3.0) <= 1e-14);
    }
    CHECK(max_abs(sol.ubar[p] - (bbar + b0v / 3) / 3.0) <= 1e-14);
  }
  CHECK(sol.max_foc <= 1e-14);
}

TEST_CASE("symmetric players share the mean strategy") {
  TimeGrid g = build_grid(1.0, 10);
  SignalFamily common = SignalFamily::martingale(0.7, "common", 1.0);
  GameSpec s = exp_game(g, 2, {common, common}, SignalFamily::constant(0.3));
  NoiseBundle bundle(g, 4, game_sources(s), 6);
  NashSolution sol = solve_nash(s, bundle);
  for (int p = 0; p < bundle.paths(); ++p)
    for (int i = 0; i < 2; ++i) CHECK(max_abs(sol.u[p][i] - sol.ubar[p]) <= 1e-8);

  GameSpec single = exp_game(g, 1, {SignalFamily::ou(1.0, 0.5, 1.0, "common")}, SignalFamily::constant(0.2));
  NashSolution one = solve_nash(single, bundle);
  for (int p = 0; p < bundle.paths(); ++p) CHECK(max_abs(one.u[p][0] - one.ubar[p]) <= 1e-10);
}

TEST_CASE("solver matches the tree oracle") {
  TimeGrid g = build_grid(1.0, 6);
  GameSpec two = exp_game(g, 2, {SignalFamily::ou(0.5, 0.7, 1.0, "idiosyncratic")}, SignalFamily::constant(0.3));
  ScenarioTree t2 = build_tree(two, 2);
  CHECK(compare(discrete_nash_kkt(two, t2), two, t2) <= 1e-8);

  GameSpec three = exp_game(g, 3,
                            {SignalFamily::constant(1.0), SignalFamily::affine(-0.5, 2.0),
                             SignalFamily::deterministic(VectorXd::LinSpaced(6, 0.0, 1.0))},
                            SignalFamily::constant(0.0));
  ScenarioTree t3 = build_tree(three, 2);
  CHECK(compare(discrete_nash_kkt(three, t3), three, t3) <= 1e-8);
}

TEST_CASE("mean consistency and first order conditions") {
  TimeGrid g = build_grid(1.0, 32);
  std::vector<SignalFamily> b;
  for (int i = 0; i < 5; ++i)
    b.push_back(SignalFamily::combination({{1.0, SignalFamily::martingale(0.3 + 0.1 * i, "idiosyncratic", i)},
                                           {0.5, SignalFamily::ou(1.0, 0.4, 0.0, "common")}}));
  GameSpec s = make_game(g, 5, 0.6, KernelSpec::constant(0.5), KernelSpec::power_law(1.0, 0.3),
                         KernelSpec::exponential(0.7, 1.0), b, SignalFamily::martingale(0.2, "common"));
  NoiseBundle bundle(g, 20, game_sources(s), 12);
  NashSolution sol = solve_nash(s, bundle);
  CHECK(sol.max_mean_gap <= 1e-8);
  CHECK(sol.max_foc <= 1e-8);
  CHECK(sol.mean_condition >= 1.0);

  NashOptions strict;
  strict.consistency_tol = 0.0;
  strict.residuals = false;
  CHECK_NOTHROW(solve_nash(s, bundle, {1e-8, false, 2}));
}

TEST_CASE("perturbed strategies violate the first order condition") {
  TimeGrid g = build_grid(1.0, 16);
  GameSpec s = exp_game(g, 2, {SignalFamily::constant(1.0), SignalFamily::affine(0.0, 1.0)}, SignalFamily::constant(0));
  NashSolver solver(s);
  PathNash path = solver.solve_path(testing::no_noise(), true);
  SignalPath b1 = deterministic_path(s.b[0].mean, g.n);
  SignalPath b01 = deterministic_path(s.b0[0].mean, g.n);
  MatrixXd ubar_surface = path.ubar.transpose().replicate(g.n, 1);
  auto surface = [&](const VectorXd& u) { return MatrixXd(u.transpose().replicate(g.n, 1)); };
  CHECK(solver.foc_residual(0, path.u[0], surface(path.u[0]), ubar_surface, b1, b01) <= 1e-8);
  VectorXd bumped = path.u[0];
  bumped(0) += 0.1;
  double r = solver.foc_residual(0, bumped, surface(bumped), ubar_surface, b1, b01);
  CHECK(r >= 0.1 * 2 * s.lambda - 0.1 * g.dt * 4);
}

TEST_CASE("objective values") {
  TimeGrid g = build_grid(1.0, 8);
  VectorXd bv = VectorXd::LinSpaced(8, 1.0, 2.0);
  GameSpec s = make_game(g, 1, 0.7, kZero, kZero, kZero, {SignalFamily::deterministic(bv)},
                         SignalFamily::constant(0.0), {0.25});
  NoiseBundle bundle(g, 1, {}, 1);
  Estimate zero = objective(s, 0, [&](int) { return std::vector<VectorXd>{VectorXd::Zero(8)}; }, bundle);
  CHECK(zero.mean == doctest::Approx(0.25));
  Estimate opt = objective(s, 0, [&](int) { return std::vector<VectorXd>{bv / (2 * 0.7)}; }, bundle);
  CHECK(opt.mean == doctest::Approx(g.dt * bv.squaredNorm() / (4 * 0.7) + 0.25).epsilon(1e-13));
}

TEST_CASE("equilibrium beats unilateral perturbations") {
  TimeGrid g = build_grid(1.0, 8);
  GameSpec s = exp_game(g, 3,
                        {SignalFamily::martingale(0.5, "idiosyncratic", 1.0), SignalFamily::constant(0.5),
                         SignalFamily::ou(1.0, 0.3, -1.0, "common")},
                        SignalFamily::martingale(0.2, "common"));
  NoiseBundle bundle(g, 400, game_sources(s), 21);
  NashSolution sol = solve_nash(s, bundle);
  StrategyProfile eq = [&](int p) { return sol.u[p]; };
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> size(0.01, 1.0);
  for (int r = 0; r < 20; ++r) {
    int i = r % 3;
    VectorXd h = size(rng) * testing::random_vector(rng, g.n);
    StrategyProfile pert = [&](int p) {
      auto u = sol.u[p];
      u[i] += h;
      return u;
    };
    Estimate a = objective(s, i, eq, bundle), b = objective(s, i, pert, bundle);
    CHECK(a.mean >= b.mean - 3 * std::hypot(a.std_error, b.std_error));
  }
}

TEST_CASE("concavity") {
  TimeGrid g = build_grid(1.0, 8);
  NoiseBundle bundle(g, 1, {}, 1);
  GameSpec z = zero_game(g, 2, 0.9, {SignalFamily::constant(1.0)}, SignalFamily::constant(0.5));
  StrategyProfile base = [&](int) { return std::vector<VectorXd>(2, VectorXd::Ones(g.n)); };
  VectorXd h = VectorXd::LinSpaced(g.n, -1.0, 1.0);
  ConcavityResult c = concavity_check(z, 0, base, h, bundle, 1e-2);
  CHECK(c.second_difference == doctest::Approx(-2 * 0.9 * g.dt * h.squaredNorm() * 1e-4).epsilon(1e-6));
  CHECK(c.pass);
  CHECK_THROWS_AS(concavity_check(z, 0, base, VectorXd::Zero(g.n), bundle), Error);

  GameSpec s = exp_game(g, 2, {SignalFamily::constant(1.0)}, SignalFamily::constant(0.0));
  std::mt19937_64 rng(2);
  for (int r = 0; r < 50; ++r) CHECK(concavity_check(s, r % 2, base, testing::random_vector(rng, g.n), bundle).pass);
}
