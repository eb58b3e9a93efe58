#include "fredgame/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "fredgame/errors.hpp"
#include "fredgame/parallel.hpp"

namespace fredgame {

namespace {

FredholmSolver map_solver(const GridKernel& K, double lambda) {
  return FredholmSolver(K, K, 2.0 * lambda, FredholmOptions{});
}

// d - scale * E_{t_k}[C y] with y given by its conditional surface.
SignalPath minus_conditional(SignalPath d, const MatrixXd& C, const MatrixXd& y_surface, double dt, double scale) {
  const int n = static_cast<int>(d.values.size());
  MatrixXd part = (scale * dt) * y_surface * C.transpose();
  for (int k = 0; k < n; ++k) d.values(k) -= part(k, k);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) d.surface(k, j) = j < k ? d.values(j) : d.surface(k, j) - part(k, j);
  return d;
}

// E_{t_k}[(Low + Up^*) x]_k, with surface rows holding realized values for r <= k.
VectorXd conditional_apply(const MatrixXd& m, const MatrixXd& surface) {
  return m.cwiseProduct(surface).rowwise().sum();
}

MatrixXd with_realized(MatrixXd surface, const VectorXd& x) {
  for (int k = 0; k < surface.rows(); ++k) surface.row(k).head(k + 1) = x.head(k + 1).transpose();
  return surface;
}

bool has_tag(const Signal& s, const std::string& tag) {
  auto it = s.weights.find(tag);
  return it != s.weights.end() && it->second.cwiseAbs().maxCoeff() > 0.0;
}

Signal drop_noise(const Signal& s) { return deterministic_signal(s.mean); }

}  // namespace

MFGSpec make_mfg(const TimeGrid& grid, double lambda, const KernelSpec& A1, const KernelSpec& A2hat,
                 const KernelSpec& A3, const SignalFamily& beta, const SignalFamily& beta0, const SignalFamily& b0,
                 double spread) {
  MFGSpec s;
  s.grid = grid;
  s.lambda = lambda;
  s.A1 = discretize_kernel(A1, grid);
  s.A2hat = discretize_kernel(A2hat, grid);
  s.A3 = discretize_kernel(A3, grid);
  s.beta = beta;
  s.beta0 = beta0;
  s.b0 = b0;
  s.spread = spread;
  s.h_model = lower_signal(beta, grid, 1).deterministic() ? "zero" : "inverse";
  return s;
}

void validate_mfg(const MFGSpec& spec, double tol) {
  if (!(spec.lambda > 0.0)) throw Error(ErrorKind::InadmissibleKernel, "lambda must be positive");
  const char* names[] = {"A1", "A2hat", "A3"};
  const GridKernel* ks[] = {&spec.A1, &spec.A2hat, &spec.A3};
  for (int i = 0; i < 3; ++i) {
    if (!ks[i]->grid.same_as(spec.grid)) throw Error(ErrorKind::ShapeError, "kernel grid differs from game grid");
    if (!check_nonneg_definite(*ks[i], tol))
      throw Error(ErrorKind::InadmissibleKernel, std::string(names[i]) + " is not nonnegative definite");
  }
  Signal beta = lower_signal(spec.beta, spec.grid, 1);
  if (has_tag(beta, "common")) throw Error(ErrorKind::UnsupportedSignal, "beta must not load on common noise");
  Signal beta0 = lower_signal(spec.beta0, spec.grid, 1);
  for (const auto& [tag, w] : beta0.weights)
    if (tag != "common" && w.cwiseAbs().maxCoeff() > 0.0)
      throw Error(ErrorKind::UnsupportedSignal, "beta0 must load on common noise only");
  if (spec.h_model != "zero" && spec.h_model != "inverse")
    throw Error(ErrorKind::ConfigError, "h_model must be zero or inverse");
}

Signal player_signal(const MFGSpec& spec, int player) {
  Signal b = lower_signal(spec.beta, spec.grid, player) + lower_signal(spec.beta0, spec.grid, player);
  double offset = player % 2 == 1 ? spec.spread : -spec.spread;
  b.mean.array() += offset;
  return b;
}

Signal limit_signal(const MFGSpec& spec) {
  return drop_noise(lower_signal(spec.beta, spec.grid, 1)) + lower_signal(spec.beta0, spec.grid, 1);
}

GameSpec induced_game(const MFGSpec& spec, int N) {
  GameSpec g;
  g.grid = spec.grid;
  g.N = N;
  g.lambda = spec.lambda;
  g.A1 = spec.A1;
  g.A2hat = spec.A2hat;
  g.A3 = spec.A3;
  g.A4 = spec.A3;
  for (int i = 1; i <= N; ++i) {
    g.b.push_back(player_signal(spec, i));
    g.b0.push_back(lower_signal(spec.b0, spec.grid, i));
  }
  g.c.assign(N, 0.0);
  return g;
}

MFGSolver::MFGSolver(const MFGSpec& spec)
    : spec_(spec), F_(map_solver(spec.A2hat, spec.lambda)), G_(map_solver(spec.A2hat + spec.A3, spec.lambda)) {
  validate_mfg(spec_);
  coupling_ = spec_.A3.values + spec_.A3.values.transpose();
}

SignalPath MFGSolver::mean_adjusted(const SignalPath& x, const VectorXd& mu, const MatrixXd& mu_surface) const {
  return minus_conditional(x, coupling_, with_realized(mu_surface, mu), spec_.grid.dt, 1.0);
}

MFGPath MFGSolver::solve_path(const IncrementLookup& dW, int players, bool residuals) const {
  const int n = spec_.grid.n;
  const double dt = spec_.grid.dt;
  MFGPath out;
  SignalPath x = realize(limit_signal(spec_), n, dW);
  out.mu = G_.solve(x).v;
  out.mu_surface = G_.conditional_solution(x, out.mu);
  const MatrixXd& A2 = spec_.A2hat.values;
  if (residuals) {
    MatrixXd S = A2 + spec_.A3.values;
    VectorXd r = 2.0 * spec_.lambda * out.mu + dt * conditional_apply(S + S.transpose(), out.mu_surface) - x.values;
    out.foc_mu = r.cwiseAbs().maxCoeff();
  }
  for (int i = 1; i <= players; ++i) {
    SignalPath b = realize(player_signal(spec_, i), n, dW);
    SignalPath d = mean_adjusted(b, out.mu, out.mu_surface);
    out.v.push_back(F_.solve(d).v);
    if (residuals) {
      MatrixXd sv = F_.conditional_solution(d, out.v.back());
      VectorXd r = 2.0 * spec_.lambda * out.v.back() + dt * conditional_apply(A2 + A2.transpose(), sv) +
                   dt * conditional_apply(coupling_, out.mu_surface) - b.values;
      out.foc_v = std::max(out.foc_v, r.cwiseAbs().maxCoeff());
    }
  }
  return out;
}

namespace {

MFGSolution solve_players(const MFGSpec& spec, int players, const NoiseBundle& bundle, int threads) {
  MFGSolver solver(spec);
  const int M = bundle.paths();
  MFGSolution sol;
  sol.mu.resize(M);
  sol.v.resize(M);
  std::vector<double> fm(M), fv(M);
  parallel_for(M, threads, [&](int p) {
    MFGPath r = solver.solve_path(bundle.lookup(p), players, true);
    sol.mu[p] = std::move(r.mu);
    sol.v[p] = std::move(r.v);
    fm[p] = r.foc_mu;
    fv[p] = r.foc_v;
  });
  for (int p = 0; p < M; ++p) {
    sol.max_foc_mu = std::max(sol.max_foc_mu, fm[p]);
    sol.max_foc_v = std::max(sol.max_foc_v, fv[p]);
  }
  if (bundle.common_groups() > 0) sol.consistency = consistency_check(sol, bundle);
  return sol;
}

}  // namespace

MFGSolution solve_generic(const MFGSpec& spec, const NoiseBundle& bundle, int threads) {
  return solve_players(spec, 1, bundle, threads);
}

MFGSolution solve_infinite(const MFGSpec& spec, int N_view, const NoiseBundle& bundle, int threads) {
  if (N_view < 1) throw Error(ErrorKind::ConfigError, "need at least one viewed player");
  return solve_players(spec, N_view, bundle, threads);
}

ConsistencyReport consistency_check(const MFGSolution& sol, const NoiseBundle& bundle, double bands) {
  const int groups = bundle.common_groups();
  const int M = bundle.paths();
  if (groups < 2 || M % groups != 0)
    throw Error(ErrorKind::ConfigError, "consistency check needs at least two equal common-noise groups");
  const int size = M / groups;
  const int n = static_cast<int>(sol.mu.front().size());
  MatrixXd d(groups, n);
  for (int g = 0; g < groups; ++g) {
    VectorXd avg = VectorXd::Zero(n);
    const VectorXd& mu = sol.mu[g * size];
    for (int p = g * size; p < (g + 1) * size; ++p) {
      if (sol.mu[p] != mu)
        throw Error(ErrorKind::ConsistencyViolation, "mean-field strategy differs across paths with shared common noise");
      avg += sol.v[p].front();
    }
    d.row(g) = (avg / size - mu).transpose();
  }
  ConsistencyReport r;
  r.gap = d.colwise().mean().transpose();
  r.std_error = VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    double var = (d.col(k).array() - r.gap(k)).square().sum() / (groups - 1);
    r.std_error(k) = std::sqrt(var / groups);
  }
  r.max_abs_gap = r.gap.cwiseAbs().maxCoeff();
  r.pass = true;
  for (int k = 0; k < n; ++k) {
    double g = std::abs(r.gap(k));
    double se = r.std_error(k);
    if (se > 0.0) r.max_ratio = std::max(r.max_ratio, g / se);
    if (g > bands * se + 1e-12) r.pass = false;
  }
  return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / m;
    my += ly[i] / m;
  }
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

ConvergenceStudy convergence_study(const MFGSpec& spec, const std::vector<int>& Ns, const NoiseBundle& bundle,
                                   int threads) {
  const int n = spec.grid.n;
  const int M = bundle.paths();
  const int K = static_cast<int>(Ns.size());
  MFGSolver mfg(spec);
  std::vector<std::unique_ptr<NashSolver>> games;
  for (int N : Ns) games.push_back(std::make_unique<NashSolver>(induced_game(spec, N), NashOptions{}));
  // Per path and N, squared errors; summed in path order so threads do not change the result.
  std::vector<MatrixXd> err_mean(M), err_player(M);
  parallel_for(M, threads, [&](int p) {
    auto dW = bundle.lookup(p);
    MFGPath lim = mfg.solve_path(dW, 1, false);
    err_mean[p].resize(K, n);
    err_player[p].resize(K, n);
    for (int q = 0; q < K; ++q) {
      const NashSolver& game = *games[q];
      const GameSpec& g = game.spec();
      std::vector<SignalPath> b, b0;
      for (int i = 0; i < g.N; ++i) {
        b.push_back(realize(g.b[i], n, dW));
        b0.push_back(realize(g.b0[i], n, dW));
      }
      SignalPath f = game.mean_driver(b, b0);
      VectorXd ubar = game.solve_mean(f).v;
      MatrixXd surf = game.mean_solver().conditional_solution(f, ubar);
      VectorXd u1 = game.solve_player(game.mean_conditional_drive(b[0], b0[0], ubar, surf));
      err_mean[p].row(q) = (ubar - lim.mu).cwiseAbs2().transpose();
      err_player[p].row(q) = (u1 - lim.v[0]).cwiseAbs2().transpose();
    }
  });
  MatrixXd sm = MatrixXd::Zero(K, n), sp = MatrixXd::Zero(K, n);
  for (int p = 0; p < M; ++p) {
    sm += err_mean[p];
    sp += err_player[p];
  }
  ConvergenceStudy out;
  std::vector<double> xs, ym, yp;
  for (int q = 0; q < K; ++q) {
    ConvergenceRow r;
    r.N = Ns[q];
    r.mse_mean = sm.row(q).maxCoeff() / M;
    r.mse_player = sp.row(q).maxCoeff() / M;
    out.rows.push_back(r);
    xs.push_back(r.N);
    ym.push_back(r.mse_mean);
    yp.push_back(r.mse_player);
  }
  out.slope_mean = loglog_slope(xs, ym);
  out.slope_player = loglog_slope(xs, yp);
  return out;
}

EpsNashRow eps_nash_gap(const MFGSpec& spec, int N, const std::optional<VectorXd>& deviation,
                        const NoiseBundle& bundle, int threads) {
  const int n = spec.grid.n;
  const double dt = spec.grid.dt;
  const int M = bundle.paths();
  if (N < 2) throw Error(ErrorKind::ConfigError, "epsilon-Nash needs at least two players");
  if (deviation && deviation->size() != n) throw Error(ErrorKind::ShapeError, "deviation length must match the grid");
  MFGSolver mfg(spec);
  GameSpec game = induced_game(spec, N);
  GameOperators ops = build_GH(game);
  FredholmSolver best(ops.G, ops.G, 2.0 * spec.lambda, FredholmOptions{});
  MatrixXd coupling = ops.H.values + ops.H_back.values.transpose();
  std::vector<double> gains(M);
  parallel_for(M, threads, [&](int p) {
    auto dW = bundle.lookup(p);
    MFGPath lim = mfg.solve_path(dW, N, false);
    VectorXd bi = realize(game.b[0], n, dW).values;
    VectorXd b0i = realize(game.b0[0], n, dW).values;
    VectorXd u;
    if (deviation) {
      u = *deviation;
    } else {
      // Others play v^j = F(d_j); their sum is F of the summed drivers by linearity.
      std::vector<SignalPath> drives;
      for (int j = 2; j <= N; ++j)
        drives.push_back(mfg.mean_adjusted(realize(game.b[j - 1], n, dW), lim.mu, lim.mu_surface));
      std::vector<std::pair<double, const SignalPath*>> terms;
      for (const auto& d : drives) terms.emplace_back(1.0, &d);
      SignalPath sdrive = combine(terms);
      VectorXd S = mfg.F().solve(sdrive).v;
      MatrixXd Ssurf = mfg.F().conditional_solution(sdrive, S);
      SignalPath b = realize(game.b[0], n, dW);
      SignalPath b0 = realize(game.b0[0], n, dW);
      SignalPath d = minus_conditional(combine({{1.0, &b}, {1.0 / N, &b0}}), coupling, Ssurf, dt, 1.0 / N);
      u = best.solve(d).v;
    }
    std::vector<VectorXd> profile = lim.v;
    double J_eq = objective_path(game, 0, profile, bi, b0i);
    profile[0] = u;
    gains[p] = objective_path(game, 0, profile, bi, b0i) - J_eq;
  });
  double sum = 0.0, sum2 = 0.0;
  for (double g : gains) {
    sum += g;
    sum2 += g * g;
  }
  EpsNashRow r;
  r.N = N;
  r.gain = sum / M;
  r.std_error = M > 1 ? std::sqrt(std::max(0.0, sum2 / M - r.gain * r.gain) / (M - 1)) : 0.0;
  return r;
}

EpsNashStudy eps_nash_study(const MFGSpec& spec, const std::vector<int>& Ns, const std::optional<VectorXd>& deviation,
                            const NoiseBundle& bundle, int threads) {
  EpsNashStudy out;
  std::vector<double> xs, ys;
  for (int N : Ns) {
    out.rows.push_back(eps_nash_gap(spec, N, deviation, bundle, threads));
    xs.push_back(N);
    ys.push_back(std::max(0.0, out.rows.back().gain));
  }
  out.slope = loglog_slope(xs, ys);
  return out;
}

}  // namespace fredgame
