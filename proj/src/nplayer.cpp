#include "fredgame/nplayer.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "fredgame/errors.hpp"
#include "fredgame/parallel.hpp"

namespace fredgame {

namespace {

void require_n_points(const Signal& s, int n, const char* what) {
  if (s.size() != n) throw Error(ErrorKind::ShapeError, std::string(what) + " must have one value per grid point");
}

// E_{t_k}[(Low + Up^*) x]_k for every k, given rows holding realized values for r <= k.
VectorXd conditional_apply(const MatrixXd& low_plus_up_t, const MatrixXd& surface) {
  return (low_plus_up_t.cwiseProduct(surface)).rowwise().sum();
}

}  // namespace

GameSpec make_game(const TimeGrid& grid, int N, double lambda, const KernelSpec& A1, const KernelSpec& A2hat,
                   const KernelSpec& A3, const std::vector<SignalFamily>& b, const SignalFamily& b0,
                   const std::vector<double>& c) {
  if (N < 1) throw Error(ErrorKind::ConfigError, "player count must be >= 1");
  if (b.size() != 1 && static_cast<int>(b.size()) != N)
    throw Error(ErrorKind::ConfigError, "need one b signal or one per player");
  GameSpec s;
  s.grid = grid;
  s.N = N;
  s.lambda = lambda;
  s.A1 = discretize_kernel(A1, grid);
  s.A2hat = discretize_kernel(A2hat, grid);
  s.A3 = discretize_kernel(A3, grid);
  s.A4 = s.A3;
  for (int i = 0; i < N; ++i) {
    s.b.push_back(lower_signal(b.size() == 1 ? b[0] : b[i], grid, i + 1));
    s.b0.push_back(lower_signal(b0, grid, i + 1));
  }
  s.c = c.empty() ? std::vector<double>(N, 0.0) : c;
  if (static_cast<int>(s.c.size()) != N) throw Error(ErrorKind::ConfigError, "need one constant per player");
  return s;
}

bool symmetric_cross(const GameSpec& spec) { return spec.A3.values == spec.A4.values; }

void validate_game(const GameSpec& spec, double tol) {
  const int n = spec.grid.n;
  if (spec.N < 1) throw Error(ErrorKind::ConfigError, "player count must be >= 1");
  if (!(spec.lambda > 0.0)) throw Error(ErrorKind::InadmissibleKernel, "lambda must be positive");
  if (static_cast<int>(spec.b.size()) != spec.N || static_cast<int>(spec.b0.size()) != spec.N ||
      static_cast<int>(spec.c.size()) != spec.N)
    throw Error(ErrorKind::ShapeError, "per-player data does not match N");
  for (const GridKernel* k : {&spec.A1, &spec.A2hat, &spec.A3, &spec.A4}) {
    if (!k->grid.same_as(spec.grid)) throw Error(ErrorKind::ShapeError, "kernel grid differs from game grid");
    if (!is_lower(k->values)) throw Error(ErrorKind::InadmissibleKernel, "game kernels must be lower triangular");
  }
  for (int i = 0; i < spec.N; ++i) {
    require_n_points(spec.b[i], n, "b");
    require_n_points(spec.b0[i], n, "b0");
  }
  if (spec.reduced) {
    // The reduced kernels are exact discrete operators: lambda id + A2hat must be nonnegative.
    MatrixXd q = spec.lambda * MatrixXd::Identity(n, n) +
                 0.5 * spec.grid.dt * (spec.A2hat.values + spec.A2hat.values.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(q, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol)
      throw Error(ErrorKind::InadmissibleKernel, "lambda id + A2hat is not nonnegative definite");
    return;
  }
  const char* names[] = {"A1", "A2hat", "A3"};
  const GridKernel* ks[] = {&spec.A1, &spec.A2hat, &spec.A3};
  for (int i = 0; i < 3; ++i)
    if (!check_nonneg_definite(*ks[i], tol))
      throw Error(ErrorKind::InadmissibleKernel, std::string(names[i]) + " is not nonnegative definite");
}

GameOperators build_GH(const GameSpec& spec) {
  const double N = spec.N;
  GameOperators ops;
  ops.G = spec.A2hat + (1.0 / (N * N)) * spec.A1 + (1.0 / N) * (spec.A3 + spec.A4);
  ops.H = (1.0 / N) * spec.A1 + spec.A3;
  ops.H_back = (1.0 / N) * spec.A1 + spec.A4;
  return ops;
}

NashSolver::NashSolver(const GameSpec& spec, NashOptions options) : spec_(spec), options_(options) {
  validate_game(spec_);
  ops_ = build_GH(spec_);
  const double N = spec_.N;
  coupling_ = ops_.H.values + ops_.H_back.values.transpose();
  FredholmOptions fo;
  fo.strict_self_adjoint = symmetric_cross(spec_);
  GridKernel Kbar = ops_.G + ((N - 1.0) / N) * ops_.H;
  GridKernel Lbar = ops_.G + ((N - 1.0) / N) * ops_.H_back;
  mean_ = std::make_unique<FredholmSolver>(Kbar, Lbar, 2.0 * spec_.lambda, fo);
  GridKernel Khat = ops_.G - (1.0 / N) * ops_.H;
  GridKernel Lhat = ops_.G - (1.0 / N) * ops_.H_back;
  player_ = std::make_unique<FredholmSolver>(Khat, Lhat, 2.0 * spec_.lambda, fo);
}

SignalPath NashSolver::mean_driver(const std::vector<SignalPath>& b, const std::vector<SignalPath>& b0) const {
  const double N = spec_.N;
  std::vector<std::pair<double, const SignalPath*>> terms;
  for (const auto& p : b) terms.emplace_back(1.0 / N, &p);
  for (const auto& p : b0) terms.emplace_back(1.0 / (N * N), &p);
  return combine(terms);
}

FredholmSolution NashSolver::solve_mean(const SignalPath& driver) const { return mean_->solve(driver); }

SignalPath NashSolver::mean_conditional_drive(const SignalPath& bi, const SignalPath& b0i, const VectorXd& ubar,
                                              const MatrixXd& ubar_surface) const {
  const int n = spec_.grid.n;
  const double dt = spec_.grid.dt;
  if (ubar.size() != n || ubar_surface.rows() != n || ubar_surface.cols() != n)
    throw Error(ErrorKind::ShapeError, "mean strategy does not match the grid");
  SignalPath d = combine({{1.0, &bi}, {1.0 / spec_.N, &b0i}});
  // Row k: E_{t_k}[(H + H_back^*) ubar]_j for all j, by the tower property.
  MatrixXd part = dt * ubar_surface * coupling_.transpose();
  for (int k = 0; k < n; ++k) d.values(k) -= part(k, k);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) d.surface(k, j) = j < k ? d.values(j) : d.surface(k, j) - part(k, j);
  return d;
}

VectorXd NashSolver::solve_player(const SignalPath& drive) const { return player_->solve(drive).v; }

double NashSolver::foc_residual(int i, const VectorXd& ui, const MatrixXd& ui_surface,
                                const MatrixXd& ubar_surface, const SignalPath& bi, const SignalPath& b0i) const {
  (void)i;
  const int n = spec_.grid.n;
  const double dt = spec_.grid.dt;
  const double N = spec_.N;
  const MatrixXd& A1 = spec_.A1.values;
  const MatrixXd& A2 = spec_.A2hat.values;
  const MatrixXd& A3 = spec_.A3.values;
  const MatrixXd& A4 = spec_.A4.values;
  // Gradient of J^i in u^i: 2 lambda u + (A2 + A2*) u + (A3* + A4) u / N + (A3 + A4*) ubar + (A1 + A1*) ubar / N.
  MatrixXd own = A2 + A2.transpose() + (A3.transpose() + A4) / N;
  MatrixXd cross = A3 + A4.transpose() + (A1 + A1.transpose()) / N;
  MatrixXd su = ui_surface;
  for (int k = 0; k < n; ++k) su.row(k).head(k + 1) = ui.head(k + 1).transpose();
  VectorXd r = 2.0 * spec_.lambda * ui + dt * conditional_apply(own, su) + dt * conditional_apply(cross, ubar_surface);
  for (int k = 0; k < n; ++k) r(k) -= bi.values(k) + b0i.values(k) / N;
  return r.cwiseAbs().maxCoeff();
}

PathNash NashSolver::solve_path(const IncrementLookup& dW, bool residuals) const {
  const int n = spec_.grid.n;
  const int N = spec_.N;
  std::vector<SignalPath> b, b0;
  b.reserve(N);
  b0.reserve(N);
  for (int i = 0; i < N; ++i) {
    b.push_back(realize(spec_.b[i], n, dW));
    b0.push_back(realize(spec_.b0[i], n, dW));
  }
  PathNash out;
  SignalPath f = mean_driver(b, b0);
  out.ubar = mean_->solve(f).v;
  out.ubar_surface = mean_->conditional_solution(f, out.ubar);
  VectorXd avg = VectorXd::Zero(n);
  for (int i = 0; i < N; ++i) {
    SignalPath d = mean_conditional_drive(b[i], b0[i], out.ubar, out.ubar_surface);
    out.u.push_back(player_->solve(d).v);
    avg += out.u.back() / N;
    if (residuals) {
      MatrixXd s = player_->conditional_solution(d, out.u.back());
      out.foc.push_back(foc_residual(i, out.u.back(), s, out.ubar_surface, b[i], b0[i]));
    }
  }
  out.mean_gap = (avg - out.ubar).cwiseAbs().maxCoeff();
  return out;
}

NashSolution solve_nash(const GameSpec& spec, const NoiseBundle& bundle, NashOptions options) {
  NashSolver solver(spec, options);
  const int M = bundle.paths();
  NashSolution sol;
  sol.ubar.resize(M);
  sol.u.resize(M);
  std::vector<double> gaps(M), focs(M, 0.0);
  parallel_for(M, options.threads, [&](int p) {
    PathNash r = solver.solve_path(bundle.lookup(p), options.residuals);
    sol.ubar[p] = std::move(r.ubar);
    sol.u[p] = std::move(r.u);
    gaps[p] = r.mean_gap;
    for (double f : r.foc) focs[p] = std::max(focs[p], f);
  });
  for (int p = 0; p < M; ++p) {
    sol.max_mean_gap = std::max(sol.max_mean_gap, gaps[p]);
    sol.max_foc = std::max(sol.max_foc, focs[p]);
  }
  sol.mean_condition = solver.mean_solver().max_condition_estimate();
  sol.player_condition = solver.player_solver().max_condition_estimate();
  if (sol.max_mean_gap > options.consistency_tol)
    throw Error(ErrorKind::ConsistencyViolation,
                "average of player strategies deviates from the mean strategy by " + std::to_string(sol.max_mean_gap));
  return sol;
}

double objective_path(const GameSpec& spec, int i, const std::vector<VectorXd>& u, const VectorXd& bi,
                      const VectorXd& b0i) {
  const int n = spec.grid.n;
  const double dt = spec.grid.dt;
  if (static_cast<int>(u.size()) != spec.N) throw Error(ErrorKind::ShapeError, "need one strategy per player");
  VectorXd ubar = VectorXd::Zero(n);
  for (const auto& x : u) {
    if (x.size() != n) throw Error(ErrorKind::ShapeError, "strategy length mismatch");
    ubar += x / spec.N;
  }
  const VectorXd& ui = u[i];
  double J = -dt * dt * ubar.dot(spec.A1.values * ubar);
  J -= dt * spec.lambda * ui.squaredNorm() + dt * dt * ui.dot(spec.A2hat.values * ui);
  J -= dt * dt * ui.dot(spec.A3.values * ubar + spec.A4.values.transpose() * ubar);
  J += dt * bi.dot(ui) + dt * b0i.dot(ubar) + spec.c[i];
  return J;
}

Estimate objective(const GameSpec& spec, int i, const StrategyProfile& strategies, const NoiseBundle& bundle) {
  const int M = bundle.paths();
  const int n = spec.grid.n;
  double sum = 0.0, sum2 = 0.0;
  for (int p = 0; p < M; ++p) {
    auto dW = bundle.lookup(p);
    VectorXd bi = realize(spec.b[i], n, dW).values;
    VectorXd b0i = realize(spec.b0[i], n, dW).values;
    double J = objective_path(spec, i, strategies(p), bi, b0i);
    sum += J;
    sum2 += J * J;
  }
  Estimate e;
  e.mean = sum / M;
  e.std_error = M > 1 ? std::sqrt(std::max(0.0, sum2 / M - e.mean * e.mean) / (M - 1)) : 0.0;
  return e;
}

ConcavityResult concavity_check(const GameSpec& spec, int i, const StrategyProfile& base, const VectorXd& h,
                                const NoiseBundle& bundle, double delta, double tol) {
  if (h.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorKind::ShapeError, "direction must not vanish");
  auto shifted = [&](double eps) {
    return [&, eps](int p) {
      auto u = base(p);
      u[i] += eps * h;
      return u;
    };
  };
  double jp = objective(spec, i, shifted(delta), bundle).mean;
  double j0 = objective(spec, i, shifted(0.0), bundle).mean;
  double jm = objective(spec, i, shifted(-delta), bundle).mean;
  ConcavityResult r;
  r.second_difference = jp - 2.0 * j0 + jm;
  r.pass = r.second_difference <= tol;
  return r;
}

}  // namespace fredgame
