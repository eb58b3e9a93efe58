#include "fredgame/model_builders.hpp"

#include <algorithm>
#include <cmath>

#include "fredgame/errors.hpp"

namespace fredgame {

namespace {

double per_player(const std::vector<double>& v, int i, int N, const char* what) {
  if (v.size() == 1) return v[0];
  if (static_cast<int>(v.size()) != N)
    throw Error(ErrorKind::ConfigError, std::string(what) + " needs one value or one per player");
  return v[i];
}

Signal apply_matrix(const MatrixXd& A, const Signal& s) {
  if (A.cols() != s.size()) throw Error(ErrorKind::ShapeError, "operator does not match signal length");
  Signal r;
  r.mean = A * s.mean;
  for (const auto& [tag, w] : s.weights) r.weights.emplace(tag, A * w);
  return r;
}

Signal average(const std::vector<Signal>& xs) {
  Signal r = (1.0 / xs.size()) * xs[0];
  for (size_t i = 1; i < xs.size(); ++i) r = r + (1.0 / xs.size()) * xs[i];
  return r;
}

// L(k, j) = 1 for j < k: the node value of the running integral of a cell-constant control.
MatrixXd ones_lower(int n) {
  MatrixXd L = MatrixXd::Zero(n + 1, n);
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j < std::min(k, n); ++j) L(k, j) = 1.0;
  return L;
}

Signal constant_points(double value, int points) { return deterministic_signal(VectorXd::Constant(points, value)); }

// out_j += coef * E_{t_j}[f_k] as a linear form.
void add_conditional(Signal& out, int j, double coef, const Signal& f, int k) {
  if (coef == 0.0) return;
  out.mean(j) += coef * f.mean(k);
  for (const auto& [tag, w] : f.weights) {
    auto it = out.weights.find(tag);
    if (it == out.weights.end()) it = out.weights.emplace(tag, MatrixXd::Zero(out.size(), w.cols())).first;
    for (int r = 0; r < j; ++r) it->second(j, r) += coef * w(k, r);
  }
}

// Lower-triangular kernel whose quadratic form dt^2 u'Au equals u'Tu for symmetric T.
MatrixXd fold(const MatrixXd& T, double dt) {
  MatrixXd A = (2.0 / (dt * dt)) * T;
  A.triangularView<Eigen::StrictlyUpper>().setZero();
  A.diagonal() = T.diagonal() / (dt * dt);
  return A;
}

Signal family_path(const std::vector<SignalFamily>& fam, int i, int N, const TimeGrid& grid) {
  if (fam.size() != 1 && static_cast<int>(fam.size()) != N)
    throw Error(ErrorKind::ConfigError, "need one price signal or one per player");
  return lower_signal(fam.size() == 1 ? fam[0] : fam[i], grid, i + 1, grid.n + 1);
}

// x0 + h t + sigma W^i (+ common_sigma W).
Signal driven_state(double x0, double h, double sigma, double common_sigma, const TimeGrid& grid, int player) {
  std::vector<std::pair<double, SignalFamily>> terms = {{1.0, SignalFamily::affine(x0, h)}};
  if (sigma != 0.0) terms.emplace_back(1.0, SignalFamily::martingale(sigma, "idiosyncratic"));
  if (common_sigma != 0.0) terms.emplace_back(1.0, SignalFamily::martingale(common_sigma, "common"));
  return lower_signal(SignalFamily::combination(terms), grid, player, grid.n + 1);
}

VectorXd realized(const Signal& s, int n, const IncrementLookup& dW) { return realize(s, n, dW).values; }

void check_controls(const MatrixXd& U, int N, int n) {
  if (U.rows() != N || U.cols() != n) throw Error(ErrorKind::ShapeError, "controls must be N x n");
}

}  // namespace

Eigen::Matrix2d volterra_block(const VolterraGameSpec& v, int k, int j) {
  Eigen::Matrix2d D;
  D << v.G2(k, j), v.G3(k, j), 0.0, v.G1(k, j);
  return D;
}

void validate_volterra(const VolterraGameSpec& v) {
  const int n = v.grid.n;
  if (v.N < 1) throw Error(ErrorKind::ConfigError, "player count must be >= 1");
  if (v.p < 0.0) throw Error(ErrorKind::ConfigError, "p must be nonnegative");
  for (const MatrixXd* G : {&v.G1, &v.G2, &v.G3}) {
    if (G->rows() != n + 1 || G->cols() != n) throw Error(ErrorKind::ShapeError, "state kernels must be (n+1) x n");
    for (int k = 0; k <= n; ++k)
      for (int j = k; j < n; ++j)
        if ((*G)(k, j) != 0.0) throw Error(ErrorKind::InadmissibleKernel, "state kernels must be strictly causal");
  }
  if (static_cast<int>(v.d.size()) != v.N || static_cast<int>(v.s.size()) != v.N)
    throw Error(ErrorKind::ShapeError, "need d and s for every player");
  for (int i = 0; i < v.N; ++i)
    for (int a = 0; a < 2; ++a)
      if (v.d[i][a].size() != n + 1 || v.s[i][a].size() != n + 1)
        throw Error(ErrorKind::ShapeError, "state signals need n + 1 points");
}

GameSpec reduce_volterra_game(const VolterraGameSpec& v, double tol) {
  validate_volterra(v);
  const int n = v.grid.n;
  const double dt = v.grid.dt;
  const Eigen::Matrix2d Qs = 0.5 * (v.Q + v.Q.transpose());
  const Eigen::Matrix2d Ss = 0.5 * (v.S + v.S.transpose());
  // Rows of D(k, .) acting on w = (u_0..u_{n-1}, ubar_0..ubar_{n-1}).
  MatrixXd X[2];
  X[0] = MatrixXd::Zero(n + 1, 2 * n);
  X[1] = MatrixXd::Zero(n + 1, 2 * n);
  X[0].leftCols(n) = v.G2;
  X[0].rightCols(n) = v.G3;
  X[1].rightCols(n) = v.G1;
  MatrixXd T = MatrixXd::Zero(2 * n, 2 * n);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      if (Qs(a, b) != 0.0) T += dt * dt * dt * Qs(a, b) * X[a].topRows(n).transpose() * X[b].topRows(n);
      if (Ss(a, b) != 0.0) T += dt * dt * Ss(a, b) * X[a].row(n).transpose() * X[b].row(n);
    }
  MatrixXd P = MatrixXd::Zero(2 * n, 2 * n);
  P.topRows(n) = dt * dt * (v.q(0) * X[0].topRows(n) + v.q(1) * X[1].topRows(n));
  T -= 0.5 * (P + P.transpose());

  GameSpec g;
  g.grid = v.grid;
  g.N = v.N;
  g.lambda = v.p;
  g.reduced = true;
  g.A2hat = kernel_from_matrix(v.grid, fold(T.topLeftCorner(n, n), dt));
  g.A1 = kernel_from_matrix(v.grid, fold(T.bottomRightCorner(n, n), dt));
  MatrixXd C = (2.0 / (dt * dt)) * T.topRightCorner(n, n);
  MatrixXd A3 = C.triangularView<Eigen::StrictlyLower>();
  MatrixXd A4t = C.triangularView<Eigen::StrictlyUpper>();
  A3.diagonal() = 0.5 * C.diagonal();
  A4t.diagonal() = 0.5 * C.diagonal();
  g.A3 = kernel_from_matrix(v.grid, A3);
  g.A4 = kernel_from_matrix(v.grid, A4t.transpose());

  for (int i = 0; i < v.N; ++i) {
    const auto& d = v.d[i];
    const auto& s = v.s[i];
    Signal b = deterministic_signal(VectorXd::Zero(n));
    Signal b0 = deterministic_signal(VectorXd::Zero(n));
    Signal* out[2] = {&b, &b0};
    for (int j = 0; j < n; ++j) {
      Eigen::Matrix2d Dn = volterra_block(v, n, j);
      for (int a = 0; a < 2; ++a) {
        for (int c = 0; c < 2; ++c) {
          add_conditional(*out[a], j, Dn(c, a), s[c], n);
          for (int e = 0; e < 2; ++e) add_conditional(*out[a], j, -2.0 * Dn(c, a) * Ss(c, e), d[e], n);
        }
        for (int k = j + 1; k < n; ++k) {
          Eigen::Matrix2d Dk = volterra_block(v, k, j);
          for (int c = 0; c < 2; ++c)
            for (int e = 0; e < 2; ++e) add_conditional(*out[a], j, -2.0 * dt * Dk(c, a) * Qs(c, e), d[e], k);
        }
      }
      for (int e = 0; e < 2; ++e) add_conditional(b, j, v.q(e), d[e], j);
    }
    g.b.push_back(b);
    g.b0.push_back(b0);
    double c = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int e = 0; e < 2; ++e) {
        for (int k = 0; k < n; ++k) c -= dt * v.Q(a, e) * expect_product(d[a], k, d[e], k, dt);
        c -= v.S(a, e) * expect_product(d[a], n, d[e], n, dt);
      }
    for (int a = 0; a < 2; ++a) c += expect_product(d[a], n, s[a], n, dt);
    g.c.push_back(c);
  }
  validate_game(g, tol);
  return g;
}

double volterra_objective(const VolterraGameSpec& v, int i, const MatrixXd& U, const IncrementLookup& dW) {
  validate_volterra(v);
  const int n = v.grid.n;
  const double dt = v.grid.dt;
  check_controls(U, v.N, n);
  VectorXd ubar = U.colwise().mean().transpose();
  VectorXd d0 = realized(v.d[i][0], n, dW), d1 = realized(v.d[i][1], n, dW);
  VectorXd s0 = realized(v.s[i][0], n, dW), s1 = realized(v.s[i][1], n, dW);
  double J = 0.0;
  for (int k = 0; k <= n; ++k) {
    Eigen::Vector2d Z(d0(k), d1(k));
    for (int j = 0; j < k && j < n; ++j) Z += dt * volterra_block(v, k, j) * Eigen::Vector2d(U(i, j), ubar(j));
    if (k < n) {
      double u = U(i, k);
      J += dt * (-v.p * u * u - Z.dot(v.Q * Z) + u * Z.dot(v.q));
    } else {
      J += -Z.dot(v.S * Z) + Z.dot(Eigen::Vector2d(s0(n), s1(n)));
    }
  }
  return J;
}

GridKernel measure_to_kernel(const DelayMeasure& nu, const TimeGrid& grid) {
  const int n = grid.n;
  const double dt = grid.dt;
  for (const auto& [tau, mass] : nu.atoms)
    if (!(tau >= 0.0) || !std::isfinite(mass)) throw Error(ErrorKind::ConfigError, "delay atoms need tau >= 0");
  VectorXd cum;  // integral of the density up to cell boundaries
  if (nu.density) {
    if (nu.density->size() < n - 1) throw Error(ErrorKind::ShapeError, "density needs one value per cell");
    cum = VectorXd::Zero(nu.density->size() + 1);
    for (int m = 0; m < nu.density->size(); ++m) cum(m + 1) = cum(m) + dt * (*nu.density)(m);
  }
  MatrixXd G = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      const double d = (i - j) * dt;
      double g = 0.0;
      for (const auto& [tau, mass] : nu.atoms) g += mass * std::clamp((d - tau) / dt, 0.0, 1.0);
      if (nu.density) g += 0.5 * (cum(i - j - 1) + cum(i - j));
      G(i, j) = g;
    }
  return kernel_from_matrix(grid, G);
}

LinearStateOperators linear_state_operators(const GridKernel& K, const GridKernel& H) {
  if (!K.grid.same_as(H.grid)) throw Error(ErrorKind::ShapeError, "kernels live on different grids");
  if (!is_strictly_lower(K.values) || !is_strictly_lower(H.values))
    throw Error(ErrorKind::InadmissibleKernel, "state kernels must be Volterra");
  const int n = K.size();
  const double dt = K.grid.dt;
  const MatrixXd I = MatrixXd::Identity(n, n);
  LinearStateOperators ops;
  ops.own = I + dt * resolvent(K).values;
  ops.mean = ops.own * (dt * H.values) * (I + dt * resolvent(K + H).values);
  return ops;
}

std::vector<Signal> solve_linear_state(const std::vector<Signal>& M, const GridKernel& K, const GridKernel& H) {
  if (M.empty()) throw Error(ErrorKind::ShapeError, "need at least one state");
  LinearStateOperators ops = linear_state_operators(K, H);
  Signal mbar = apply_matrix(ops.mean, average(M));
  std::vector<Signal> X;
  for (const auto& m : M) X.push_back(apply_matrix(ops.own, m) + mbar);
  return X;
}

double linear_state_residual(const std::vector<VectorXd>& X, const std::vector<VectorXd>& M, const GridKernel& K,
                             const GridKernel& H) {
  const double dt = K.grid.dt;
  VectorXd xbar = VectorXd::Zero(X[0].size());
  for (const auto& x : X) xbar += x / static_cast<double>(X.size());
  double r = 0.0;
  for (size_t i = 0; i < X.size(); ++i)
    r = std::max(r, (X[i] - M[i] - dt * K.values * X[i] - dt * H.values * xbar).cwiseAbs().maxCoeff());
  return r;
}

std::vector<VectorXd> picard_linear_state(const std::vector<VectorXd>& M, const GridKernel& K, const GridKernel& H,
                                          int iterations) {
  const double dt = K.grid.dt;
  std::vector<VectorXd> X = M;
  for (int it = 0; it < iterations; ++it) {
    VectorXd xbar = VectorXd::Zero(M[0].size());
    for (const auto& x : X) xbar += x / static_cast<double>(X.size());
    std::vector<VectorXd> next;
    for (size_t i = 0; i < X.size(); ++i) next.push_back(M[i] + dt * K.values * X[i] + dt * H.values * xbar);
    X = std::move(next);
  }
  return X;
}

ModelGame build_liquidation_game(const LiquidationParams& prm, const TimeGrid& grid) {
  if (!(prm.lambda > 0.0) || !(prm.phi > 0.0) || !(prm.varrho > 0.0))
    throw Error(ErrorKind::ConfigError, "liquidation needs lambda, phi, varrho > 0");
  if (prm.N < 1) throw Error(ErrorKind::ConfigError, "player count must be >= 1");
  const int n = grid.n;
  if (!check_nonneg_definite(discretize_kernel(prm.propagator, grid), 1e-8))
    throw Error(ErrorKind::InadmissibleKernel, "propagator is not nonnegative definite");
  MatrixXd Gp = discretize_kernel(prm.propagator, extend(grid)).values;
  ModelGame m;
  m.kind = ModelKind::Liquidation;
  m.liquidation = prm;
  VolterraGameSpec& v = m.volterra;
  v.grid = grid;
  v.N = prm.N;
  v.p = prm.lambda;
  v.Q << prm.phi, 0.0, 0.0, 0.0;
  v.S << prm.varrho, 0.0, 0.0, 0.0;
  v.q << 0.0, 1.0;
  v.G2 = -ones_lower(n);
  v.G3 = MatrixXd::Zero(n + 1, n);
  v.G1 = -Gp.leftCols(n);
  for (int i = 0; i < prm.N; ++i) {
    Signal P = family_path(prm.price, i, prm.N, grid);
    v.d.push_back({constant_points(per_player(prm.x0, i, prm.N, "x0"), n + 1), P});
    v.s.push_back({P, constant_points(0.0, n + 1)});
  }
  m.game = reduce_volterra_game(v);
  return m;
}

ModelGame build_systemic_game(const SystemicParams& prm, const TimeGrid& grid) {
  if (prm.N < 1) throw Error(ErrorKind::ConfigError, "player count must be >= 1");
  if (!(prm.epsilon > 0.0) || prm.c < 0.0) throw Error(ErrorKind::ConfigError, "systemic needs epsilon > 0, c >= 0");
  if (prm.beta * prm.beta > prm.epsilon)
    throw Error(ErrorKind::ConvexityViolation, "beta^2 must not exceed epsilon");
  const int n = grid.n;
  MatrixXd G = measure_to_kernel(prm.nu, extend(grid)).values.leftCols(n);
  ModelGame m;
  m.kind = ModelKind::Systemic;
  m.systemic = prm;
  VolterraGameSpec& v = m.volterra;
  v.grid = grid;
  v.N = prm.N;
  v.p = 0.5;
  v.Q << 1.0, -1.0, -1.0, 1.0;
  v.Q *= 0.5 * prm.epsilon;
  v.S = (prm.c / prm.epsilon) * v.Q;
  v.q << -prm.beta, prm.beta;
  v.G1 = G;
  v.G2 = G;
  v.G3 = MatrixXd::Zero(n + 1, n);
  std::vector<Signal> P;
  for (int i = 0; i < prm.N; ++i)
    P.push_back(driven_state(per_player(prm.x0, i, prm.N, "x0"), per_player(prm.h, i, prm.N, "h"),
                             per_player(prm.sigma, i, prm.N, "sigma"), prm.common_sigma, grid, i + 1));
  Signal R = average(P);
  for (int i = 0; i < prm.N; ++i) {
    v.d.push_back({P[i], R});
    v.s.push_back({constant_points(0.0, n + 1), constant_points(0.0, n + 1)});
  }
  m.game = reduce_volterra_game(v);
  return m;
}

ModelGame build_advertising_game(const AdvertisingParams& prm, const TimeGrid& grid) {
  if (prm.N < 1) throw Error(ErrorKind::ConfigError, "player count must be >= 1");
  if (!(prm.lambda > 0.0) || prm.beta < 0.0) throw Error(ErrorKind::ConfigError, "advertising needs lambda > 0, beta >= 0");
  const int n = grid.n;
  const TimeGrid ext = extend(grid);
  const double dt = grid.dt;
  GridKernel Hk = measure_to_kernel(prm.competition, ext);
  MatrixXd L1 = ones_lower(n);
  std::vector<Signal> P;
  for (int i = 0; i < prm.N; ++i)
    P.push_back(driven_state(per_player(prm.x0, i, prm.N, "x0"), per_player(prm.h, i, prm.N, "h"),
                             per_player(prm.sigma, i, prm.N, "sigma"), 0.0, grid, i + 1));
  Signal Pbar = average(P);
  ModelGame m;
  m.kind = ModelKind::Advertising;
  m.advertising = prm;
  VolterraGameSpec& v = m.volterra;
  v.grid = grid;
  v.N = prm.N;
  v.p = prm.lambda;
  v.G1 = MatrixXd::Zero(n + 1, n);
  std::vector<Signal> state;
  if (prm.forgetting.empty()) {
    // No forgetting: x^i = M^i + dt R^H Mbar since H + dt H R^H = R^H.
    MatrixXd RH = resolvent(Hk).values;
    v.G2 = prm.beta * L1;
    v.G3 = prm.beta * dt * RH * L1;
    Signal shared = apply_matrix(dt * RH, Pbar);
    for (const auto& p : P) state.push_back(p + shared);
  } else {
    LinearStateOperators ops = linear_state_operators(measure_to_kernel(prm.forgetting, ext), Hk);
    v.G2 = prm.beta * ops.own * L1;
    v.G3 = prm.beta * ops.mean * L1;
    state = solve_linear_state(P, measure_to_kernel(prm.forgetting, ext), Hk);
  }
  for (int i = 0; i < prm.N; ++i) {
    v.d.push_back({state[i], constant_points(0.0, n + 1)});
    v.s.push_back({constant_points(prm.beta, n + 1), constant_points(0.0, n + 1)});
  }
  m.game = reduce_volterra_game(v);
  return m;
}

namespace {

// Integral of a cell-constant control over [0, t], zero for t <= 0.
double cumulative(const VectorXd& u, double dt, double t) {
  if (t <= 0.0) return 0.0;
  const int n = static_cast<int>(u.size());
  int full = std::min(n, static_cast<int>(std::floor(t / dt)));
  double r = dt * u.head(full).sum();
  if (full < n) r += (t - full * dt) * u(full);
  return r;
}

std::vector<VectorXd> simulate_states(const ModelGame& m, const MatrixXd& U, const IncrementLookup& dW) {
  const TimeGrid& grid = m.volterra.grid;
  const int n = grid.n;
  const int N = m.volterra.N;
  const double dt = grid.dt;
  check_controls(U, N, n);
  VectorXd ubar = U.colwise().mean().transpose();
  std::vector<VectorXd> X(N, VectorXd::Zero(n + 1));
  switch (m.kind) {
    case ModelKind::Liquidation: {
      for (int i = 0; i < N; ++i) {
        X[i](0) = per_player(m.liquidation.x0, i, N, "x0");
        for (int k = 0; k < n; ++k) X[i](k + 1) = X[i](k) - dt * U(i, k);
      }
      return X;
    }
    case ModelKind::Systemic: {
      const SystemicParams& prm = m.systemic;
      for (int i = 0; i < N; ++i) {
        VectorXd P = realized(driven_state(per_player(prm.x0, i, N, "x0"), per_player(prm.h, i, N, "h"),
                                           per_player(prm.sigma, i, N, "sigma"), prm.common_sigma, grid, i + 1),
                              n, dW);
        VectorXd u = U.row(i).transpose();
        X[i](0) = P(0);
        for (int k = 0; k < n; ++k) {
          // Drift int_{t_k}^{t_{k+1}} int nu(ds) u_{t-s} dt, exact for cell-constant u.
          double drift = 0.0;
          for (const auto& [tau, mass] : prm.nu.atoms)
            drift += mass * (cumulative(u, dt, (k + 1) * dt - tau) - cumulative(u, dt, k * dt - tau));
          if (prm.nu.density) {
            const VectorXd& g = *prm.nu.density;
            for (int a = 0; a < g.size(); ++a)
              for (int j = 0; j < n; ++j)
                if (a + j == k || a + j + 1 == k) drift += 0.5 * dt * dt * g(a) * u(j);
          }
          X[i](k + 1) = X[i](k) + (P(k + 1) - P(k)) + drift;
        }
      }
      return X;
    }
    case ModelKind::Advertising: {
      const AdvertisingParams& prm = m.advertising;
      const TimeGrid ext = extend(grid);
      MatrixXd K = prm.forgetting.empty() ? MatrixXd::Zero(n + 1, n + 1) : measure_to_kernel(prm.forgetting, ext).values;
      MatrixXd H = measure_to_kernel(prm.competition, ext).values;
      std::vector<VectorXd> P;
      for (int i = 0; i < N; ++i)
        P.push_back(realized(driven_state(per_player(prm.x0, i, N, "x0"), per_player(prm.h, i, N, "h"),
                                          per_player(prm.sigma, i, N, "sigma"), 0.0, grid, i + 1),
                             n, dW));
      VectorXd xbar = VectorXd::Zero(n + 1);
      for (int k = 0; k <= n; ++k) {
        for (int i = 0; i < N; ++i) {
          double x = P[i](k);
          for (int j = 0; j < k; ++j) x += dt * (prm.beta * U(i, j) + K(k, j) * X[i](j) + H(k, j) * xbar(j));
          X[i](k) = x;
        }
        for (int i = 0; i < N; ++i) xbar(k) += X[i](k) / N;
      }
      return X;
    }
  }
  return X;
}

}  // namespace

VectorXd model_state(const ModelGame& model, int i, const MatrixXd& U, const IncrementLookup& dW) {
  return simulate_states(model, U, dW).at(i);
}

double direct_objective(const ModelGame& m, int i, const MatrixXd& U, const IncrementLookup& dW) {
  const TimeGrid& grid = m.volterra.grid;
  const int n = grid.n;
  const int N = m.volterra.N;
  const double dt = grid.dt;
  std::vector<VectorXd> X = simulate_states(m, U, dW);
  VectorXd ubar = U.colwise().mean().transpose();
  switch (m.kind) {
    case ModelKind::Liquidation: {
      const LiquidationParams& prm = m.liquidation;
      MatrixXd Gp = discretize_kernel(prm.propagator, extend(grid)).values;
      VectorXd P = realized(family_path(prm.price, i, N, grid), n, dW);
      double J = 0.0;
      for (int k = 0; k < n; ++k) {
        double impact = 0.0;
        for (int j = 0; j < k; ++j) impact += dt * Gp(k, j) * ubar(j);
        double u = U(i, k);
        J += dt * (-prm.lambda * u * u - prm.phi * X[i](k) * X[i](k) - u * impact + P(k) * u);
      }
      return J - prm.varrho * X[i](n) * X[i](n) + P(n) * X[i](n);
    }
    case ModelKind::Systemic: {
      const SystemicParams& prm = m.systemic;
      VectorXd xbar = VectorXd::Zero(n + 1);
      for (const auto& x : X) xbar += x / N;
      double cost = 0.0;
      for (int k = 0; k < n; ++k) {
        double u = U(i, k);
        double gap = xbar(k) - X[i](k);
        cost += dt * (0.5 * u * u - prm.beta * u * gap + 0.5 * prm.epsilon * gap * gap);
      }
      double gap = xbar(n) - X[i](n);
      return -(cost + 0.5 * prm.c * gap * gap);
    }
    case ModelKind::Advertising: {
      const AdvertisingParams& prm = m.advertising;
      return -prm.lambda * dt * U.row(i).squaredNorm() + prm.beta * X[i](n);
    }
  }
  return 0.0;
}

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Liquidation: return "liquidation";
    case ModelKind::Systemic: return "systemic";
    case ModelKind::Advertising: return "advertising";
  }
  return "unknown";
}

}  // namespace fredgame
