#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fredgame/fredholm.hpp"
#include "fredgame/grid.hpp"
#include "fredgame/nplayer.hpp"
#include "fredgame/signals.hpp"

namespace fredgame {

// Population of players with b^i = beta^i + beta0 + offset_i, where beta^i are
// i.i.d. copies driven by each player's idiosyncratic noise, beta0 is common
// and offset_i = +spread for odd i, -spread for even i (1-based). The limit
// signal is b_inf = E[beta] + beta0, so h(N) = 0 for deterministic beta and
// even N, and h(N) = Var(beta)/N for i.i.d. beta.
struct MFGSpec {
  TimeGrid grid;
  double lambda = 1.0;
  GridKernel A1;
  GridKernel A2hat;
  GridKernel A3;
  SignalFamily beta = SignalFamily::constant(0.0);
  SignalFamily beta0 = SignalFamily::constant(0.0);
  SignalFamily b0 = SignalFamily::constant(0.0);  // b0 of the induced finite games
  double spread = 0.0;
  std::string h_model = "zero";  // declared rate of b_bar -> b_inf: "zero" or "inverse"
};

MFGSpec make_mfg(const TimeGrid& grid, double lambda, const KernelSpec& A1, const KernelSpec& A2hat,
                 const KernelSpec& A3, const SignalFamily& beta, const SignalFamily& beta0,
                 const SignalFamily& b0 = SignalFamily::constant(0.0), double spread = 0.0);

// Throws when beta uses common noise or beta0 uses idiosyncratic noise.
void validate_mfg(const MFGSpec& spec, double tol = 1e-8);

Signal player_signal(const MFGSpec& spec, int player);  // b^i, 1-based
Signal limit_signal(const MFGSpec& spec);               // b_inf = E[beta] + beta0
GameSpec induced_game(const MFGSpec& spec, int N);

struct MFGPath {
  VectorXd mu;                // mu_hat or nu_hat
  MatrixXd mu_surface;
  std::vector<VectorXd> v;    // per viewed player
  double foc_mu = 0.0;
  double foc_v = 0.0;
};

class MFGSolver {
 public:
  explicit MFGSolver(const MFGSpec& spec);

  const MFGSpec& spec() const { return spec_; }
  // F: 2 lambda v + A2hat v + A2hat^* E.v = x.
  FredholmSolution map_F(const SignalPath& x) const { return F_.solve(x); }
  // G: 2 lambda v + (A2hat + A3) v + (A2hat + A3)^* E.v = x.
  FredholmSolution map_G(const SignalPath& x) const { return G_.solve(x); }
  const FredholmSolver& F() const { return F_; }
  const FredholmSolver& G() const { return G_; }

  // x - A3 mu - A3^* E.mu with its conditional surface.
  SignalPath mean_adjusted(const SignalPath& x, const VectorXd& mu, const MatrixXd& mu_surface) const;

  // mu = G(E beta + beta0) and v^i = F(b^i - A3 mu - A3^* E.mu), i = 1..players.
  MFGPath solve_path(const IncrementLookup& dW, int players, bool residuals) const;

 private:
  MFGSpec spec_;
  FredholmSolver F_;
  FredholmSolver G_;
  MatrixXd coupling_;  // A3 + A3^T
};

struct ConsistencyReport {
  VectorXd gap;        // pooled E[v | common] - mu per grid point
  VectorXd std_error;
  double max_abs_gap = 0.0;
  double max_ratio = 0.0;  // max |gap| / std_error over points with std_error > 0
  bool pass = false;
};

struct MFGSolution {
  std::vector<VectorXd> mu;               // per path
  std::vector<std::vector<VectorXd>> v;   // per path, per viewed player
  double max_foc_mu = 0.0;
  double max_foc_v = 0.0;
  std::optional<ConsistencyReport> consistency;
};

// Generic-player game: one viewed player. When the bundle groups its common
// noise, the conditional consistency condition is checked by pooled MC.
MFGSolution solve_generic(const MFGSpec& spec, const NoiseBundle& bundle, int threads = 1);
// Infinite-player game seen by players 1..N_view.
MFGSolution solve_infinite(const MFGSpec& spec, int N_view, const NoiseBundle& bundle, int threads = 1);

ConsistencyReport consistency_check(const MFGSolution& sol, const NoiseBundle& bundle, double bands = 3.0);

// Least-squares slope of log y against log x; NaN with fewer than two usable points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ConvergenceRow {
  int N = 0;
  double mse_mean = 0.0;    // sup_t E[(ubar^N - nu)^2]
  double mse_player = 0.0;  // sup_t E[(u^{1,N} - v^1)^2]
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  double slope_mean = 0.0;
  double slope_player = 0.0;
};

// Needs a bundle carrying "common" and idio/1..idio/max(Ns).
ConvergenceStudy convergence_study(const MFGSpec& spec, const std::vector<int>& Ns, const NoiseBundle& bundle,
                                   int threads = 1);

struct EpsNashRow {
  int N = 0;
  double gain = 0.0;
  double std_error = 0.0;
};

// J^{1,N}(u; v^{-1}) - J^{1,N}(v^1; v^{-1}) with the mean-field strategies of the
// infinite-player game. Without a deviation, u is player 1's best response to
// v^{-1}, which makes the gain the smallest epsilon for that profile.
EpsNashRow eps_nash_gap(const MFGSpec& spec, int N, const std::optional<VectorXd>& deviation,
                        const NoiseBundle& bundle, int threads = 1);

struct EpsNashStudy {
  std::vector<EpsNashRow> rows;
  double slope = 0.0;  // of the positive part
};

EpsNashStudy eps_nash_study(const MFGSpec& spec, const std::vector<int>& Ns, const std::optional<VectorXd>& deviation,
                            const NoiseBundle& bundle, int threads = 1);

}  // namespace fredgame
