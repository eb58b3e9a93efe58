#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "fredgame/fredholm.hpp"
#include "fredgame/grid.hpp"
#include "fredgame/signals.hpp"

namespace fredgame {

// J^i = E[ -<ubar, A1 ubar> - <u, (lambda + A2hat) u> - <u, (A3 + A4*) ubar>
//          + <b^i, u> + <b0^i, ubar> + c^i ].
// The classical form has A4 = A3 and one b0 shared by all players. Games
// obtained by reducing a state-space model carry a distinct A4, per-player
// b0 and kernels with a diagonal, which is why both are kept general here.
struct GameSpec {
  TimeGrid grid;
  int N = 1;
  double lambda = 1.0;
  GridKernel A1;
  GridKernel A2hat;
  GridKernel A3;
  GridKernel A4;
  std::vector<Signal> b;   // N signals on n points
  std::vector<Signal> b0;  // N signals on n points
  std::vector<double> c;   // E[c^i]
  bool reduced = false;
};

GameSpec make_game(const TimeGrid& grid, int N, double lambda, const KernelSpec& A1, const KernelSpec& A2hat,
                   const KernelSpec& A3, const std::vector<SignalFamily>& b, const SignalFamily& b0,
                   const std::vector<double>& c = {});

bool symmetric_cross(const GameSpec& spec);
// Throws InadmissibleKernel when the admissibility checks fail.
void validate_game(const GameSpec& spec, double tol = 1e-8);

struct GameOperators {
  GridKernel G;       // A2hat + A1/N^2 + (A3 + A4)/N
  GridKernel H;       // A1/N + A3, forward part of the mean coupling
  GridKernel H_back;  // A1/N + A4, backward part of the mean coupling
};

GameOperators build_GH(const GameSpec& spec);

struct NashOptions {
  double consistency_tol = 1e-6;
  bool residuals = true;
  int threads = 1;
};

struct PathNash {
  VectorXd ubar;
  MatrixXd ubar_surface;
  std::vector<VectorXd> u;
  std::vector<double> foc;  // per player, filled when residuals are requested
  double mean_gap = 0.0;
};

class NashSolver {
 public:
  explicit NashSolver(const GameSpec& spec, NashOptions options = {});

  const GameSpec& spec() const { return spec_; }
  const GameOperators& ops() const { return ops_; }
  const FredholmSolver& mean_solver() const { return *mean_; }
  const FredholmSolver& player_solver() const { return *player_; }

  // Driver of the aggregate equation, bbar + mean(b0)/N.
  SignalPath mean_driver(const std::vector<SignalPath>& b, const std::vector<SignalPath>& b0) const;
  FredholmSolution solve_mean(const SignalPath& driver) const;
  // b^i + b0^i/N - H ubar - H_back^* E.[ubar] with its conditional surface.
  SignalPath mean_conditional_drive(const SignalPath& bi, const SignalPath& b0i, const VectorXd& ubar,
                                    const MatrixXd& ubar_surface) const;
  VectorXd solve_player(const SignalPath& drive) const;
  double foc_residual(int i, const VectorXd& ui, const MatrixXd& ui_surface, const MatrixXd& ubar_surface,
                      const SignalPath& bi, const SignalPath& b0i) const;

  PathNash solve_path(const IncrementLookup& dW, bool residuals) const;

 private:
  GameSpec spec_;
  NashOptions options_;
  GameOperators ops_;
  MatrixXd coupling_;  // H + H_back^T
  std::unique_ptr<FredholmSolver> mean_;
  std::unique_ptr<FredholmSolver> player_;
};

struct NashSolution {
  std::vector<VectorXd> ubar;             // per path
  std::vector<std::vector<VectorXd>> u;   // per path, per player
  double max_mean_gap = 0.0;
  double max_foc = 0.0;
  double mean_condition = 0.0;
  double player_condition = 0.0;
};

NashSolution solve_nash(const GameSpec& spec, const NoiseBundle& bundle, NashOptions options = {});

// Single-path objective with realized signals.
double objective_path(const GameSpec& spec, int i, const std::vector<VectorXd>& u, const VectorXd& bi,
                      const VectorXd& b0i);

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

using StrategyProfile = std::function<std::vector<VectorXd>(int path)>;

// Monte Carlo estimate of J^i over the bundle paths.
Estimate objective(const GameSpec& spec, int i, const StrategyProfile& strategies, const NoiseBundle& bundle);

struct ConcavityResult {
  bool pass = false;
  double second_difference = 0.0;
};

// Second central difference of eps -> J^i(u_i + eps h) with the others fixed.
ConcavityResult concavity_check(const GameSpec& spec, int i, const StrategyProfile& base, const VectorXd& h,
                                const NoiseBundle& bundle, double delta = 1e-2, double tol = 1e-10);

}  // namespace fredgame
