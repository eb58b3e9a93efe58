#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fredgame/grid.hpp"
#include "fredgame/nplayer.hpp"
#include "fredgame/signals.hpp"

namespace fredgame {

// Controlled state Z^i_k = d^i_k + dt * sum_{j<k} D(k, j) (u^i_j, ubar_j) on the
// nodes k = 0..n of the extended grid, with D = [G2 G3; 0 G1] and controls
// constant on the decision cells. Player i maximizes
//   E[ dt sum_{k<n} f(Z_k, u_k) + g(Z_n) ],
//   f(z, u) = -p u^2 - z'Qz + u z'q,  g(z) = -z'Sz + z's^i.
struct VolterraGameSpec {
  TimeGrid grid;  // decision grid, n points
  int N = 1;
  double p = 0.0;
  Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  Eigen::Vector2d q = Eigen::Vector2d::Zero();
  MatrixXd G1, G2, G3;                      // (n + 1) x n, zero for j >= k
  std::vector<std::array<Signal, 2>> d;     // per player, n + 1 points
  std::vector<std::array<Signal, 2>> s;     // per player, read at point n
};

Eigen::Matrix2d volterra_block(const VolterraGameSpec& v, int k, int j);
void validate_volterra(const VolterraGameSpec& v);

// Exact static form of the discrete Volterra game. The cross kernel splits
// into A3 (acting forward) and A4 (acting backward) since the reduction does
// not produce a symmetric pair in general.
GameSpec reduce_volterra_game(const VolterraGameSpec& v, double tol = 1e-8);

// Objective of player i computed from the state itself; U is N x n.
double volterra_objective(const VolterraGameSpec& v, int i, const MatrixXd& U, const IncrementLookup& dW);

// Nonnegative atoms plus an optional density given per grid cell.
struct DelayMeasure {
  std::vector<std::pair<double, double>> atoms;  // (location, mass)
  std::optional<VectorXd> density;

  bool empty() const { return atoms.empty() && !density; }
};

// Cell averages of G(t - s), G(t) = nu([0, t]), strictly lower.
GridKernel measure_to_kernel(const DelayMeasure& nu, const TimeGrid& grid);

// X^i = M^i + dt K X^i + dt H Xbar on the grid of K and H, solved through
// resolvents: X^i = own M^i + mean Mbar.
struct LinearStateOperators {
  MatrixXd own;   // id + dt R^K
  MatrixXd mean;  // (id + dt R^K) dt H (id + dt R^{K+H})
};

LinearStateOperators linear_state_operators(const GridKernel& K, const GridKernel& H);
std::vector<Signal> solve_linear_state(const std::vector<Signal>& M, const GridKernel& K, const GridKernel& H);
// Residual max_i |X^i - M^i - dt K X^i - dt H Xbar| for realized paths.
double linear_state_residual(const std::vector<VectorXd>& X, const std::vector<VectorXd>& M, const GridKernel& K,
                             const GridKernel& H);
// Plain fixed-point iteration of the same system.
std::vector<VectorXd> picard_linear_state(const std::vector<VectorXd>& M, const GridKernel& K, const GridKernel& H,
                                          int iterations);

enum class ModelKind { Liquidation, Systemic, Advertising };

struct LiquidationParams {
  int N = 1;
  double lambda = 1.0;
  double phi = 0.1;
  double varrho = 1.0;
  KernelSpec propagator = KernelSpec::exponential(1.0, 1.0);
  std::vector<double> x0 = {1.0};            // one value or one per player
  std::vector<SignalFamily> price = {SignalFamily::constant(0.0)};
};

struct SystemicParams {
  int N = 2;
  double beta = 0.3;
  double epsilon = 0.25;
  double c = 1.0;
  std::vector<double> sigma = {0.0};
  std::vector<double> x0 = {0.0};
  std::vector<double> h = {0.0};
  double common_sigma = 0.0;
  DelayMeasure nu;
};

struct AdvertisingParams {
  int N = 2;
  double lambda = 1.0;
  double beta = 1.0;
  std::vector<double> sigma = {0.0};
  std::vector<double> x0 = {0.0};
  std::vector<double> h = {0.0};
  DelayMeasure forgetting;   // nu, acts on the own state
  DelayMeasure competition;  // mu, acts on the average state
};

struct ModelGame {
  ModelKind kind = ModelKind::Liquidation;
  VolterraGameSpec volterra;
  GameSpec game;
  LiquidationParams liquidation;
  SystemicParams systemic;
  AdvertisingParams advertising;
};

ModelGame build_liquidation_game(const LiquidationParams& params, const TimeGrid& grid);
ModelGame build_systemic_game(const SystemicParams& params, const TimeGrid& grid);
ModelGame build_advertising_game(const AdvertisingParams& params, const TimeGrid& grid);

// Objective of player i from the model's own dynamics, simulated forward step
// by step without the Volterra representation; U is N x n.
double direct_objective(const ModelGame& model, int i, const MatrixXd& U, const IncrementLookup& dW);

// Controlled state of player i on the nodes 0..n (inventory, reserves or goodwill).
VectorXd model_state(const ModelGame& model, int i, const MatrixXd& U, const IncrementLookup& dW);

std::string model_name(ModelKind kind);

}  // namespace fredgame
