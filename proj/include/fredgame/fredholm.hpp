#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fredgame/grid.hpp"
#include "fredgame/signals.hpp"

namespace fredgame {

struct FredholmOptions {
  // When false an asymmetric K + L^T only produces a warning; the closed form
  // stays exact as long as every D_t block is invertible.
  bool strict_self_adjoint = true;
  double self_adjoint_tol = 1e-10;
  double singular_tol = 1e-10;
};

// lambda v_t + int_0^t K(t,s) v_s ds + int_t^T L(s,t) E_t[v_s] ds = f_t on the grid.
// K and L are lower triangular; a nonzero diagonal acts on the current cell.
struct FredholmProblem {
  GridKernel K;
  GridKernel L;
  double lambda_eff = 1.0;
  FredholmOptions options;
};

struct FredholmSolution {
  VectorXd v;
  VectorXd a;
};

class FredholmSolver {
 public:
  explicit FredholmSolver(const FredholmProblem& problem);
  FredholmSolver(const GridKernel& K, const GridKernel& L, double lambda_eff, FredholmOptions options = {});

  int size() const { return n_; }
  const FredholmProblem& problem() const { return problem_; }

  // D_k^{-1} y for y indexed by grid points k..n-1.
  VectorXd solve_dt(int k, const VectorXd& y) const;
  MatrixXd dt_block(int k) const;

  // v = a + dt * B v with B strictly lower triangular and path independent.
  const MatrixXd& B() const { return B_; }
  GridKernel B_kernel() const;

  VectorXd assemble_a(const SignalPath& f) const;
  FredholmSolution solve(const SignalPath& f) const;
  // surface(k, j) = E_{t_k} v_j, rows filled with realized values for j <= k.
  MatrixXd conditional_solution(const SignalPath& f, const VectorXd& v) const;
  double residual(const SignalPath& f, const VectorXd& v, const MatrixXd& surface) const;

  double max_condition_estimate() const { return max_cond_; }
  bool self_adjoint() const { return self_adjoint_; }
  const std::string& warning() const { return warning_; }

 private:
  void build();

  FredholmProblem problem_;
  int n_ = 0;
  double dt_ = 0.0;
  std::vector<Eigen::PartialPivLU<MatrixXd>> lu_;
  std::vector<VectorXd> z_;  // D_k^{-T} e_0
  MatrixXd B_;
  MatrixXd id_minus_B_;
  double max_cond_ = 1.0;
  bool self_adjoint_ = true;
  std::string warning_;
};

// sup_k mean over paths of (v^N_k - v_k)^2 for two problems driven by the given signals.
double stability_gap(const FredholmProblem& problem_N, const Signal& f_N, const FredholmProblem& problem_limit,
                     const Signal& f_limit, const NoiseBundle& bundle);

}  // namespace fredgame
