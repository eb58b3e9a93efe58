#include "fredgame/fredholm.hpp"

#include <cmath>
#include <sstream>

#include "fredgame/errors.hpp"

namespace fredgame {

FredholmSolver::FredholmSolver(const FredholmProblem& problem) : problem_(problem) { build(); }

FredholmSolver::FredholmSolver(const GridKernel& K, const GridKernel& L, double lambda_eff, FredholmOptions options)
    : problem_{K, L, lambda_eff, options} {
  build();
}

void FredholmSolver::build() {
  const GridKernel& K = problem_.K;
  const GridKernel& L = problem_.L;
  if (!K.grid.same_as(L.grid)) throw Error(ErrorKind::ShapeError, "K and L live on different grids");
  if (!(problem_.lambda_eff > 0.0)) throw Error(ErrorKind::InadmissibleKernel, "identity coefficient must be positive");
  if (!is_lower(K.values) || !is_lower(L.values))
    throw Error(ErrorKind::InadmissibleKernel, "forward and backward kernels must be lower triangular");
  n_ = K.size();
  dt_ = K.grid.dt;

  MatrixXd S = K.values + L.values.transpose();
  double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if (asym > problem_.options.self_adjoint_tol * scale) {
    self_adjoint_ = false;
    std::ostringstream msg;
    msg << "K + L* is not self-adjoint (max asymmetry " << asym << ")";
    if (problem_.options.strict_self_adjoint) throw Error(ErrorKind::InadmissibleKernel, msg.str());
    warning_ = msg.str();
  }

  MatrixXd M = problem_.lambda_eff * MatrixXd::Identity(n_, n_) + dt_ * S;
  lu_.resize(n_);
  z_.resize(n_);
  B_ = MatrixXd::Zero(n_, n_);
  max_cond_ = 1.0;
  for (int k = 0; k < n_; ++k) {
    const int m = n_ - k;
    MatrixXd block = M.bottomRightCorner(m, m);
    lu_[k].compute(block);
    double rcond = lu_[k].rcond();
    double norm1 = block.cwiseAbs().colwise().sum().maxCoeff();
    double smallest = rcond * norm1;
    if (!std::isfinite(rcond) || !(smallest > problem_.options.singular_tol)) {
      std::ostringstream msg;
      msg << "D_t block at k=" << k << " is numerically singular (estimated smallest singular value " << smallest
          << ")";
      throw Error(ErrorKind::SingularOperator, msg.str());
    }
    max_cond_ = std::max(max_cond_, 1.0 / rcond);
    VectorXd e0 = VectorXd::Zero(m);
    e0(0) = 1.0;
    z_[k] = lu_[k].transpose().solve(e0);
    if (k > 0) B_.row(k).head(k) = -(z_[k].transpose() * K.values.block(k, 0, m, k));
  }
  id_minus_B_ = MatrixXd::Identity(n_, n_) - dt_ * B_;
}

MatrixXd FredholmSolver::dt_block(int k) const {
  if (k < 0 || k >= n_) throw Error(ErrorKind::ShapeError, "block index out of range");
  MatrixXd S = problem_.K.values + problem_.L.values.transpose();
  MatrixXd M = problem_.lambda_eff * MatrixXd::Identity(n_, n_) + dt_ * S;
  return M.bottomRightCorner(n_ - k, n_ - k);
}

VectorXd FredholmSolver::solve_dt(int k, const VectorXd& y) const {
  if (k < 0 || k >= n_ || y.size() != n_ - k) throw Error(ErrorKind::ShapeError, "bad D_t solve request");
  return lu_[k].solve(y);
}

GridKernel FredholmSolver::B_kernel() const {
  GridKernel b;
  b.grid = problem_.K.grid;
  b.values = B_;
  b.volterra = true;
  return b;
}

VectorXd FredholmSolver::assemble_a(const SignalPath& f) const {
  if (f.surface.rows() != n_ || f.surface.cols() < n_ || f.values.size() < n_)
    throw Error(ErrorKind::ShapeError, "driver does not match the solver grid");
  VectorXd a(n_);
  for (int k = 0; k < n_; ++k) a(k) = z_[k].dot(f.surface.row(k).segment(k, n_ - k));
  return a;
}

FredholmSolution FredholmSolver::solve(const SignalPath& f) const {
  FredholmSolution s;
  s.a = assemble_a(f);
  s.v = id_minus_B_.triangularView<Eigen::Lower>().solve(s.a);
  return s;
}

MatrixXd FredholmSolver::conditional_solution(const SignalPath& f, const VectorXd& v) const {
  if (v.size() != n_) throw Error(ErrorKind::ShapeError, "solution length mismatch");
  const MatrixXd& K = problem_.K.values;
  MatrixXd surface(n_, n_);
  VectorXd past = VectorXd::Zero(n_);  // sum_{r<k} K(j, r) v_r
  for (int k = 0; k < n_; ++k) {
    const int m = n_ - k;
    VectorXd y = f.surface.row(k).segment(k, m).transpose() - dt_ * past.tail(m);
    surface.row(k).head(k) = v.head(k).transpose();
    surface.row(k).tail(m) = lu_[k].solve(y).transpose();
    past += K.col(k) * v(k);
  }
  return surface;
}

double FredholmSolver::residual(const SignalPath& f, const VectorXd& v, const MatrixXd& surface) const {
  const MatrixXd& K = problem_.K.values;
  const MatrixXd& L = problem_.L.values;
  double worst = 0.0;
  for (int k = 0; k < n_; ++k) {
    double r = problem_.lambda_eff * v(k) - f.values(k);
    r += dt_ * K.row(k).head(k + 1).dot(v.head(k + 1));
    for (int j = k; j < n_; ++j) r += dt_ * L(j, k) * (j == k ? v(k) : surface(k, j));
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

double stability_gap(const FredholmProblem& problem_N, const Signal& f_N, const FredholmProblem& problem_limit,
                     const Signal& f_limit, const NoiseBundle& bundle) {
  FredholmSolver sN(problem_N);
  FredholmSolver s(problem_limit);
  const int n = sN.size();
  VectorXd acc = VectorXd::Zero(n);
  for (int p = 0; p < bundle.paths(); ++p) {
    auto dW = bundle.lookup(p);
    VectorXd vN = sN.solve(realize(f_N, n, dW)).v;
    VectorXd v = s.solve(realize(f_limit, n, dW)).v;
    acc += (vN - v).cwiseAbs2();
  }
  return acc.maxCoeff() / bundle.paths();
}

}  // namespace fredgame
