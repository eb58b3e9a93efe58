#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace fredgame {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Uniform left-endpoint grid t_k = k*dt, k = 0..n-1, dt = T/n.
struct TimeGrid {
  double T = 1.0;
  int n = 2;
  double dt = 0.5;

  double time(int k) const { return k * dt; }
  VectorXd times() const;
  bool same_as(const TimeGrid& o) const { return n == o.n && dt == o.dt; }
};

TimeGrid build_grid(double T, int n);

// Same spacing with one more point, so that t_n = T becomes a grid node.
TimeGrid extend(const TimeGrid& grid);

enum class KernelFamily { Zero, Constant, Exponential, PowerLaw, DelayIndicator, Tabulated };

struct KernelSpec {
  KernelFamily family = KernelFamily::Zero;
  double c = 1.0;
  double rho = 0.0;
  double alpha = 0.0;
  double tau = 0.0;
  double scale = 1.0;
  MatrixXd table;  // Tabulated only, taken as already cell-averaged

  static KernelSpec zero();
  static KernelSpec constant(double c);
  static KernelSpec exponential(double c, double rho);
  static KernelSpec power_law(double c, double alpha);
  static KernelSpec delay_indicator(double tau);
  static KernelSpec tabulated(const MatrixXd& values);

  std::string name() const;
};

// Discretized kernel acting on grid functions by (Kf)_i = sum_j K_ij f_j dt.
// `form` holds the exact cell integrals of G(t,s) + G(s,t) divided by dt^2
// when they are known in closed form; it is the quadratic form of the
// continuous operator restricted to piecewise-constant functions.
struct GridKernel {
  TimeGrid grid;
  MatrixXd values;
  bool volterra = true;
  std::optional<MatrixXd> form;

  int size() const { return grid.n; }
  double operator()(int i, int j) const { return values(i, j); }
};

GridKernel zero_kernel(const TimeGrid& grid);
GridKernel kernel_from_matrix(const TimeGrid& grid, const MatrixXd& values);

GridKernel operator+(const GridKernel& a, const GridKernel& b);
GridKernel operator-(const GridKernel& a, const GridKernel& b);
GridKernel operator*(double s, const GridKernel& a);

bool is_strictly_lower(const MatrixXd& m, double tol = 0.0);
bool is_lower(const MatrixXd& m, double tol = 0.0);

GridKernel discretize_kernel(const KernelSpec& spec, const TimeGrid& grid);
VectorXd apply(const GridKernel& K, const VectorXd& f);
GridKernel adjoint(const GridKernel& K);
GridKernel star_product(const GridKernel& G, const GridKernel& H);
GridKernel resolvent(const GridKernel& K);
GridKernel mask_from(const GridKernel& K, int k);

double min_form_eigenvalue(const GridKernel& K);
bool check_nonneg_definite(const GridKernel& K, double tol);

// Solves h = a + dt * B h.
class IdMinusSolver {
 public:
  explicit IdMinusSolver(const GridKernel& B);
  VectorXd operator()(const VectorXd& a) const;
  bool triangular() const { return triangular_; }

 private:
  MatrixXd matrix_;
  bool triangular_ = true;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

IdMinusSolver invert_id_minus(const GridKernel& B);

// Reads an n x n table, one row per line, comma separated.
MatrixXd load_kernel_csv(const std::string& path);

}  // namespace fredgame
