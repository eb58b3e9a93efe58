#include "fredgame/grid.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "fredgame/errors.hpp"

namespace fredgame {

namespace {

constexpr double kSingularThreshold = 1e-10;

// First antiderivative Psi(x) = int_0^x g(y) dy of the convolution profile.
double psi(const KernelSpec& s, double x) {
  if (x <= 0.0) return 0.0;
  switch (s.family) {
    case KernelFamily::Constant:
      return s.c * x;
    case KernelFamily::Exponential:
      if (s.rho == 0.0) return s.c * x;
      return -s.c * std::expm1(-s.rho * x) / s.rho;
    case KernelFamily::PowerLaw:
      return s.c * std::pow(x, 1.0 - s.alpha) / (1.0 - s.alpha);
    case KernelFamily::DelayIndicator:
      return std::min(x, s.tau);
    default:
      return 0.0;
  }
}

// Second antiderivative Phi(x) = int_0^x (x - y) g(y) dy.
double phi(const KernelSpec& s, double x) {
  if (x <= 0.0) return 0.0;
  switch (s.family) {
    case KernelFamily::Constant:
      return 0.5 * s.c * x * x;
    case KernelFamily::Exponential: {
      if (s.rho == 0.0) return 0.5 * s.c * x * x;
      double y = s.rho * x;
      return s.c * (std::expm1(-y) + y) / (s.rho * s.rho);
    }
    case KernelFamily::PowerLaw:
      return s.c * std::pow(x, 2.0 - s.alpha) / ((1.0 - s.alpha) * (2.0 - s.alpha));
    case KernelFamily::DelayIndicator:
      return x <= s.tau ? 0.5 * x * x : s.tau * x - 0.5 * s.tau * s.tau;
    default:
      return 0.0;
  }
}

// int over t in cell i, s in cell j of g(t - s) for i > j, with d = (i - j) dt.
double cell_mass(const KernelSpec& s, double d, double dt) {
  switch (s.family) {
    case KernelFamily::Constant:
      return s.c * dt * dt;
    case KernelFamily::Exponential: {
      if (s.rho == 0.0) return s.c * dt * dt;
      double e = std::expm1(-s.rho * dt) / s.rho;
      return s.c * std::exp(-s.rho * (d - dt)) * e * e;
    }
    default:
      return phi(s, d + dt) - 2.0 * phi(s, d) + phi(s, d - dt);
  }
}

void validate_spec(const KernelSpec& s, const TimeGrid& grid) {
  switch (s.family) {
    case KernelFamily::PowerLaw:
      if (!(s.alpha > 0.0 && s.alpha < 0.5))
        throw Error(ErrorKind::InadmissibleKernel,
                    "power law exponent must lie in (0, 1/2), got " + std::to_string(s.alpha));
      break;
    case KernelFamily::Exponential:
      if (s.rho < 0.0) throw Error(ErrorKind::InadmissibleKernel, "exponential decay rate must be >= 0");
      break;
    case KernelFamily::DelayIndicator:
      if (s.tau < 0.0) throw Error(ErrorKind::InadmissibleKernel, "delay must be >= 0");
      break;
    case KernelFamily::Tabulated:
      if (s.table.rows() != grid.n || s.table.cols() != grid.n)
        throw Error(ErrorKind::ShapeError, "tabulated kernel does not match grid size");
      if (!s.table.allFinite()) throw Error(ErrorKind::InadmissibleKernel, "tabulated kernel has non-finite entries");
      break;
    default:
      break;
  }
}

void require_same_grid(const GridKernel& a, const GridKernel& b) {
  if (!a.grid.same_as(b.grid)) throw Error(ErrorKind::ShapeError, "kernels live on different grids");
}

}  // namespace

VectorXd TimeGrid::times() const {
  VectorXd t(n);
  for (int k = 0; k < n; ++k) t(k) = time(k);
  return t;
}

TimeGrid build_grid(double T, int n) {
  if (!(T > 0.0) || !std::isfinite(T)) throw Error(ErrorKind::InvalidGrid, "horizon must be positive");
  if (n < 2) throw Error(ErrorKind::InvalidGrid, "need at least two grid points");
  return TimeGrid{T, n, T / n};
}

TimeGrid extend(const TimeGrid& grid) { return TimeGrid{grid.T + grid.dt, grid.n + 1, grid.dt}; }

KernelSpec KernelSpec::zero() { return KernelSpec{}; }

KernelSpec KernelSpec::constant(double c) {
  KernelSpec s;
  s.family = KernelFamily::Constant;
  s.c = c;
  return s;
}

KernelSpec KernelSpec::exponential(double c, double rho) {
  KernelSpec s;
  s.family = KernelFamily::Exponential;
  s.c = c;
  s.rho = rho;
  return s;
}

KernelSpec KernelSpec::power_law(double c, double alpha) {
  KernelSpec s;
  s.family = KernelFamily::PowerLaw;
  s.c = c;
  s.alpha = alpha;
  return s;
}

KernelSpec KernelSpec::delay_indicator(double tau) {
  KernelSpec s;
  s.family = KernelFamily::DelayIndicator;
  s.c = 1.0;
  s.tau = tau;
  return s;
}

KernelSpec KernelSpec::tabulated(const MatrixXd& values) {
  KernelSpec s;
  s.family = KernelFamily::Tabulated;
  s.table = values;
  return s;
}

std::string KernelSpec::name() const {
  switch (family) {
    case KernelFamily::Zero: return "zero";
    case KernelFamily::Constant: return "constant";
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::PowerLaw: return "power_law";
    case KernelFamily::DelayIndicator: return "delay_indicator";
    case KernelFamily::Tabulated: return "tabulated";
  }
  return "unknown";
}

GridKernel zero_kernel(const TimeGrid& grid) {
  GridKernel k;
  k.grid = grid;
  k.values = MatrixXd::Zero(grid.n, grid.n);
  k.volterra = true;
  k.form = MatrixXd::Zero(grid.n, grid.n);
  return k;
}

GridKernel kernel_from_matrix(const TimeGrid& grid, const MatrixXd& values) {
  if (values.rows() != grid.n || values.cols() != grid.n)
    throw Error(ErrorKind::ShapeError, "kernel matrix does not match grid size");
  if (!values.allFinite()) throw Error(ErrorKind::InadmissibleKernel, "kernel has non-finite entries");
  GridKernel k;
  k.grid = grid;
  k.values = values;
  k.volterra = is_strictly_lower(values);
  return k;
}

GridKernel operator+(const GridKernel& a, const GridKernel& b) {
  require_same_grid(a, b);
  GridKernel r;
  r.grid = a.grid;
  r.values = a.values + b.values;
  r.volterra = a.volterra && b.volterra;
  if (a.form && b.form) r.form = *a.form + *b.form;
  return r;
}

GridKernel operator*(double s, const GridKernel& a) {
  GridKernel r = a;
  r.values *= s;
  if (r.form) *r.form *= s;
  return r;
}

GridKernel operator-(const GridKernel& a, const GridKernel& b) { return a + (-1.0) * b; }

bool is_strictly_lower(const MatrixXd& m, double tol) {
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i <= std::min<int>(j, m.rows() - 1); ++i)
      if (std::abs(m(i, j)) > tol) return false;
  return true;
}

bool is_lower(const MatrixXd& m, double tol) {
  for (int j = 1; j < m.cols(); ++j)
    for (int i = 0; i < std::min<int>(j, m.rows()); ++i)
      if (std::abs(m(i, j)) > tol) return false;
  return true;
}

GridKernel discretize_kernel(const KernelSpec& spec, const TimeGrid& grid) {
  validate_spec(spec, grid);
  const int n = grid.n;
  const double dt = grid.dt;
  GridKernel k;
  k.grid = grid;
  k.values = MatrixXd::Zero(n, n);
  k.volterra = true;
  if (spec.family == KernelFamily::Zero) {
    k.form = MatrixXd::Zero(n, n);
    return k;
  }
  if (spec.family == KernelFamily::Tabulated) {
    k.values = spec.scale * spec.table;
    k.volterra = is_strictly_lower(k.values);
    return k;
  }
  // Convolution families depend on i - j only.
  VectorXd row(n), mass(n);
  row(0) = 0.0;
  mass(0) = 2.0 * phi(spec, dt) / (dt * dt);
  for (int m = 1; m < n; ++m) {
    double d = m * dt;
    row(m) = (psi(spec, d) - psi(spec, d - dt)) / dt;
    mass(m) = cell_mass(spec, d, dt) / (dt * dt);
  }
  MatrixXd form(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j < i) k.values(i, j) = spec.scale * row(i - j);
      form(i, j) = spec.scale * mass(std::abs(i - j));
    }
  k.form = form;
  return k;
}

VectorXd apply(const GridKernel& K, const VectorXd& f) {
  if (f.size() != K.size()) throw Error(ErrorKind::ShapeError, "grid function length does not match kernel");
  return K.grid.dt * (K.values * f);
}

GridKernel adjoint(const GridKernel& K) {
  GridKernel r = K;
  r.values = K.values.transpose();
  r.volterra = false;
  return r;
}

GridKernel star_product(const GridKernel& G, const GridKernel& H) {
  require_same_grid(G, H);
  GridKernel r;
  r.grid = G.grid;
  r.values = G.grid.dt * (G.values * H.values);
  r.volterra = G.volterra && H.volterra;
  if (r.volterra) r.values.triangularView<Eigen::Upper>().setZero();
  return r;
}

GridKernel resolvent(const GridKernel& K) {
  const int n = K.size();
  const double dt = K.grid.dt;
  MatrixXd A = MatrixXd::Identity(n, n) - dt * K.values;
  GridKernel r;
  r.grid = K.grid;
  if (is_lower(K.values)) {
    for (int i = 0; i < n; ++i)
      if (std::abs(A(i, i)) <= kSingularThreshold)
        throw Error(ErrorKind::SingularOperator, "id - K has a vanishing diagonal entry");
    r.values = A.triangularView<Eigen::Lower>().solve(K.values);
    r.volterra = K.volterra;
    if (r.volterra) r.values.triangularView<Eigen::Upper>().setZero();
    return r;
  }
  Eigen::BDCSVD<MatrixXd> svd(A);
  if (svd.singularValues().minCoeff() <= kSingularThreshold)
    throw Error(ErrorKind::SingularOperator, "id - K is numerically singular");
  r.values = A.partialPivLu().solve(K.values);
  r.volterra = false;
  return r;
}

GridKernel mask_from(const GridKernel& K, int k) {
  if (k < 0 || k >= K.size()) throw Error(ErrorKind::ShapeError, "mask index out of range");
  GridKernel r = K;
  r.values.leftCols(k).setZero();
  if (r.form) {
    MatrixXd f = MatrixXd::Zero(K.size(), K.size());
    int m = K.size() - k;
    f.bottomRightCorner(m, m) = K.form->bottomRightCorner(m, m);
    r.form = f;
  }
  return r;
}

double min_form_eigenvalue(const GridKernel& K) {
  const double dt = K.grid.dt;
  MatrixXd sym = K.form ? MatrixXd(0.5 * dt * *K.form)
                        : MatrixXd(0.5 * dt * (K.values + K.values.transpose()));
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool check_nonneg_definite(const GridKernel& K, double tol) { return min_form_eigenvalue(K) >= -tol; }

IdMinusSolver::IdMinusSolver(const GridKernel& B) {
  const int n = B.size();
  matrix_ = MatrixXd::Identity(n, n) - B.grid.dt * B.values;
  triangular_ = is_lower(B.values);
  if (triangular_) {
    for (int i = 0; i < n; ++i)
      if (std::abs(matrix_(i, i)) <= kSingularThreshold)
        throw Error(ErrorKind::SingularOperator, "id - B has a vanishing diagonal entry");
    return;
  }
  Eigen::BDCSVD<MatrixXd> svd(matrix_);
  if (svd.singularValues().minCoeff() <= kSingularThreshold)
    throw Error(ErrorKind::SingularOperator, "id - B is numerically singular");
  lu_.compute(matrix_);
}

VectorXd IdMinusSolver::operator()(const VectorXd& a) const {
  if (a.size() != matrix_.rows()) throw Error(ErrorKind::ShapeError, "right-hand side length mismatch");
  if (triangular_) return matrix_.triangularView<Eigen::Lower>().solve(a);
  return lu_.solve(a);
}

IdMinusSolver invert_id_minus(const GridKernel& B) { return IdMinusSolver(B); }

MatrixXd load_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open kernel table " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::ConfigError, "bad number '" + cell + "' in " + path);
      }
    }
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n)
      throw Error(ErrorKind::ConfigError, "kernel table " + path + " is not square");
    for (int j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace fredgame
