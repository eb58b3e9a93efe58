#include "fredgame/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <set>

#include "fredgame/errors.hpp"

namespace fredgame {

namespace {

constexpr double kHessianFloor = 1e-10;

void branch_moves(int branching, double dt, std::vector<double>& value, std::vector<double>& weight) {
  switch (branching) {
    case 1:
      value = {0.0};
      weight = {1.0};
      return;
    case 2:
      value = {-std::sqrt(dt), std::sqrt(dt)};
      weight = {0.5, 0.5};
      return;
    case 3:
      value = {-std::sqrt(3.0 * dt), 0.0, std::sqrt(3.0 * dt)};
      weight = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
      return;
    default:
      throw Error(ErrorKind::ConfigError, "branching must be 1, 2 or 3");
  }
}

// Path-level Hessian blocks: J_path^i = -U^T P U + c^T U with U = (u^1, ..., u^N).
MatrixXd player_quadratic(const GameSpec& spec, int i) {
  const int n = spec.grid.n;
  const int N = spec.N;
  const double dt = spec.grid.dt;
  MatrixXd Ei = MatrixXd::Zero(n, n * N);
  Ei.block(0, i * n, n, n).setIdentity();
  MatrixXd Ubar = MatrixXd::Zero(n, n * N);
  for (int j = 0; j < N; ++j) Ubar.block(0, j * n, n, n) = MatrixXd::Identity(n, n) / N;
  MatrixXd P = dt * dt * Ubar.transpose() * spec.A1.values * Ubar;
  P += spec.lambda * dt * Ei.transpose() * Ei;
  P += dt * dt * Ei.transpose() * spec.A2hat.values * Ei;
  P += dt * dt * Ei.transpose() * (spec.A3.values + spec.A4.values.transpose()) * Ubar;
  return P + P.transpose();
}

}  // namespace

ScenarioTree::ScenarioTree(const TimeGrid& grid, std::vector<std::string> sources, int branching, long max_nodes)
    : grid_(grid), sources_(std::move(sources)), branching_(branching) {
  std::vector<double> value, weight;
  branch_moves(branching, grid.dt, value, weight);
  const int d = static_cast<int>(sources_.size());
  long fan = 1;
  for (int s = 0; s < d; ++s) fan *= branching;
  fanout_ = static_cast<int>(fan);
  long total = 0, level = 1;
  for (int k = 0; k < grid.n; ++k) {
    total += level;
    if (total > max_nodes) throw Error(ErrorKind::SizeExceeded, "scenario tree exceeds the node budget");
    level *= fan;
  }
  offset_.assign(grid.n + 1, 0);
  parent_.reserve(total);
  prob_.reserve(total);
  increment_ = MatrixXd::Zero(total, std::max(d, 1));
  parent_.push_back(-1);
  prob_.push_back(1.0);
  offset_[1] = 1;
  for (int k = 1; k < grid.n; ++k) {
    for (int p = offset_[k - 1]; p < offset_[k]; ++p) {
      for (int c = 0; c < fanout_; ++c) {
        int id = static_cast<int>(parent_.size());
        double pr = prob_[p];
        int code = c;
        for (int s = 0; s < d; ++s) {
          int digit = code % branching;
          code /= branching;
          increment_(id, s) = value[digit];
          pr *= weight[digit];
        }
        parent_.push_back(p);
        prob_.push_back(pr);
      }
    }
    offset_[k + 1] = static_cast<int>(parent_.size());
  }
}

int ScenarioTree::level_of(int node) const {
  auto it = std::upper_bound(offset_.begin(), offset_.end(), node);
  return static_cast<int>(it - offset_.begin()) - 1;
}

std::vector<int> ScenarioTree::path_to(int node) const {
  std::vector<int> path(level_of(node) + 1);
  for (int k = static_cast<int>(path.size()) - 1; k >= 0; --k) {
    path[k] = node;
    node = parent_[node];
  }
  return path;
}

std::map<std::string, VectorXd> ScenarioTree::path_increments(int leaf) const {
  const int n = grid_.n;
  std::vector<int> path = path_to(leaf);
  std::map<std::string, VectorXd> out;
  for (int s = 0; s < static_cast<int>(sources_.size()); ++s) {
    VectorXd dW = VectorXd::Zero(n);
    for (int r = 0; r + 1 < static_cast<int>(path.size()); ++r) dW(r) = increment_(path[r + 1], s);
    out.emplace(sources_[s], dW);
  }
  return out;
}

double ScenarioTree::node_value(const Signal& sig, int node) const {
  std::vector<int> path = path_to(node);
  const int k = static_cast<int>(path.size()) - 1;
  double v = sig.mean(k);
  for (const auto& [tag, w] : sig.weights) {
    auto it = std::find(sources_.begin(), sources_.end(), tag);
    if (it == sources_.end()) {
      if (w.cwiseAbs().maxCoeff() == 0.0) continue;
      throw Error(ErrorKind::UnsupportedSignal, "tree has no source for tag " + tag);
    }
    int s = static_cast<int>(it - sources_.begin());
    for (int r = 0; r < k; ++r) v += w(k, r) * increment_(path[r + 1], s);
  }
  return v;
}

std::vector<std::string> game_sources(const GameSpec& spec) {
  std::set<std::string> tags;
  for (const auto* group : {&spec.b, &spec.b0})
    for (const auto& s : *group)
      for (const auto& [tag, w] : s.weights)
        if (w.cwiseAbs().maxCoeff() > 0.0) tags.insert(tag);
  return {tags.begin(), tags.end()};
}

ScenarioTree build_tree(const GameSpec& spec, int branching, long max_nodes) {
  return ScenarioTree(spec.grid, game_sources(spec), branching, max_nodes);
}

OracleSolution discrete_nash_kkt(const GameSpec& spec, const ScenarioTree& tree, long max_unknowns) {
  const int n = spec.grid.n;
  const int N = spec.N;
  const double dt = spec.grid.dt;
  const int nodes = tree.node_count();
  const long unknowns = static_cast<long>(N) * nodes;
  if (tree.levels() != n) throw Error(ErrorKind::ShapeError, "tree depth does not match the game grid");
  if (unknowns > max_unknowns) throw Error(ErrorKind::SizeExceeded, "oracle system exceeds the unknown budget");

  std::vector<MatrixXd> rows(N);
  for (int i = 0; i < N; ++i) rows[i] = player_quadratic(spec, i).middleRows(i * n, n);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(tree.leaf_count()) * N * N * n * n);
  for (int j = 0; j < tree.leaf_count(); ++j) {
    int leaf = tree.leaf(j);
    std::vector<int> path = tree.path_to(leaf);
    double p = tree.probability(leaf);
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < n; ++k)
        for (int q = 0; q < N; ++q)
          for (int l = 0; l < n; ++l) {
            double v = rows[i](k, q * n + l);
            if (v != 0.0) trip.emplace_back(i * nodes + path[k], q * nodes + path[l], p * v);
          }
  }
  Eigen::SparseMatrix<double> A(unknowns, unknowns);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();

  VectorXd rhs(unknowns);
  for (int x = 0; x < nodes; ++x)
    for (int i = 0; i < N; ++i)
      rhs(i * nodes + x) =
          tree.probability(x) * dt * (tree.node_value(spec.b[i], x) + tree.node_value(spec.b0[i], x) / N);

  OracleSolution out;
  out.unknowns = static_cast<int>(unknowns);

  // Each player's Hessian block, normalized by node probability and dt, must be positive definite.
  double min_eig = std::numeric_limits<double>::infinity();
  for (int i = 0; i < N; ++i) {
    Eigen::SparseMatrix<double> H = A.block(i * nodes, i * nodes, nodes, nodes);
    Eigen::SparseMatrix<double> shifted = H;
    for (int x = 0; x < nodes; ++x) shifted.coeffRef(x, x) -= kHessianFloor * dt * tree.probability(x);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(shifted);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
      throw Error(ErrorKind::NonConcave, "player " + std::to_string(i + 1) + " Hessian block is not positive definite");
    if (nodes <= 600) {
      VectorXd s(nodes);
      for (int x = 0; x < nodes; ++x) s(x) = 1.0 / std::sqrt(dt * tree.probability(x));
      MatrixXd Hn = s.asDiagonal() * MatrixXd(H) * s.asDiagonal();
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (Hn + Hn.transpose()), Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(rows[i].middleCols(i * n, n) / dt, Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
  }
  out.min_hessian_eigenvalue = min_eig;

  VectorXd x;
  if (unknowns <= 600) {
    MatrixXd Ad(A);
    Eigen::PartialPivLU<MatrixXd> lu(Ad);
    if (!(lu.rcond() > 1e-15)) throw Error(ErrorKind::SingularSystem, "oracle system is singular");
    x = lu.solve(rhs);
  } else {
    // Deepest nodes first: a node only couples to its ancestors and descendants,
    // so eliminating leaves upward creates no fill.
    Eigen::VectorXi order(unknowns);
    for (int v = 0; v < nodes; ++v)
      for (int i = 0; i < N; ++i) order(static_cast<long>(i) * nodes + v) = (nodes - 1 - v) * N + i;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P(order);
    Eigen::SparseMatrix<double> Ap = P * A * P.transpose();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::NaturalOrdering<int>> lu;
    lu.analyzePattern(Ap);
    lu.factorize(Ap);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "oracle system is singular");
    VectorXd y = lu.solve(P * rhs);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "oracle solve failed");
    x = P.inverse() * y;
  }
  out.kkt_residual = (A * x - rhs).cwiseAbs().maxCoeff();
  out.u.resize(N, nodes);
  for (int i = 0; i < N; ++i) out.u.row(i) = x.segment(static_cast<long>(i) * nodes, nodes).transpose();
  return out;
}

double compare(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorKind::ShapeError, "strategy tables differ in shape");
  return (a - b).cwiseAbs().maxCoeff();
}

double compare(const OracleSolution& oracle, const GameSpec& spec, const ScenarioTree& tree) {
  NashSolver solver(spec, NashOptions{});
  const int n = spec.grid.n;
  double worst = 0.0;
  for (int j = 0; j < tree.leaf_count(); ++j) {
    int leaf = tree.leaf(j);
    auto inc = tree.path_increments(leaf);
    IncrementLookup dW = [&inc](const std::string& tag) -> const double* {
      auto it = inc.find(tag);
      return it == inc.end() ? nullptr : it->second.data();
    };
    PathNash r = solver.solve_path(dW, false);
    std::vector<int> path = tree.path_to(leaf);
    for (int i = 0; i < spec.N; ++i)
      for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(r.u[i](k) - oracle.u(i, path[k])));
  }
  return worst;
}

double tree_objective(const GameSpec& spec, const ScenarioTree& tree, int i, const MatrixXd& u) {
  const int n = spec.grid.n;
  double total = 0.0;
  for (int j = 0; j < tree.leaf_count(); ++j) {
    int leaf = tree.leaf(j);
    std::vector<int> path = tree.path_to(leaf);
    auto inc = tree.path_increments(leaf);
    IncrementLookup dW = [&inc](const std::string& tag) -> const double* {
      auto it = inc.find(tag);
      return it == inc.end() ? nullptr : it->second.data();
    };
    std::vector<VectorXd> profile(spec.N, VectorXd(n));
    for (int q = 0; q < spec.N; ++q)
      for (int k = 0; k < n; ++k) profile[q](k) = u(q, path[k]);
    VectorXd bi = realize(spec.b[i], n, dW).values;
    VectorXd b0i = realize(spec.b0[i], n, dW).values;
    total += tree.probability(leaf) * objective_path(spec, i, profile, bi, b0i);
  }
  return total;
}

}  // namespace fredgame
