#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "fredgame/grid.hpp"
#include "fredgame/nplayer.hpp"
#include "fredgame/signals.hpp"

namespace fredgame {

// Finite filtration: every noise source moves by one of `branching` values per
// step (0; +-sqrt(dt); or -sqrt(3 dt), 0, sqrt(3 dt) with weights 1/6, 2/3, 1/6),
// matching the first two moments of a Gaussian increment. Decisions are taken
// at levels 0..n-1, so level k nodes carry the increments dW_0..dW_{k-1}.
class ScenarioTree {
 public:
  ScenarioTree(const TimeGrid& grid, std::vector<std::string> sources, int branching, long max_nodes = 200000);

  const TimeGrid& grid() const { return grid_; }
  int branching() const { return branching_; }
  const std::vector<std::string>& sources() const { return sources_; }
  int levels() const { return grid_.n; }
  int node_count() const { return static_cast<int>(parent_.size()); }
  int level_begin(int k) const { return offset_[k]; }
  int level_end(int k) const { return offset_[k + 1]; }
  int level_of(int node) const;
  int parent(int node) const { return parent_[node]; }
  int children_per_node() const { return fanout_; }
  double probability(int node) const { return prob_[node]; }
  int leaf_count() const { return level_end(levels() - 1) - level_begin(levels() - 1); }
  int leaf(int j) const { return level_begin(levels() - 1) + j; }

  // Node ids along the path from the root to `node`.
  std::vector<int> path_to(int node) const;
  // Increments dW_0..dW_{n-1} per source along the path to a leaf; the last is zero.
  std::map<std::string, VectorXd> path_increments(int leaf) const;
  // Value of a signal at a node of the same level.
  double node_value(const Signal& s, int node) const;

 private:
  TimeGrid grid_;
  std::vector<std::string> sources_;
  int branching_;
  int fanout_;
  std::vector<int> offset_;
  std::vector<int> parent_;
  std::vector<double> prob_;
  MatrixXd increment_;  // nodes x sources, move taken on the edge into the node
};

std::vector<std::string> game_sources(const GameSpec& spec);
ScenarioTree build_tree(const GameSpec& spec, int branching, long max_nodes = 200000);

struct OracleSolution {
  MatrixXd u;                  // N x nodes
  double min_hessian_eigenvalue = 0.0;
  double kkt_residual = 0.0;
  int unknowns = 0;
};

// Exact first-order conditions of every player over adapted strategies on the tree,
// assembled from the objective itself and solved as one linear system.
OracleSolution discrete_nash_kkt(const GameSpec& spec, const ScenarioTree& tree, long max_unknowns = 50000);

// Realized solver output on every leaf path, compared node by node.
double compare(const OracleSolution& oracle, const GameSpec& spec, const ScenarioTree& tree);
double compare(const MatrixXd& a, const MatrixXd& b);

// Exact objective of player i on the tree for node strategies u (N x nodes).
double tree_objective(const GameSpec& spec, const ScenarioTree& tree, int i, const MatrixXd& u);

}  // namespace fredgame
