#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fredgame/grid.hpp"

namespace fredgame {

// Linear functional of Gaussian increments on the grid:
//   f_j = mean_j + sum_tag sum_{r<j} w_tag(j, r) dW^tag_r,
// so E_{t_i} f_j keeps only the increments with r < min(i, j).
// Points j = 0..m-1 with m = n (ordinary) or m = n + 1 (includes t_n = T).
struct Signal {
  VectorXd mean;
  std::map<std::string, MatrixXd> weights;  // m x n each

  int size() const { return static_cast<int>(mean.size()); }
  bool deterministic() const;
};

Signal deterministic_signal(const VectorXd& values);
Signal operator+(const Signal& a, const Signal& b);
Signal operator-(const Signal& a, const Signal& b);
Signal operator*(double s, const Signal& a);
// Keeps points 0..n-1 of an extended signal.
Signal truncate_points(const Signal& s, int n);
// E[f_j g_l] with dW ~ N(0, dt).
double expect_product(const Signal& f, int j, const Signal& g, int l, double dt);

enum class SignalKind { Deterministic, Martingale, OU, BrownianWeighted, LinearCombination };

struct SignalFamily {
  SignalKind kind = SignalKind::Deterministic;
  std::optional<VectorXd> values;  // Deterministic / BrownianWeighted mean
  double a = 0.0;                  // affine mean a + b t when values is empty
  double b = 0.0;
  double sigma = 0.0;
  double kappa = 0.0;
  double x0 = 0.0;
  MatrixXd w;                      // BrownianWeighted weights
  std::string noise = "idiosyncratic";
  std::vector<std::pair<double, SignalFamily>> terms;

  static SignalFamily constant(double value);
  static SignalFamily affine(double a, double b);
  static SignalFamily deterministic(const VectorXd& g);
  static SignalFamily martingale(double sigma, const std::string& noise, double x0 = 0.0);
  static SignalFamily ou(double kappa, double sigma, double x0, const std::string& noise);
  static SignalFamily brownian_weighted(const VectorXd& g, const MatrixXd& w, const std::string& noise);
  static SignalFamily combination(std::vector<std::pair<double, SignalFamily>> terms);
};

// Resolves the family's noise label to a tag: "common", "idio/<player>", or the label itself.
std::string noise_tag(const std::string& noise, int player);

// Lowers a family to its linear form on `points` grid nodes (n or n + 1).
// Non-adapted weights (r >= j) are dropped: only E_{t_j} f_j enters any objective.
Signal lower_signal(const SignalFamily& family, const TimeGrid& grid, int player, int points);
Signal lower_signal(const SignalFamily& family, const TimeGrid& grid, int player = 1);

// One realized scenario with its conditional surface m(i, j) = E_{t_i} f_j.
struct SignalPath {
  VectorXd values;   // m
  MatrixXd surface;  // n x m
  std::vector<std::string> noise_tags;
};

using IncrementLookup = std::function<const double*(const std::string&)>;

SignalPath realize(const Signal& s, int n, const IncrementLookup& dW);
SignalPath deterministic_path(const VectorXd& values, int n);
SignalPath combine(const std::vector<std::pair<double, const SignalPath*>>& paths);

// Gaussian increments N(0, dt) for a fixed list of noise tags and path count.
// With common_groups > 0 the "common" tag is shared by consecutive blocks of
// paths, which lets conditional averages over the idiosyncratic noise be taken.
class NoiseBundle {
 public:
  static constexpr const char* kRngName = "std::mt19937_64 + std::normal_distribution (libstdc++)";

  NoiseBundle(const TimeGrid& grid, int paths, std::vector<std::string> tags, std::uint64_t seed,
              int common_groups = 0);

  int paths() const { return paths_; }
  std::uint64_t seed() const { return seed_; }
  int common_groups() const { return groups_; }
  int group_of(int path) const { return groups_ > 0 ? path / (paths_ / groups_) : path; }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<std::string>& tags() const { return tags_; }

  const double* increments(const std::string& tag, int path) const;
  IncrementLookup lookup(int path) const;

 private:
  TimeGrid grid_;
  int paths_;
  std::vector<std::string> tags_;
  std::uint64_t seed_;
  int groups_;
  std::map<std::string, MatrixXd> data_;  // n x columns
};

SignalPath simulate(const SignalFamily& family, const TimeGrid& grid, const NoiseBundle& bundle, int path,
                    int player = 1);

}  // namespace fredgame
