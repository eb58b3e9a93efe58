#include "fredgame/signals.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fredgame/errors.hpp"

namespace fredgame {

namespace {

void require_same_size(const Signal& a, const Signal& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeError, "signals have different lengths");
}

MatrixXd adapted(const MatrixXd& w) {
  MatrixXd r = w;
  for (int j = 0; j < r.rows(); ++j)
    for (int c = std::min<int>(j, r.cols()); c < r.cols(); ++c) r(j, c) = 0.0;
  return r;
}

VectorXd mean_values(const SignalFamily& f, const TimeGrid& grid, int points) {
  if (f.values) {
    if (f.values->size() != points)
      throw Error(ErrorKind::ShapeError, "signal values have length " + std::to_string(f.values->size()) +
                                             ", expected " + std::to_string(points));
    return *f.values;
  }
  VectorXd g(points);
  for (int j = 0; j < points; ++j) g(j) = f.a + f.b * grid.time(j);
  return g;
}

}  // namespace

bool Signal::deterministic() const {
  for (const auto& [tag, w] : weights)
    if (w.cwiseAbs().maxCoeff() > 0.0) return false;
  return true;
}

Signal deterministic_signal(const VectorXd& values) {
  Signal s;
  s.mean = values;
  return s;
}

Signal operator+(const Signal& a, const Signal& b) {
  require_same_size(a, b);
  Signal r = a;
  r.mean += b.mean;
  for (const auto& [tag, w] : b.weights) {
    auto it = r.weights.find(tag);
    if (it == r.weights.end())
      r.weights.emplace(tag, w);
    else
      it->second += w;
  }
  return r;
}

Signal operator*(double s, const Signal& a) {
  Signal r = a;
  r.mean *= s;
  for (auto& [tag, w] : r.weights) w *= s;
  return r;
}

Signal operator-(const Signal& a, const Signal& b) { return a + (-1.0) * b; }

Signal truncate_points(const Signal& s, int n) {
  if (n > s.size()) throw Error(ErrorKind::ShapeError, "cannot truncate to more points");
  Signal r;
  r.mean = s.mean.head(n);
  for (const auto& [tag, w] : s.weights) r.weights.emplace(tag, w.topRows(n));
  return r;
}

double expect_product(const Signal& f, int j, const Signal& g, int l, double dt) {
  double e = f.mean(j) * g.mean(l);
  for (const auto& [tag, wf] : f.weights) {
    auto it = g.weights.find(tag);
    if (it == g.weights.end()) continue;
    e += dt * wf.row(j).dot(it->second.row(l));
  }
  return e;
}

SignalFamily SignalFamily::constant(double value) { return affine(value, 0.0); }

SignalFamily SignalFamily::affine(double a, double b) {
  SignalFamily f;
  f.kind = SignalKind::Deterministic;
  f.a = a;
  f.b = b;
  return f;
}

SignalFamily SignalFamily::deterministic(const VectorXd& g) {
  SignalFamily f;
  f.kind = SignalKind::Deterministic;
  f.values = g;
  return f;
}

SignalFamily SignalFamily::martingale(double sigma, const std::string& noise, double x0) {
  SignalFamily f;
  f.kind = SignalKind::Martingale;
  f.sigma = sigma;
  f.noise = noise;
  f.x0 = x0;
  return f;
}

SignalFamily SignalFamily::ou(double kappa, double sigma, double x0, const std::string& noise) {
  SignalFamily f;
  f.kind = SignalKind::OU;
  f.kappa = kappa;
  f.sigma = sigma;
  f.x0 = x0;
  f.noise = noise;
  return f;
}

SignalFamily SignalFamily::brownian_weighted(const VectorXd& g, const MatrixXd& w, const std::string& noise) {
  SignalFamily f;
  f.kind = SignalKind::BrownianWeighted;
  f.values = g;
  f.w = w;
  f.noise = noise;
  return f;
}

SignalFamily SignalFamily::combination(std::vector<std::pair<double, SignalFamily>> terms) {
  SignalFamily f;
  f.kind = SignalKind::LinearCombination;
  f.terms = std::move(terms);
  return f;
}

std::string noise_tag(const std::string& noise, int player) {
  if (noise == "idiosyncratic" || noise == "idio") return "idio/" + std::to_string(player);
  return noise;
}

Signal lower_signal(const SignalFamily& f, const TimeGrid& grid, int player, int points) {
  const int n = grid.n;
  const double dt = grid.dt;
  if (points != n && points != n + 1) throw Error(ErrorKind::ShapeError, "signal points must be n or n + 1");
  Signal s;
  switch (f.kind) {
    case SignalKind::Deterministic:
      s.mean = mean_values(f, grid, points);
      return s;
    case SignalKind::Martingale: {
      s.mean = VectorXd::Constant(points, f.x0);
      MatrixXd w = MatrixXd::Zero(points, n);
      for (int j = 0; j < points; ++j)
        for (int r = 0; r < std::min(j, n); ++r) w(j, r) = f.sigma;
      if (f.sigma != 0.0) s.weights.emplace(noise_tag(f.noise, player), w);
      return s;
    }
    case SignalKind::OU: {
      if (f.kappa < 0.0) throw Error(ErrorKind::UnsupportedSignal, "OU mean reversion must be >= 0");
      // Exact transition: innovation over one cell has variance sigma^2 (1 - e^{-2 kappa dt}) / (2 kappa).
      double var = f.kappa > 0.0 ? -std::expm1(-2.0 * f.kappa * dt) / (2.0 * f.kappa) : dt;
      double c = f.sigma * std::sqrt(var / dt);
      s.mean.resize(points);
      MatrixXd w = MatrixXd::Zero(points, n);
      for (int j = 0; j < points; ++j) {
        s.mean(j) = f.x0 * std::exp(-f.kappa * grid.time(j));
        for (int r = 0; r < std::min(j, n); ++r) w(j, r) = c * std::exp(-f.kappa * (j - r - 1) * dt);
      }
      if (f.sigma != 0.0) s.weights.emplace(noise_tag(f.noise, player), w);
      return s;
    }
    case SignalKind::BrownianWeighted: {
      s.mean = mean_values(f, grid, points);
      if (f.w.rows() != points || f.w.cols() != n)
        throw Error(ErrorKind::ShapeError, "weight matrix must be points x n");
      MatrixXd w = adapted(f.w);
      if (w.cwiseAbs().maxCoeff() > 0.0) s.weights.emplace(noise_tag(f.noise, player), w);
      return s;
    }
    case SignalKind::LinearCombination: {
      s.mean = VectorXd::Zero(points);
      for (const auto& [coef, term] : f.terms) s = s + coef * lower_signal(term, grid, player, points);
      return s;
    }
  }
  throw Error(ErrorKind::UnsupportedSignal, "unknown signal family");
}

Signal lower_signal(const SignalFamily& family, const TimeGrid& grid, int player) {
  return lower_signal(family, grid, player, grid.n);
}

SignalPath realize(const Signal& s, int n, const IncrementLookup& dW) {
  const int m = s.size();
  SignalPath p;
  p.values = s.mean;
  p.surface = s.mean.transpose().replicate(n, 1);
  for (const auto& [tag, w] : s.weights) {
    const double* inc = dW(tag);
    if (inc == nullptr) {
      if (w.cwiseAbs().maxCoeff() == 0.0) continue;
      throw Error(ErrorKind::UnsupportedSignal, "no increments for noise tag " + tag);
    }
    Eigen::Map<const VectorXd> d(inc, n);
    p.values.noalias() += w * d;
    // surface(i, j) accumulates w(j, r) dW_r for r < i.
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(m);
    for (int i = 0; i < n; ++i) {
      if (i > 0) acc += d(i - 1) * w.col(i - 1).transpose();
      p.surface.row(i) += acc;
    }
    p.noise_tags.push_back(tag);
  }
  return p;
}

SignalPath deterministic_path(const VectorXd& values, int n) {
  SignalPath p;
  p.values = values;
  p.surface = values.transpose().replicate(n, 1);
  return p;
}

SignalPath combine(const std::vector<std::pair<double, const SignalPath*>>& paths) {
  if (paths.empty()) throw Error(ErrorKind::ShapeError, "nothing to combine");
  SignalPath r;
  r.values = VectorXd::Zero(paths.front().second->values.size());
  r.surface = MatrixXd::Zero(paths.front().second->surface.rows(), paths.front().second->surface.cols());
  for (const auto& [coef, p] : paths) {
    if (p->values.size() != r.values.size() || p->surface.rows() != r.surface.rows())
      throw Error(ErrorKind::ShapeError, "combined paths live on different grids");
    r.values += coef * p->values;
    r.surface += coef * p->surface;
    for (const auto& t : p->noise_tags)
      if (std::find(r.noise_tags.begin(), r.noise_tags.end(), t) == r.noise_tags.end()) r.noise_tags.push_back(t);
  }
  return r;
}

NoiseBundle::NoiseBundle(const TimeGrid& grid, int paths, std::vector<std::string> tags, std::uint64_t seed,
                         int common_groups)
    : grid_(grid), paths_(paths), tags_(std::move(tags)), seed_(seed), groups_(common_groups) {
  if (paths < 1) throw Error(ErrorKind::ConfigError, "need at least one path");
  if (groups_ > 0 && paths % groups_ != 0)
    throw Error(ErrorKind::ConfigError, "path count must be a multiple of the common group count");
  const int n = grid.n;
  const int per_group = groups_ > 0 ? paths / groups_ : 1;
  for (const auto& t : tags_) {
    bool grouped = groups_ > 0 && t == "common";
    data_.emplace(t, MatrixXd(n, grouped ? groups_ : paths));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt));
  for (int p = 0; p < paths; ++p) {
    for (const auto& t : tags_) {
      bool grouped = groups_ > 0 && t == "common";
      if (grouped && p % per_group != 0) continue;
      int col = grouped ? p / per_group : p;
      auto& m = data_.at(t);
      for (int k = 0; k < n; ++k) m(k, col) = normal(rng);
    }
  }
}

const double* NoiseBundle::increments(const std::string& tag, int path) const {
  auto it = data_.find(tag);
  if (it == data_.end()) return nullptr;
  bool grouped = groups_ > 0 && tag == "common";
  int col = grouped ? group_of(path) : path;
  return it->second.col(col).data();
}

IncrementLookup NoiseBundle::lookup(int path) const {
  return [this, path](const std::string& tag) { return increments(tag, path); };
}

SignalPath simulate(const SignalFamily& family, const TimeGrid& grid, const NoiseBundle& bundle, int path,
                    int player) {
  if (path < 0 || path >= bundle.paths()) throw Error(ErrorKind::ShapeError, "path index out of range");
  return realize(lower_signal(family, grid, player), grid.n, bundle.lookup(path));
}

}  // namespace fredgame
