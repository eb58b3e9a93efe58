#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "fredgame/errors.hpp"
#include "fredgame/meanfield.hpp"
#include "fredgame/model_builders.hpp"
#include "fredgame/nplayer.hpp"
#include "fredgame/oracle.hpp"
#include "fredgame/parallel.hpp"

namespace fs = std::filesystem;
using namespace fredgame;
using namespace fredgame::cli;

namespace {

constexpr const char* kToolName = "fredgame";
constexpr const char* kToolVersion = "1.0.0";

std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json finite(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

struct Output {
  fs::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& body) {
    fs::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + (dir / name).string());
    out << body;
    files.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
};

void write_manifest(Output& out, const RunConfig& cfg, const std::string& command, bool oracle) {
  json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config"] = cfg.echo;
  m["seed"] = cfg.seed;
  m["rng"] = NoiseBundle::kRngName;
  m["paths"] = cfg.paths;
  m["grid"] = {{"T", cfg.T}, {"n", cfg.n}};
  m["oracle"] = oracle;
  m["tolerances"] = cfg.tol.to_json();
  m["files"] = out.files;
  out.write_json("manifest.json", m);
}

std::vector<std::string> mfg_tags(int players) {
  std::vector<std::string> tags = {"common"};
  for (int i = 1; i <= players; ++i) tags.push_back("idio/" + std::to_string(i));
  return tags;
}

// Per-time mean and standard deviation over paths.
void moments(const std::vector<VectorXd>& xs, VectorXd& mean, VectorXd& sd) {
  const int M = static_cast<int>(xs.size());
  mean = VectorXd::Zero(xs[0].size());
  for (const auto& x : xs) mean += x / M;
  VectorXd var = VectorXd::Zero(mean.size());
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  sd = M > 1 ? VectorXd((var / (M - 1)).cwiseSqrt()) : VectorXd::Zero(mean.size());
}

std::string strategy_rows(const TimeGrid& grid, const std::vector<std::pair<int, std::vector<VectorXd>>>& series) {
  std::string csv = "t,player,mean,std\n";
  for (int k = 0; k < grid.n; ++k)
    for (const auto& [player, xs] : series) {
      VectorXd mean, sd;
      moments(xs, mean, sd);
      csv += fmt(grid.time(k)) + "," + std::to_string(player) + "," + fmt(mean(k)) + "," + fmt(sd(k)) + "\n";
    }
  return csv;
}

struct OracleOutcome {
  json report;
  bool pass = true;
};

OracleOutcome oracle_compare(const RunConfig& cfg, const GameSpec& spec) {
  ScenarioTree tree = build_tree(spec, cfg.branching);
  OracleSolution o = discrete_nash_kkt(spec, tree);
  double diff = compare(o, spec, tree);
  OracleOutcome r;
  r.pass = diff <= cfg.tol.oracle;
  r.report = {{"max_abs_difference", diff},
              {"tolerance", cfg.tol.oracle},
              {"nodes", tree.node_count()},
              {"unknowns", o.unknowns},
              {"branching", cfg.branching},
              {"kkt_residual", o.kkt_residual},
              {"min_hessian_eigenvalue", o.min_hessian_eigenvalue},
              {"pass", r.pass}};
  return r;
}

int run_solve(const RunConfig& cfg, Output& out, bool oracle) {
  TimeGrid grid = config_grid(cfg);
  json diag;
  diag["seed"] = cfg.seed;
  diag["config"] = cfg.echo;
  int code = 0;
  if (cfg.kind == "meanfield") {
    if (oracle) throw Error(ErrorKind::ConfigError, "--oracle needs a finite game");
    MFGSpec spec = build_mfg(cfg, grid);
    NoiseBundle bundle(grid, cfg.paths, mfg_tags(cfg.N_view), cfg.seed, cfg.common_groups);
    MFGSolution sol = solve_infinite(spec, cfg.N_view, bundle, cfg.threads);
    std::vector<std::pair<int, std::vector<VectorXd>>> series = {{0, sol.mu}};
    for (int i = 0; i < cfg.N_view; ++i) {
      std::vector<VectorXd> xs;
      for (const auto& v : sol.v) xs.push_back(v[i]);
      series.emplace_back(i + 1, xs);
    }
    out.write("strategies.csv", strategy_rows(grid, series));
    diag["foc_residual_mean_field"] = sol.max_foc_mu;
    diag["foc_residual_players"] = sol.max_foc_v;
    diag["h_model"] = spec.h_model;
    if (sol.consistency) {
      diag["consistency"] = {{"max_abs_gap", sol.consistency->max_abs_gap},
                             {"max_gap_over_stderr", sol.consistency->max_ratio},
                             {"pass", sol.consistency->pass}};
      if (!sol.consistency->pass) code = 1;
    }
  } else {
    std::optional<ModelGame> model;
    GameSpec spec = is_model_kind(cfg.kind) ? (model = build_model(cfg, grid))->game : build_game(cfg, grid);
    // The forward state of a model can see noise that its reduced game does not.
    std::vector<std::string> tags = model ? mfg_tags(spec.N) : game_sources(spec);
    NoiseBundle bundle(grid, cfg.paths, tags, cfg.seed, cfg.common_groups);
    NashOptions opts;
    opts.consistency_tol = cfg.tol.consistency;
    opts.threads = cfg.threads;
    NashSolution sol = solve_nash(spec, bundle, opts);
    std::vector<std::pair<int, std::vector<VectorXd>>> series;
    for (int i = 0; i < spec.N; ++i) {
      std::vector<VectorXd> xs;
      for (const auto& u : sol.u) xs.push_back(u[i]);
      series.emplace_back(i + 1, xs);
    }
    out.write("strategies.csv", strategy_rows(grid, series));
    diag["mean_consistency_gap"] = sol.max_mean_gap;
    diag["foc_residual"] = sol.max_foc;
    diag["condition_mean"] = sol.mean_condition;
    diag["condition_player"] = sol.player_condition;
    diag["self_adjoint"] = symmetric_cross(spec);
    diag["reduced"] = spec.reduced;
    diag["objective_constants"] = spec.c;
    if (sol.max_foc > cfg.tol.foc) code = 1;
    if (model) {
      // State per node including t_n = T.
      const int M = bundle.paths();
      std::string csv = "t,player,mean,std\n";
      json terminal = json::array();
      std::vector<std::vector<VectorXd>> states(spec.N, std::vector<VectorXd>(M));
      parallel_for(M, cfg.threads, [&](int p) {
        MatrixXd U(spec.N, grid.n);
        for (int i = 0; i < spec.N; ++i) U.row(i) = sol.u[p][i].transpose();
        for (int i = 0; i < spec.N; ++i) states[i][p] = model_state(*model, i, U, bundle.lookup(p));
      });
      std::vector<VectorXd> mean(spec.N), sd(spec.N);
      for (int i = 0; i < spec.N; ++i) {
        moments(states[i], mean[i], sd[i]);
        terminal.push_back(mean[i](grid.n));
      }
      for (int k = 0; k <= grid.n; ++k)
        for (int i = 0; i < spec.N; ++i)
          csv += fmt(k * grid.dt) + "," + std::to_string(i + 1) + "," + fmt(mean[i](k)) + "," + fmt(sd[i](k)) + "\n";
      out.write("states.csv", csv);
      diag["model"] = model_name(model->kind);
      diag["terminal_state"] = terminal;
    }
    if (oracle) {
      OracleOutcome o = oracle_compare(cfg, spec);
      diag["oracle"] = o.report;
      if (!o.pass) code = 1;
    }
  }
  out.write_json("diagnostics.json", diag);
  return code;
}

int run_converge(const RunConfig& cfg, Output& out) {
  TimeGrid grid = config_grid(cfg);
  MFGSpec spec = build_mfg(cfg, grid);
  int maxN = *std::max_element(cfg.Ns.begin(), cfg.Ns.end());
  NoiseBundle bundle(grid, cfg.paths, mfg_tags(maxN), cfg.seed);
  ConvergenceStudy st = convergence_study(spec, cfg.Ns, bundle, cfg.threads);
  std::string csv = "N,mse_mean,mse_player,slope_running\n";
  std::vector<double> xs, ys;
  for (const auto& r : st.rows) {
    xs.push_back(r.N);
    ys.push_back(r.mse_mean);
    csv += std::to_string(r.N) + "," + fmt(r.mse_mean) + "," + fmt(r.mse_player) + "," + fmt(loglog_slope(xs, ys)) + "\n";
  }
  out.write("convergence.csv", csv);
  double lo = spec.h_model == "zero" ? -2.5 : -1.4;
  double hi = spec.h_model == "zero" ? -1.5 : -0.6;
  bool fitted = !std::isnan(st.slope_mean);
  bool pass = !fitted || (st.slope_mean >= lo && st.slope_mean <= hi);
  out.write_json("diagnostics.json", {{"slope_mean", finite(st.slope_mean)},
                                      {"slope_player", finite(st.slope_player)},
                                      {"h_model", spec.h_model},
                                      {"bracket", {lo, hi}},
                                      {"pass", pass},
                                      {"seed", cfg.seed},
                                      {"config", cfg.echo}});
  return pass ? 0 : 1;
}

int run_eps_nash(const RunConfig& cfg, Output& out) {
  TimeGrid grid = config_grid(cfg);
  MFGSpec spec = build_mfg(cfg, grid);
  int maxN = *std::max_element(cfg.Ns.begin(), cfg.Ns.end());
  NoiseBundle bundle(grid, cfg.paths, mfg_tags(maxN), cfg.seed);
  std::optional<VectorXd> dev;
  if (cfg.deviation) {
    std::vector<double> d = *cfg.deviation;
    if (d.size() == 1) d.assign(grid.n, d[0]);
    dev = Eigen::Map<VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  }
  EpsNashStudy st = eps_nash_study(spec, cfg.Ns, dev, bundle, cfg.threads);
  std::string csv = "N,gap,mc_stderr\n";
  bool within_bands = true;
  for (const auto& r : st.rows) {
    csv += std::to_string(r.N) + "," + fmt(r.gain) + "," + fmt(r.std_error) + "\n";
    if (r.gain > cfg.tol.mc_bands * r.std_error) within_bands = false;
  }
  out.write("eps_nash.csv", csv);
  bool decays = !std::isnan(st.slope) && st.slope <= -0.4;
  bool pass = within_bands || decays;
  out.write_json("diagnostics.json", {{"slope_positive_part", finite(st.slope)},
                                      {"deviation", dev ? "fixed" : "best_response"},
                                      {"pass", pass},
                                      {"seed", cfg.seed},
                                      {"config", cfg.echo}});
  return pass ? 0 : 1;
}

struct Checks {
  json list = json::array();
  bool ok = true;

  void add(const std::string& name, bool pass, double value, double threshold, const std::string& note = "") {
    json c = {{"name", name}, {"pass", pass}, {"value", finite(value)}, {"threshold", finite(threshold)}};
    if (!note.empty()) c["note"] = note;
    list.push_back(c);
    ok = ok && pass;
  }
};

void validate_game_checks(const RunConfig& cfg, const GameSpec& spec, Checks& checks, bool oracle) {
  const TimeGrid& grid = spec.grid;
  checks.add("self_adjointness", symmetric_cross(spec) || spec.reduced,
             (spec.A3.values - spec.A4.values).cwiseAbs().maxCoeff(), 0.0,
             spec.reduced ? "reduced game, backward cross kernel kept separate" : "");
  const int M = std::min(cfg.paths, 64);
  NoiseBundle bundle(grid, M, game_sources(spec), cfg.seed);
  NashSolver solver(spec);
  double res = 0.0;
  for (int p = 0; p < M; ++p) {
    auto dW = bundle.lookup(p);
    std::vector<SignalPath> b, b0;
    for (int i = 0; i < spec.N; ++i) {
      b.push_back(realize(spec.b[i], grid.n, dW));
      b0.push_back(realize(spec.b0[i], grid.n, dW));
    }
    SignalPath f = solver.mean_driver(b, b0);
    VectorXd ubar = solver.solve_mean(f).v;
    MatrixXd surf = solver.mean_solver().conditional_solution(f, ubar);
    res = std::max(res, solver.mean_solver().residual(f, ubar, surf));
    SignalPath d = solver.mean_conditional_drive(b[0], b0[0], ubar, surf);
    VectorXd u = solver.solve_player(d);
    res = std::max(res, solver.player_solver().residual(d, u, solver.player_solver().conditional_solution(d, u)));
  }
  checks.add("fredholm_residual", res <= cfg.tol.fredholm_residual, res, cfg.tol.fredholm_residual);
  NashOptions opts;
  opts.consistency_tol = std::numeric_limits<double>::infinity();
  opts.threads = cfg.threads;
  NashSolution sol = solve_nash(spec, bundle, opts);
  checks.add("mean_consistency", sol.max_mean_gap <= cfg.tol.consistency, sol.max_mean_gap, cfg.tol.consistency);
  checks.add("foc_residual", sol.max_foc <= cfg.tol.foc, sol.max_foc, cfg.tol.foc);
  StrategyProfile base = [&](int p) { return sol.u[p]; };
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd;
  double worst = -std::numeric_limits<double>::infinity();
  bool concave = true;
  for (int r = 0; r < cfg.concavity_directions; ++r) {
    VectorXd h(grid.n);
    for (int k = 0; k < grid.n; ++k) h(k) = nd(rng);
    ConcavityResult c = concavity_check(spec, r % spec.N, base, h, bundle, 1e-2, cfg.tol.concavity);
    worst = std::max(worst, c.second_difference);
    concave = concave && c.pass;
  }
  if (cfg.concavity_directions > 0) checks.add("concavity", concave, worst, cfg.tol.concavity);
  if (oracle) {
    OracleOutcome o = oracle_compare(cfg, spec);
    checks.add("oracle", o.pass, o.report["max_abs_difference"].get<double>(), cfg.tol.oracle);
  }
}

int run_validate(const RunConfig& cfg, Output& out, bool oracle) {
  TimeGrid grid = config_grid(cfg);
  Checks checks;
  try {
    if (cfg.kind == "meanfield") {
      MFGSpec spec = build_mfg(cfg, grid);
      checks.add("admissibility", true, 0.0, cfg.tol.admissibility);
      MFGSpec zero3 = spec;
      zero3.A3 = zero_kernel(grid);
      int groups = cfg.common_groups >= 2 ? cfg.common_groups : 0;
      NoiseBundle bundle(grid, cfg.paths, mfg_tags(1), cfg.seed, groups);
      MFGSolution sol = solve_generic(spec, bundle, cfg.threads);
      checks.add("foc_residual_mean_field", sol.max_foc_mu <= cfg.tol.foc, sol.max_foc_mu, cfg.tol.foc);
      checks.add("foc_residual_player", sol.max_foc_v <= cfg.tol.foc, sol.max_foc_v, cfg.tol.foc);
      if (sol.consistency)
        checks.add("consistency_condition", sol.consistency->pass, sol.consistency->max_ratio, cfg.tol.mc_bands);
      // With A3 removed the two solution maps coincide.
      MFGSolver z(zero3);
      SignalPath x = realize(limit_signal(spec), grid.n, bundle.lookup(0));
      double coherence = (z.map_F(x).v - z.map_G(x).v).cwiseAbs().maxCoeff();
      checks.add("map_coherence", coherence <= 1e-12, coherence, 1e-12);
    } else {
      GameSpec spec = build_game(cfg, grid);
      validate_game(spec, cfg.tol.admissibility);
      checks.add("admissibility", true, 0.0, cfg.tol.admissibility);
      validate_game_checks(cfg, spec, checks, oracle);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    checks.add(e.kind() == ErrorKind::InadmissibleKernel ? "admissibility" : error_name(e.kind()), false,
               std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), e.what());
  }
  out.write_json("validate.json", {{"checks", checks.list}, {"pass", checks.ok}});
  for (const auto& c : checks.list)
    std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "\n";
  return checks.ok ? 0 : 1;
}

int run_oracle_check(const RunConfig& cfg, Output& out) {
  TimeGrid grid = config_grid(cfg);
  GameSpec spec = build_game(cfg, grid);
  OracleOutcome o = oracle_compare(cfg, spec);
  out.write_json("oracle.json", o.report);
  std::cout << (o.pass ? "PASS" : "FAIL") << " oracle max abs difference " << fmt(o.report["max_abs_difference"].get<double>())
            << "\n";
  return o.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nash equilibria of linear-quadratic Volterra games"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  int paths = -1, grid_n = -1, threads = -1;
  long long seed = -1;
  bool oracle = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--paths", paths, "number of Monte Carlo paths");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--grid-n", grid_n, "number of grid points");
    sub->add_option("--threads", threads, "worker threads");
  };
  CLI::App* solve = app.add_subcommand("solve", "solve the configured game");
  CLI::App* converge = app.add_subcommand("converge", "N-player to mean-field convergence study");
  CLI::App* eps = app.add_subcommand("eps-nash", "epsilon-Nash gap of the mean-field strategies");
  CLI::App* validate = app.add_subcommand("validate", "run the invariant checks");
  CLI::App* oracle_check = app.add_subcommand("oracle-check", "compare with the scenario tree oracle");
  for (CLI::App* sub : {solve, converge, eps, validate, oracle_check}) common(sub);
  solve->add_flag("--oracle", oracle, "also compare with the scenario tree oracle");
  validate->add_flag("--oracle", oracle, "include the scenario tree oracle check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json j = read_json_file(config_path);
    if (paths > 0 || seed >= 0 || grid_n > 0 || threads > 0 || !out_dir.empty()) {
      if (paths > 0) j["noise"]["paths"] = paths;
      if (seed >= 0) j["noise"]["seed"] = static_cast<std::uint64_t>(seed);
      if (grid_n > 0) j["grid"]["n"] = grid_n;
      if (threads > 0) j["run"]["threads"] = threads;
      if (!out_dir.empty()) j["run"]["out"] = out_dir;
    }
    fs::path base = fs::path(config_path).parent_path();
    RunConfig cfg = load_config(j, base.empty() ? "." : base.string());
    // The thread count does not change any output, so it is kept out of the echo.
    if (cfg.echo.contains("run")) cfg.echo["run"].erase("threads");
    Output out{cfg.out, {}};
    std::string command = app.get_subcommands().front()->get_name();
    int code = 0;
    if (*solve)
      code = run_solve(cfg, out, oracle);
    else if (*converge)
      code = run_converge(cfg, out);
    else if (*eps)
      code = run_eps_nash(cfg, out);
    else if (*validate)
      code = run_validate(cfg, out, oracle);
    else
      code = run_oracle_check(cfg, out);
    write_manifest(out, cfg, command, oracle);
    return code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
