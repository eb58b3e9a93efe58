#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "config.hpp"
#include "fredgame/errors.hpp"
#include "helpers.hpp"

using namespace fredgame;
using namespace fredgame::cli;
using testing::max_abs;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() { return fs::temp_directory_path() / ("fredgame_test_" + std::to_string(::getpid())); }

struct ScratchCleanup {
  ~ScratchCleanup() {
    std::error_code ec;
    fs::remove_all(scratch_dir(), ec);
  }
} cleanup;

fs::path scratch(const std::string& name) {
  fs::path p = scratch_dir() / name;
  fs::create_directories(p.parent_path());
  return p;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream(p) << body;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_tool(const std::string& args, const fs::path& err = {}) {
  std::string cmd = std::string(FREDGAME_TOOL) + " " + args + " > /dev/null 2> " +
                    (err.empty() ? std::string("/dev/null") : err.string());
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json game_config() {
  return json::parse(R"({
    "grid": {"T": 1.0, "n": 8},
    "noise": {"paths": 50, "seed": 3},
    "model": {"kind": "game", "N": 2, "lambda": 0.5,
              "A2hat": {"family": "exponential", "c": 1.0, "rho": 1.0},
              "b": {"kind": "martingale", "sigma": 0.5, "x0": 1.0, "noise": "idiosyncratic"}},
    "run": {"concavity_directions": 5}
  })");
}

}  // namespace

TEST_CASE("defaults and overrides") {
  RunConfig c = load_config(game_config());
  CHECK(c.n == 8);
  CHECK(c.paths == 50);
  CHECK(c.seed == 3);
  CHECK(c.kind == "game");
  CHECK(c.threads == 1);
  CHECK(c.tol.foc == 1e-8);
  CHECK(c.tol.to_json().at("consistency") == 1e-6);
  CHECK(c.echo == game_config());
  GameSpec s = build_game(c, config_grid(c));
  CHECK(s.N == 2);
  CHECK(s.lambda == 0.5);
}

TEST_CASE("unknown keys are rejected") {
  json j = game_config();
  j["run"]["colour"] = 1;
  CHECK_THROWS_AS(load_config(j), Error);
  json k = game_config();
  k["extra"] = {};
  CHECK_THROWS_AS(load_config(k), Error);
  json m = game_config();
  m["model"]["A9"] = "zero";
  RunConfig c = load_config(m);
  CHECK_THROWS_AS(build_game(c, config_grid(c)), Error);
}

TEST_CASE("malformed JSON reports line and column") {
  try {
    parse_json_text("{\n  \"grid\": {\"n\": }\n}", "cfg.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    CHECK(std::string(e.what()).find("cfg.json:2:") != std::string::npos);
  }
}

TEST_CASE("kernels from config") {
  TimeGrid g = build_grid(1.0, 4);
  CHECK(parse_kernel("zero", "k", ".").family == KernelFamily::Zero);
  KernelSpec e = parse_kernel(json{{"family", "exponential"}, {"c", 2.0}, {"rho", 0.5}}, "k", ".");
  CHECK(e.c == 2.0);
  CHECK(e.rho == 0.5);
  CHECK_THROWS_AS(parse_kernel(json{{"family", "power_law"}}, "k", "."), Error);
  CHECK_THROWS_AS(parse_kernel(json{{"family", "gaussian"}}, "k", "."), Error);

  json values = json::array({json::array({0, 0, 0, 0}), json::array({1, 0, 0, 0}), json::array({2, 1, 0, 0}),
                             json::array({3, 2, 1, 0})});
  KernelSpec t = parse_kernel(json{{"family", "tabulated"}, {"values", values}}, "k", ".");
  CHECK(discretize_kernel(t, g)(3, 0) == 3.0);

  fs::path csv = scratch("kernel.csv");
  write_file(csv, "0,0,0,0\n1,0,0,0\n2,1,0,0\n3,2,1,0\n");
  KernelSpec f = parse_kernel(json{{"family", "tabulated"}, {"file", "kernel.csv"}}, "k", csv.parent_path().string());
  CHECK(max_abs(discretize_kernel(f, g).values - discretize_kernel(t, g).values) == 0.0);
}

TEST_CASE("signals and measures from config") {
  CHECK(parse_signal(2.5, "s").a == 2.5);
  SignalFamily m = parse_signal(json{{"kind", "martingale"}, {"sigma", 0.3}, {"noise", "common"}}, "s");
  CHECK(m.kind == SignalKind::Martingale);
  CHECK(m.noise == "common");
  SignalFamily c = parse_signal(
      json::parse(R"({"kind": "combination", "terms": [{"coef": 2, "signal": 1.0}, {"signal": {"kind": "affine", "b": 1}}]})"),
      "s");
  CHECK(c.terms.size() == 2);
  CHECK(c.terms[0].first == 2.0);
  CHECK_THROWS_AS(parse_signal(json{{"kind", "ou"}, {"sigma", 1.0}}, "s"), Error);
  CHECK_THROWS_AS(parse_signal(json{{"kind", "levy"}}, "s"), Error);

  DelayMeasure nu = parse_measure(json::parse(R"({"atoms": [[0, 1], [0.5, -1]], "density": [0.1, 0.2]})"), "nu");
  CHECK(nu.atoms.size() == 2);
  CHECK(nu.density->size() == 2);
  CHECK_THROWS_AS(parse_measure(json::parse(R"({"atoms": [[0]]})"), "nu"), Error);
}

TEST_CASE("example configs load") {
  for (const char* name : {"game", "liquidation", "systemic", "advertising", "meanfield"}) {
    RunConfig c = load_config(read_json_file(std::string(FREDGAME_CONFIGS) + "/" + name + ".json"));
    TimeGrid g = config_grid(c);
    if (c.kind == "meanfield")
      CHECK_NOTHROW(build_mfg(c, g));
    else
      CHECK_NOTHROW(validate_game(build_game(c, g)));
  }
}

TEST_CASE("command line: zero kernels give b over 2 lambda") {
  json j = json::parse(R"({
    "grid": {"T": 1.0, "n": 4},
    "noise": {"paths": 1, "seed": 1},
    "model": {"kind": "game", "N": 2, "lambda": 0.5, "b": [{"kind": "affine", "a": 1, "b": 2}, 3.0]}
  })");
  fs::path cfg = scratch("zero.json"), out = scratch("zero_out");
  write_file(cfg, j.dump());
  REQUIRE(run_tool("solve --config " + cfg.string() + " --out " + out.string()) == 0);
  std::istringstream csv(read_file(out / "strategies.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,player,mean,std");
  int rows = 0;
  while (std::getline(csv, line)) {
    double t, mean, sd;
    int player;
    CHECK(std::sscanf(line.c_str(), "%lf,%d,%lf,%lf", &t, &player, &mean, &sd) == 4);
    CHECK(mean == doctest::Approx(player == 1 ? 1 + 2 * t : 3.0));
    CHECK(sd == 0.0);
    ++rows;
  }
  CHECK(rows == 8);
  json manifest = json::parse(read_file(out / "manifest.json"));
  CHECK(manifest.at("seed") == 1);
  CHECK(manifest.contains("version"));
  CHECK(manifest.at("tolerances").contains("foc"));
  CHECK(manifest.at("config").at("model") == j.at("model"));
  json diag = json::parse(read_file(out / "diagnostics.json"));
  CHECK(diag.contains("foc_residual"));
  CHECK(diag.contains("condition_mean"));
}

TEST_CASE("command line: exit codes") {
  fs::path bad = scratch("bad.json"), err = scratch("bad.err");
  write_file(bad, "{\n  \"grid\": {\"T\": 1,\n  \"n\": }\n}\n");
  CHECK(run_tool("solve --config " + bad.string(), err) == 2);
  CHECK(read_file(err).find("bad.json:3:") != std::string::npos);

  json unknown = game_config();
  unknown["noise"]["path"] = 3;
  fs::path u = scratch("unknown.json");
  write_file(u, unknown.dump());
  CHECK(run_tool("solve --config " + u.string()) == 2);
  CHECK(run_tool("solve --config " + scratch("missing.json").string()) == 2);
  CHECK(run_tool("frobnicate") == 2);

  json big = game_config();
  big["grid"]["n"] = 40;
  fs::path b = scratch("big.json");
  write_file(b, big.dump());
  CHECK(run_tool("oracle-check --config " + b.string() + " --out " + scratch("big_out").string()) == 3);
}

TEST_CASE("command line: validate") {
  fs::path good = scratch("good.json"), out = scratch("good_out");
  write_file(good, game_config().dump());
  CHECK(run_tool("validate --oracle --config " + good.string() + " --out " + out.string()) == 0);
  json report = json::parse(read_file(out / "validate.json"));
  CHECK(report.at("pass") == true);
  CHECK(report.at("checks").size() >= 6);

  json asym = game_config();
  asym["model"]["A3"] = {{"family", "constant"}, {"c", 0.3}};
  asym["model"]["A4"] = {{"family", "constant"}, {"c", 0.1}};
  fs::path a = scratch("asym.json"), ao = scratch("asym_out");
  write_file(a, asym.dump());
  CHECK(run_tool("validate --config " + a.string() + " --out " + ao.string()) == 1);
  bool flagged = false;
  json asym_report = json::parse(read_file(ao / "validate.json"));
  for (const auto& c : asym_report.at("checks"))
    if (c.at("name").get<std::string>() == "self_adjointness") flagged = !c.at("pass").get<bool>();
  CHECK(flagged);

  json power = game_config();
  power["model"]["A2hat"] = {{"family", "power_law"}, {"c", 1.0}, {"alpha", 0.6}};
  fs::path p = scratch("power.json"), po = scratch("power_out");
  write_file(p, power.dump());
  CHECK(run_tool("validate --config " + p.string() + " --out " + po.string()) == 1);
  std::string text = read_file(po / "validate.json");
  CHECK(text.find("InadmissibleKernel") != std::string::npos);
  CHECK(run_tool("solve --config " + p.string() + " --out " + po.string()) == 2);
}

TEST_CASE("command line: output does not depend on the thread count") {
  json j = json::parse(read_file(std::string(FREDGAME_CONFIGS) + "/systemic.json"));
  j["noise"]["paths"] = 64;
  fs::path cfg = scratch("threads.json");
  write_file(cfg, j.dump());
  fs::path one = scratch("t1"), many = scratch("t4");
  REQUIRE(run_tool("solve --config " + cfg.string() + " --threads 1 --out " + one.string()) == 0);
  REQUIRE(run_tool("solve --config " + cfg.string() + " --threads 4 --out " + many.string()) == 0);
  CHECK(read_file(one / "strategies.csv") == read_file(many / "strategies.csv"));
  CHECK(read_file(one / "states.csv") == read_file(many / "states.csv"));
}

TEST_CASE("command line: liquidation terminal inventory falls with the penalty") {
  double previous = 1e300;
  for (double varrho : {1.0, 10.0, 100.0}) {
    json j = json::parse(read_file(std::string(FREDGAME_CONFIGS) + "/liquidation.json"));
    j["model"]["N"] = 1;
    j["model"]["x0"] = 1.0;
    j["model"]["varrho"] = varrho;
    j["model"].erase("price");
    j["noise"]["paths"] = 1;
    fs::path cfg = scratch("liq.json"), out = scratch("liq_out");
    write_file(cfg, j.dump());
    REQUIRE(run_tool("solve --config " + cfg.string() + " --out " + out.string()) == 0);
    double terminal = std::abs(json::parse(read_file(out / "diagnostics.json")).at("terminal_state").at(0).get<double>());
    CHECK(terminal < previous);
    previous = terminal;
  }
}

TEST_CASE("command line: convergence with a single N") {
  json j = json::parse(read_file(std::string(FREDGAME_CONFIGS) + "/meanfield.json"));
  j["run"]["Ns"] = {8};
  j["noise"]["paths"] = 20;
  fs::path cfg = scratch("conv.json"), out = scratch("conv_out");
  write_file(cfg, j.dump());
  CHECK(run_tool("converge --config " + cfg.string() + " --out " + out.string()) == 0);
  std::string csv = read_file(out / "convergence.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "N,mse_mean,mse_player,slope_running");
  std::string row = csv.substr(csv.find('\n') + 1);
  CHECK(row.back() == '\n');
  CHECK(row[row.size() - 2] == ',');
}
