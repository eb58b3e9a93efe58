#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fredgame/grid.hpp"
#include "fredgame/meanfield.hpp"
#include "fredgame/model_builders.hpp"
#include "fredgame/nplayer.hpp"
#include "fredgame/signals.hpp"
#include "json.hpp"

namespace fredgame::cli {

using json = nlohmann::json;

struct Tolerances {
  double admissibility = 1e-8;
  double consistency = 1e-6;
  double foc = 1e-8;
  double fredholm_residual = 1e-9;
  double oracle = 1e-8;
  double concavity = 1e-10;
  double mc_bands = 3.0;

  json to_json() const;
};

struct RunConfig {
  json echo;  // the parsed config after command line overrides
  std::string base_dir = ".";

  double T = 1.0;
  int n = 16;

  int paths = 1000;
  std::uint64_t seed = 42;
  int common_groups = 0;

  std::string kind;  // game | liquidation | systemic | advertising | meanfield
  json model;

  int threads = 1;
  std::string out = "out";
  std::vector<int> Ns = {4, 8, 16, 32, 64};
  std::optional<std::vector<double>> deviation;
  int branching = 2;
  int N_view = 1;
  int concavity_directions = 50;
  Tolerances tol;
};

// Parses JSON text; syntax errors become ConfigError with line and column.
json parse_json_text(const std::string& text, const std::string& source);
json read_json_file(const std::string& path);

// Validates the schema (unknown keys are rejected) and fills defaults.
RunConfig load_config(const json& j, const std::string& base_dir = ".");

KernelSpec parse_kernel(const json& j, const std::string& where, const std::string& base_dir);
SignalFamily parse_signal(const json& j, const std::string& where);
DelayMeasure parse_measure(const json& j, const std::string& where);

TimeGrid config_grid(const RunConfig& cfg);
bool is_model_kind(const std::string& kind);
// Finite game for the game and model kinds.
GameSpec build_game(const RunConfig& cfg, const TimeGrid& grid);
ModelGame build_model(const RunConfig& cfg, const TimeGrid& grid);
MFGSpec build_mfg(const RunConfig& cfg, const TimeGrid& grid);

}  // namespace fredgame::cli
