#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "fredgame/errors.hpp"

namespace fredgame::cli {

namespace {

Error config_error(const std::string& what) { return Error(ErrorKind::ConfigError, what); }

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw config_error(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw config_error("unknown key '" + it.key() + "' in " + where);
}

double number(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw config_error(where + "." + key + " must be a number");
  return j.at(key).get<double>();
}

double required_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw config_error(where + "." + key + " is required");
  return number(j, key, 0.0, where);
}

int integer(const json& j, const char* key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw config_error(where + "." + key + " must be an integer");
  return j.at(key).get<int>();
}

std::string text(const json& j, const char* key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw config_error(where + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) throw config_error(where + " must be a number or a non-empty array");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw config_error(where + " must contain numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

std::vector<double> per_player(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return {fallback};
  return numbers(j.at(key), where + "." + key);
}

VectorXd vector_of(const json& j, const std::string& where) {
  std::vector<double> v = numbers(j, where);
  return Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd matrix_of(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw config_error(where + " must be a non-empty array of rows");
  const size_t cols = j.at(0).is_array() ? j.at(0).size() : 0;
  MatrixXd m(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j.at(r).is_array() || j.at(r).size() != cols) throw config_error(where + " rows must have equal length");
    for (size_t c = 0; c < cols; ++c) {
      if (!j.at(r).at(c).is_number()) throw config_error(where + " must contain numbers");
      m(r, c) = j.at(r).at(c).get<double>();
    }
  }
  return m;
}

std::vector<SignalFamily> signals(const json& j, const std::string& where) {
  if (j.is_array()) {
    std::vector<SignalFamily> v;
    for (size_t i = 0; i < j.size(); ++i) v.push_back(parse_signal(j.at(i), where + "[" + std::to_string(i) + "]"));
    if (v.empty()) throw config_error(where + " must not be empty");
    return v;
  }
  return {parse_signal(j, where)};
}

}  // namespace

json Tolerances::to_json() const {
  return json{{"admissibility", admissibility}, {"consistency", consistency},
              {"foc", foc},                     {"fredholm_residual", fredholm_residual},
              {"oracle", oracle},               {"concavity", concavity},
              {"mc_bands", mc_bands}};
}

json parse_json_text(const std::string& body, const std::string& source) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    size_t offset = std::min(e.byte > 0 ? e.byte - 1 : 0, body.size());
    size_t line = 1, column = 1;
    for (size_t i = 0; i < offset; ++i) {
      if (body[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw config_error(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": malformed JSON");
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

KernelSpec parse_kernel(const json& j, const std::string& where, const std::string& base_dir) {
  if (j.is_string()) return parse_kernel(json{{"family", j}}, where, base_dir);
  only_keys(j, {"family", "c", "rho", "alpha", "tau", "scale", "file", "values"}, where);
  std::string family = text(j, "family", "", where);
  KernelSpec k;
  if (family == "zero") {
    k = KernelSpec::zero();
  } else if (family == "constant") {
    k = KernelSpec::constant(number(j, "c", 1.0, where));
  } else if (family == "exponential") {
    k = KernelSpec::exponential(number(j, "c", 1.0, where), number(j, "rho", 1.0, where));
  } else if (family == "power_law") {
    k = KernelSpec::power_law(number(j, "c", 1.0, where), required_number(j, "alpha", where));
  } else if (family == "delay_indicator") {
    k = KernelSpec::delay_indicator(required_number(j, "tau", where));
  } else if (family == "tabulated") {
    if (j.contains("file")) {
      std::string file = text(j, "file", "", where);
      if (!file.empty() && file[0] != '/') file = base_dir + "/" + file;
      k = KernelSpec::tabulated(load_kernel_csv(file));
    } else if (j.contains("values")) {
      k = KernelSpec::tabulated(matrix_of(j.at("values"), where + ".values"));
    } else {
      throw config_error(where + " tabulated kernel needs file or values");
    }
  } else {
    throw config_error(where + ".family must be zero, constant, exponential, power_law, delay_indicator or tabulated");
  }
  k.scale = number(j, "scale", 1.0, where);
  return k;
}

SignalFamily parse_signal(const json& j, const std::string& where) {
  if (j.is_number()) return SignalFamily::constant(j.get<double>());
  only_keys(j, {"kind", "value", "a", "b", "values", "sigma", "kappa", "x0", "noise", "weights", "terms"}, where);
  std::string kind = text(j, "kind", "", where);
  std::string noise = text(j, "noise", "idiosyncratic", where);
  if (kind == "constant") return SignalFamily::constant(required_number(j, "value", where));
  if (kind == "affine") return SignalFamily::affine(number(j, "a", 0.0, where), number(j, "b", 0.0, where));
  if (kind == "deterministic") {
    if (!j.contains("values")) throw config_error(where + ".values is required");
    return SignalFamily::deterministic(vector_of(j.at("values"), where + ".values"));
  }
  if (kind == "martingale")
    return SignalFamily::martingale(required_number(j, "sigma", where), noise, number(j, "x0", 0.0, where));
  if (kind == "ou")
    return SignalFamily::ou(required_number(j, "kappa", where), required_number(j, "sigma", where),
                            number(j, "x0", 0.0, where), noise);
  if (kind == "brownian_weighted") {
    if (!j.contains("values") || !j.contains("weights"))
      throw config_error(where + " needs values and weights");
    return SignalFamily::brownian_weighted(vector_of(j.at("values"), where + ".values"),
                                           matrix_of(j.at("weights"), where + ".weights"), noise);
  }
  if (kind == "combination") {
    if (!j.contains("terms") || !j.at("terms").is_array()) throw config_error(where + ".terms must be an array");
    std::vector<std::pair<double, SignalFamily>> terms;
    for (size_t i = 0; i < j.at("terms").size(); ++i) {
      const json& t = j.at("terms").at(i);
      std::string w = where + ".terms[" + std::to_string(i) + "]";
      only_keys(t, {"coef", "signal"}, w);
      if (!t.contains("signal")) throw config_error(w + ".signal is required");
      terms.emplace_back(number(t, "coef", 1.0, w), parse_signal(t.at("signal"), w + ".signal"));
    }
    return SignalFamily::combination(terms);
  }
  throw config_error(where +
                     ".kind must be constant, affine, deterministic, martingale, ou, brownian_weighted or combination");
}

DelayMeasure parse_measure(const json& j, const std::string& where) {
  only_keys(j, {"atoms", "density"}, where);
  DelayMeasure m;
  if (j.contains("atoms")) {
    const json& a = j.at("atoms");
    if (!a.is_array()) throw config_error(where + ".atoms must be an array of [tau, mass]");
    for (const auto& p : a) {
      if (!p.is_array() || p.size() != 2 || !p.at(0).is_number() || !p.at(1).is_number())
        throw config_error(where + ".atoms entries must be [tau, mass]");
      m.atoms.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
  }
  if (j.contains("density")) m.density = vector_of(j.at("density"), where + ".density");
  return m;
}

RunConfig load_config(const json& j, const std::string& base_dir) {
  only_keys(j, {"grid", "noise", "model", "run"}, "config");
  RunConfig c;
  c.echo = j;
  c.base_dir = base_dir;
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    only_keys(g, {"T", "n"}, "grid");
    c.T = number(g, "T", c.T, "grid");
    c.n = integer(g, "n", c.n, "grid");
  }
  if (j.contains("noise")) {
    const json& nz = j.at("noise");
    only_keys(nz, {"paths", "seed", "common_groups"}, "noise");
    c.paths = integer(nz, "paths", c.paths, "noise");
    if (nz.contains("seed")) {
      if (!nz.at("seed").is_number_unsigned()) throw config_error("noise.seed must be a nonnegative integer");
      c.seed = nz.at("seed").get<std::uint64_t>();
    }
    c.common_groups = integer(nz, "common_groups", c.common_groups, "noise");
  }
  if (!j.contains("model")) throw config_error("config.model is required");
  c.model = j.at("model");
  if (!c.model.is_object()) throw config_error("model must be an object");
  c.kind = text(c.model, "kind", "", "model");
  static const std::set<std::string> kinds = {"game", "liquidation", "systemic", "advertising", "meanfield"};
  if (!kinds.count(c.kind))
    throw config_error("model.kind must be game, liquidation, systemic, advertising or meanfield");
  if (j.contains("run")) {
    const json& r = j.at("run");
    only_keys(r, {"threads", "out", "Ns", "deviation", "branching", "N_view", "concavity_directions", "tolerances"},
              "run");
    c.threads = integer(r, "threads", c.threads, "run");
    c.out = text(r, "out", c.out, "run");
    if (r.contains("Ns")) {
      if (!r.at("Ns").is_array() || r.at("Ns").empty()) throw config_error("run.Ns must be a non-empty array");
      c.Ns.clear();
      for (const auto& x : r.at("Ns")) {
        if (!x.is_number_integer() || x.get<int>() < 1) throw config_error("run.Ns must hold positive integers");
        c.Ns.push_back(x.get<int>());
      }
    }
    if (r.contains("deviation")) c.deviation = numbers(r.at("deviation"), "run.deviation");
    c.branching = integer(r, "branching", c.branching, "run");
    c.N_view = integer(r, "N_view", c.N_view, "run");
    c.concavity_directions = integer(r, "concavity_directions", c.concavity_directions, "run");
    if (r.contains("tolerances")) {
      const json& t = r.at("tolerances");
      only_keys(t, {"admissibility", "consistency", "foc", "fredholm_residual", "oracle", "concavity", "mc_bands"},
                "run.tolerances");
      c.tol.admissibility = number(t, "admissibility", c.tol.admissibility, "run.tolerances");
      c.tol.consistency = number(t, "consistency", c.tol.consistency, "run.tolerances");
      c.tol.foc = number(t, "foc", c.tol.foc, "run.tolerances");
      c.tol.fredholm_residual = number(t, "fredholm_residual", c.tol.fredholm_residual, "run.tolerances");
      c.tol.oracle = number(t, "oracle", c.tol.oracle, "run.tolerances");
      c.tol.concavity = number(t, "concavity", c.tol.concavity, "run.tolerances");
      c.tol.mc_bands = number(t, "mc_bands", c.tol.mc_bands, "run.tolerances");
    }
  }
  if (c.paths < 1) throw config_error("noise.paths must be >= 1");
  if (c.common_groups < 0) throw config_error("noise.common_groups must be >= 0");
  if (c.threads < 1) throw config_error("run.threads must be >= 1");
  if (c.branching < 1 || c.branching > 3) throw config_error("run.branching must be 1, 2 or 3");
  if (c.N_view < 1) throw config_error("run.N_view must be >= 1");
  if (c.concavity_directions < 0) throw config_error("run.concavity_directions must be >= 0");
  return c;
}

TimeGrid config_grid(const RunConfig& cfg) { return build_grid(cfg.T, cfg.n); }

bool is_model_kind(const std::string& kind) {
  return kind == "liquidation" || kind == "systemic" || kind == "advertising";
}

GameSpec build_game(const RunConfig& cfg, const TimeGrid& grid) {
  if (is_model_kind(cfg.kind)) return build_model(cfg, grid).game;
  if (cfg.kind != "game") throw config_error("model.kind " + cfg.kind + " does not define a finite game");
  const json& m = cfg.model;
  only_keys(m, {"kind", "N", "lambda", "A1", "A2hat", "A3", "A4", "b", "b0", "c"}, "model");
  const int N = integer(m, "N", 2, "model");
  auto kernel = [&](const char* key) {
    return m.contains(key) ? parse_kernel(m.at(key), std::string("model.") + key, cfg.base_dir) : KernelSpec::zero();
  };
  std::vector<SignalFamily> b = m.contains("b") ? signals(m.at("b"), "model.b")
                                                : std::vector<SignalFamily>{SignalFamily::constant(0.0)};
  SignalFamily b0 = m.contains("b0") ? parse_signal(m.at("b0"), "model.b0") : SignalFamily::constant(0.0);
  std::vector<double> c;
  if (m.contains("c")) {
    c = numbers(m.at("c"), "model.c");
    if (c.size() == 1) c.assign(N, c[0]);
  }
  GameSpec spec = make_game(grid, N, number(m, "lambda", 1.0, "model"), kernel("A1"), kernel("A2hat"), kernel("A3"),
                            b, b0, c);
  if (m.contains("A4")) spec.A4 = discretize_kernel(kernel("A4"), grid);
  return spec;
}

ModelGame build_model(const RunConfig& cfg, const TimeGrid& grid) {
  const json& m = cfg.model;
  if (cfg.kind == "liquidation") {
    only_keys(m, {"kind", "N", "lambda", "phi", "varrho", "propagator", "x0", "price"}, "model");
    LiquidationParams p;
    p.N = integer(m, "N", p.N, "model");
    p.lambda = number(m, "lambda", p.lambda, "model");
    p.phi = number(m, "phi", p.phi, "model");
    p.varrho = number(m, "varrho", p.varrho, "model");
    if (m.contains("propagator")) p.propagator = parse_kernel(m.at("propagator"), "model.propagator", cfg.base_dir);
    p.x0 = per_player(m, "x0", 1.0, "model");
    if (m.contains("price")) p.price = signals(m.at("price"), "model.price");
    return build_liquidation_game(p, grid);
  }
  if (cfg.kind == "systemic") {
    only_keys(m, {"kind", "N", "beta", "epsilon", "c", "sigma", "x0", "h", "common_sigma", "nu"}, "model");
    SystemicParams p;
    p.N = integer(m, "N", p.N, "model");
    p.beta = number(m, "beta", p.beta, "model");
    p.epsilon = number(m, "epsilon", p.epsilon, "model");
    p.c = number(m, "c", p.c, "model");
    p.sigma = per_player(m, "sigma", 0.0, "model");
    p.x0 = per_player(m, "x0", 0.0, "model");
    p.h = per_player(m, "h", 0.0, "model");
    p.common_sigma = number(m, "common_sigma", 0.0, "model");
    p.nu = m.contains("nu") ? parse_measure(m.at("nu"), "model.nu") : DelayMeasure{{{0.0, 1.0}}, std::nullopt};
    return build_systemic_game(p, grid);
  }
  if (cfg.kind == "advertising") {
    only_keys(m, {"kind", "N", "lambda", "beta", "sigma", "x0", "h", "forgetting", "competition"}, "model");
    AdvertisingParams p;
    p.N = integer(m, "N", p.N, "model");
    p.lambda = number(m, "lambda", p.lambda, "model");
    p.beta = number(m, "beta", p.beta, "model");
    p.sigma = per_player(m, "sigma", 0.0, "model");
    p.x0 = per_player(m, "x0", 0.0, "model");
    p.h = per_player(m, "h", 0.0, "model");
    if (m.contains("forgetting")) p.forgetting = parse_measure(m.at("forgetting"), "model.forgetting");
    if (m.contains("competition")) p.competition = parse_measure(m.at("competition"), "model.competition");
    return build_advertising_game(p, grid);
  }
  throw config_error("model.kind " + cfg.kind + " is not a model builder");
}

MFGSpec build_mfg(const RunConfig& cfg, const TimeGrid& grid) {
  if (cfg.kind != "meanfield") throw config_error("this command needs model.kind meanfield");
  const json& m = cfg.model;
  only_keys(m, {"kind", "lambda", "A1", "A2hat", "A3", "beta", "beta0", "b0", "spread", "h_model"}, "model");
  auto kernel = [&](const char* key) {
    return m.contains(key) ? parse_kernel(m.at(key), std::string("model.") + key, cfg.base_dir) : KernelSpec::zero();
  };
  auto signal = [&](const char* key) {
    return m.contains(key) ? parse_signal(m.at(key), std::string("model.") + key) : SignalFamily::constant(0.0);
  };
  MFGSpec s = make_mfg(grid, number(m, "lambda", 1.0, "model"), kernel("A1"), kernel("A2hat"), kernel("A3"),
                       signal("beta"), signal("beta0"), signal("b0"), number(m, "spread", 0.0, "model"));
  s.h_model = text(m, "h_model", s.h_model, "model");
  validate_mfg(s);
  return s;
}

}  // namespace fredgame::cli
