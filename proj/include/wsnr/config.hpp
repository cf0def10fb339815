#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsnr/recovery.hpp"
#include "wsnr/topology.hpp"

namespace wsnr {

// Costs in abstract energy units; the engine accounts in integer
// micro-units so per-node debits sum exactly.
struct EnergyModel {
  double e_init = 3.0;
  double c_tx = 0.002;
  double c_rx = 0.001;
  double c_wake = 0.001;
  double c_sense = 0.0;
  double c_active = 0.7;  // per time unit while Working
};

inline std::int64_t to_micro(double units) { return std::llround(units * 1e6); }
inline double from_micro(std::int64_t micro) { return static_cast<double>(micro) * 1e-6; }

struct SimConfig {
  std::uint32_t rows = 10;
  std::uint32_t cols = 10;
  std::uint32_t n_sensors = 200;
  double r_sense = std::sqrt(0.5);
  double r_comm = 1.5;
  std::uint64_t seed = 0;

  double lambda_base = 0.1;
  std::uint32_t wake_multiplier = 1;
  RecoveryMode recovery_mode = RecoveryMode::MultiRegister;
  double p_fail = 0.0;
  double sense_period = 1.0;
  EnergyModel energy;
  double t_max = 2000.0;
  double reliability_R = 0.9;

  double reply_window = 0.01;
  // First wake-ups are spread uniformly over (0, bootstrap_window].
  double bootstrap_window = 1.0;
  double lambda_max_factor = 100.0;
  // Test constructions: constant sleep period, common deterministic
  // lifetime, and nodes that start Working.
  std::optional<double> fixed_sleep;
  std::optional<double> node_lifetime;
  std::vector<NodeId> bootstrap_working;

  GridSpec grid() const { return {rows, cols, n_sensors, r_sense, r_comm, seed}; }
  double lambda_max() const { return lambda_base * lambda_max_factor; }
};

inline std::string to_string(RecoveryMode m) {
  return m == RecoveryMode::MultiRegister ? "MultiRegister" : "XorParity";
}

inline RecoveryMode recovery_mode_from_string(const std::string& s) {
  if (s == "MultiRegister" || s == "SUM" || s == "sum") return RecoveryMode::MultiRegister;
  if (s == "XorParity" || s == "XOR" || s == "xor") return RecoveryMode::XorParity;
  throw ConfigError("unknown recovery_mode '" + s + "'");
}

inline void validate(const SimConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (c.rows == 0 || c.cols == 0) fail("zero-area grid");
  if (c.n_sensors == 0) fail("n_sensors must be >= 1");
  if (!(c.r_sense > 0.0) || !(c.r_comm > 0.0)) fail("radii must be positive");
  if (!(c.lambda_base > 0.0)) fail("lambda_base must be positive");
  if (c.wake_multiplier == 0) fail("wake_multiplier must be >= 1");
  if (!(c.p_fail >= 0.0 && c.p_fail <= 1.0)) fail("p_fail must lie in [0, 1]");
  if (!(c.sense_period > 0.0)) fail("sense_period must be positive");
  if (!(c.t_max > 0.0)) fail("t_max must be positive");
  if (!(c.reliability_R > 0.0 && c.reliability_R <= 1.0)) fail("reliability_R must lie in (0, 1]");
  if (!(c.reply_window > 0.0)) fail("reply_window must be positive");
  if (!(c.bootstrap_window > 0.0)) fail("bootstrap_window must be positive");
  if (!(c.lambda_max_factor >= 1.0)) fail("lambda_max_factor must be >= 1");
  const EnergyModel& e = c.energy;
  if (e.e_init < 0 || e.c_tx < 0 || e.c_rx < 0 || e.c_wake < 0 || e.c_sense < 0 || e.c_active < 0) {
    fail("energy costs must be non-negative");
  }
  if (c.fixed_sleep && !(*c.fixed_sleep > 0.0)) fail("fixed_sleep must be positive");
  if (c.node_lifetime && !(*c.node_lifetime > 0.0)) fail("node_lifetime must be positive");
  for (NodeId id : c.bootstrap_working) {
    if (id >= c.n_sensors) fail("bootstrap_working id out of range");
  }
}

inline nlohmann::ordered_json to_json(const SimConfig& c) {
  nlohmann::ordered_json j;
  j["rows"] = c.rows;
  j["cols"] = c.cols;
  j["n_sensors"] = c.n_sensors;
  j["r_sense"] = c.r_sense;
  j["r_comm"] = c.r_comm;
  j["seed"] = c.seed;
  j["lambda_base"] = c.lambda_base;
  j["wake_multiplier"] = c.wake_multiplier;
  j["recovery_mode"] = to_string(c.recovery_mode);
  j["p_fail"] = c.p_fail;
  j["sense_period"] = c.sense_period;
  j["energy"] = {{"e_init", c.energy.e_init}, {"c_tx", c.energy.c_tx},
                 {"c_rx", c.energy.c_rx},     {"c_wake", c.energy.c_wake},
                 {"c_sense", c.energy.c_sense}, {"c_active", c.energy.c_active}};
  j["t_max"] = c.t_max;
  j["reliability_R"] = c.reliability_R;
  j["reply_window"] = c.reply_window;
  j["bootstrap_window"] = c.bootstrap_window;
  j["lambda_max_factor"] = c.lambda_max_factor;
  if (c.fixed_sleep) j["fixed_sleep"] = *c.fixed_sleep;
  if (c.node_lifetime) j["node_lifetime"] = *c.node_lifetime;
  if (!c.bootstrap_working.empty()) j["bootstrap_working"] = c.bootstrap_working;
  return j;
}

/// Overlays the fields present in `j` onto `base`. Unknown keys are
/// rejected so that typos in config files surface as errors.
inline SimConfig apply_json(SimConfig c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "rows") c.rows = v.get<std::uint32_t>();
      else if (key == "cols") c.cols = v.get<std::uint32_t>();
      else if (key == "n_sensors") c.n_sensors = v.get<std::uint32_t>();
      else if (key == "r_sense") c.r_sense = v.get<double>();
      else if (key == "r_comm") c.r_comm = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "lambda_base") c.lambda_base = v.get<double>();
      else if (key == "wake_multiplier") c.wake_multiplier = v.get<std::uint32_t>();
      else if (key == "recovery_mode") c.recovery_mode = recovery_mode_from_string(v.get<std::string>());
      else if (key == "p_fail") c.p_fail = v.get<double>();
      else if (key == "sense_period") c.sense_period = v.get<double>();
      else if (key == "t_max") c.t_max = v.get<double>();
      else if (key == "reliability_R") c.reliability_R = v.get<double>();
      else if (key == "reply_window") c.reply_window = v.get<double>();
      else if (key == "bootstrap_window") c.bootstrap_window = v.get<double>();
      else if (key == "lambda_max_factor") c.lambda_max_factor = v.get<double>();
      else if (key == "fixed_sleep") c.fixed_sleep = v.get<double>();
      else if (key == "node_lifetime") c.node_lifetime = v.get<double>();
      else if (key == "bootstrap_working") c.bootstrap_working = v.get<std::vector<NodeId>>();
      else if (key == "energy") {
        for (const auto& [ek, ev] : v.items()) {
          double& slot = ek == "e_init"    ? c.energy.e_init
                         : ek == "c_tx"    ? c.energy.c_tx
                         : ek == "c_rx"    ? c.energy.c_rx
                         : ek == "c_wake"  ? c.energy.c_wake
                         : ek == "c_sense" ? c.energy.c_sense
                         : ek == "c_active"
                             ? c.energy.c_active
                             : throw ConfigError("unknown energy field '" + ek + "'");
          slot = ev.get<double>();
        }
      } else {
        throw ConfigError("unknown config field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

}  // namespace wsnr
