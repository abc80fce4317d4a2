#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflip/bench.hpp"
#include "qflip/measurement.hpp"
#include "qflip/ppo.hpp"
#include "qflip/rl_env.hpp"

namespace qflip {

inline constexpr int kSchemaVersion = 1;

// Sweep settings. Grids are explicit value lists.
struct SweepConfig {
  std::string type = "1d";  // 1d | hybrid | dephasing
  std::string axis = "detuning";  // 1d: rabi | detuning
  std::vector<double> grid;       // 1d axis values or dephasing factors / flip counts
  std::vector<double> rabi_grid;      // hybrid
  std::vector<double> detuning_grid;  // hybrid
  std::string mode = "flip_repetition";  // dephasing: rabi_time | flip_repetition
  std::optional<double> t2_s;
  long shots = 2000;  // 0 = exact probabilities
  int sta_steps = 1000;
  long feedback_shots = 2000;
  bool svg = false;
};

// One self-describing run configuration. Physical quantities carry their unit
// in the key name; omega_hz and similar are cyclic frequencies.
struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = available cores
  rl::EnvConfig env;
  ppo::PpoHyperparams ppo;
  ppo::TrainingSchedule schedule{20000, 100000, 10, 24};
  ppo::NetworkShape network;
  measurement::DetectorModel detector;
  SweepConfig sweep;

  void validate() const;
  int resolved_threads() const;
};

// Default grid: -0.25 .. 0.25 in steps of 0.025.
std::vector<double> default_error_grid();

RunConfig default_run_config();

// Throws ConfigError on unknown keys, wrong types or a schema mismatch.
// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);

// FNV-1a 64-bit hash of the canonical JSON dump, as 16 hex digits.
std::string fingerprint(const nlohmann::json& j);
std::string fingerprint(const RunConfig& cfg);

nlohmann::json to_json(const rl::EnvConfig& env);
rl::EnvConfig env_from_json(const nlohmann::json& j);

}  // namespace qflip
