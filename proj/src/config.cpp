#include "qflip/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "qflip/errors.hpp"

namespace qflip {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Reads known keys from one JSON object and rejects anything else.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get_optional(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T value{};
    get(key, value);
    out = value;
  }

  void section(const std::string& key, const std::function<void(Section&)>& body) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Section inner(j_.at(key), path_ + "." + key);
    body(inner);
    inner.finish();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string phase_name(rl::Phase p) { return p == rl::Phase::Pretrain ? "pretrain" : "finetune"; }

rl::Phase parse_phase(const std::string& s) {
  if (s == "pretrain") return rl::Phase::Pretrain;
  if (s == "finetune") return rl::Phase::Finetune;
  throw ConfigError("env.phase: expected pretrain or finetune, got '" + s + "'");
}

std::string arch_name(ppo::Architecture a) {
  return a == ppo::Architecture::SharedTrunk ? "shared" : "split";
}

ppo::Architecture parse_arch(const std::string& s) {
  if (s == "shared") return ppo::Architecture::SharedTrunk;
  if (s == "split") return ppo::Architecture::SplitNetworks;
  throw ConfigError("network.architecture: expected shared or split, got '" + s + "'");
}

void read_env(Section& s, rl::EnvConfig& env) {
  double omega_hz = env.omega / kTwoPi;
  double ratio = env.delta_max / env.omega;
  std::string phase = phase_name(env.phase);
  s.get("n_steps", env.n_steps);
  s.get("omega_hz", omega_hz);
  s.get("total_time_s", env.total_time);
  s.get("delta_max_over_omega", ratio);
  s.get("phase", phase);
  s.get("rabi_error_half_width", env.rabi_half_width);
  s.get("detuning_error_half_width", env.detuning_half_width);
  s.get_optional("t2_s", env.t2);
  s.get("success_threshold", env.success_threshold);
  s.get("terminal_bonus", env.terminal_bonus);
  s.get("lindblad_substeps", env.substeps);
  env.omega = kTwoPi * omega_hz;
  env.delta_max = ratio * env.omega;
  env.phase = parse_phase(phase);
}

}  // namespace

std::vector<double> default_error_grid() {
  std::vector<double> g;
  for (int k = -10; k <= 10; ++k) g.push_back(0.025 * k);
  return g;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.sweep.grid = default_error_grid();
  cfg.sweep.rabi_grid = default_error_grid();
  cfg.sweep.detuning_grid = default_error_grid();
  return cfg;
}

void RunConfig::validate() const {
  if (schema_version != kSchemaVersion) {
    throw ConfigError(fmt::format("schema_version {} is not supported (expected {})",
                                  schema_version, kSchemaVersion));
  }
  if (threads < 0) throw ConfigError("threads must be >= 0");
  env.validate();
  ppo.validate();
  detector.validate();
  if (schedule.pretrain_episodes < 0 || schedule.finetune_episodes < 0) {
    throw ConfigError("schedule: episode counts must be non-negative");
  }
  if (schedule.eval_interval < 1) throw ConfigError("schedule.eval_interval_batches must be >= 1");
  if (schedule.eval_error_samples < 0) throw ConfigError("schedule.eval_error_samples must be >= 0");
  ppo::PolicyNetwork probe(network);  // validates the shape
  (void)probe;
  static const std::set<std::string> types = {"1d", "hybrid", "dephasing"};
  if (!types.count(sweep.type)) throw ConfigError("sweep.type must be 1d, hybrid or dephasing");
  if (sweep.axis != "rabi" && sweep.axis != "detuning") {
    throw ConfigError("sweep.axis must be rabi or detuning");
  }
  if (sweep.mode != "rabi_time" && sweep.mode != "flip_repetition") {
    throw ConfigError("sweep.mode must be rabi_time or flip_repetition");
  }
  if (sweep.shots < 0 || sweep.feedback_shots < 0) throw ConfigError("sweep shots must be >= 0");
  if (sweep.sta_steps < 1) throw ConfigError("sweep.sta_steps must be >= 1");
  if (sweep.t2_s && !(*sweep.t2_s > 0.0)) throw ConfigError("sweep.t2_s must be positive");
}

int RunConfig::resolved_threads() const {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg = default_run_config();
  Section root(j, "config");
  root.get("schema_version", cfg.schema_version);
  if (j.contains("schema_version") && cfg.schema_version != kSchemaVersion) {
    throw ConfigError(fmt::format("schema_version {} is not supported (expected {})",
                                  cfg.schema_version, kSchemaVersion));
  }
  if (!j.contains("schema_version")) throw ConfigError("config: schema_version is required");
  root.get("seed", cfg.seed);
  root.get("threads", cfg.threads);
  root.section("env", [&](Section& s) { read_env(s, cfg.env); });
  root.section("ppo", [&](Section& s) {
    s.get("learning_rate", cfg.ppo.learning_rate);
    s.get("clip_epsilon", cfg.ppo.clip_epsilon);
    s.get("gamma", cfg.ppo.gamma);
    s.get("gae_lambda", cfg.ppo.gae_lambda);
    s.get("update_epochs", cfg.ppo.update_epochs);
    s.get("value_coef", cfg.ppo.value_coef);
    s.get("entropy_coef", cfg.ppo.entropy_coef);
    s.get("batch_episodes", cfg.ppo.batch_episodes);
    s.get("minibatch_steps", cfg.ppo.minibatch_size);
  });
  root.section("schedule", [&](Section& s) {
    s.get("pretrain_episodes", cfg.schedule.pretrain_episodes);
    s.get("finetune_episodes", cfg.schedule.finetune_episodes);
    s.get("eval_interval_batches", cfg.schedule.eval_interval);
    s.get("eval_error_samples", cfg.schedule.eval_error_samples);
  });
  root.section("network", [&](Section& s) {
    std::string arch = arch_name(cfg.network.architecture);
    s.get("hidden", cfg.network.hidden);
    s.get("architecture", arch);
    cfg.network.architecture = parse_arch(arch);
  });
  root.section("detector", [&](Section& s) {
    s.get("lambda_dark", cfg.detector.lambda_dark);
    s.get("lambda_bright", cfg.detector.lambda_bright);
    s.get("threshold", cfg.detector.threshold);
    s.get("prep_error", cfg.detector.prep_error);
  });
  root.section("sweep", [&](Section& s) {
    s.get("type", cfg.sweep.type);
    s.get("axis", cfg.sweep.axis);
    s.get("grid", cfg.sweep.grid);
    s.get("rabi_grid", cfg.sweep.rabi_grid);
    s.get("detuning_grid", cfg.sweep.detuning_grid);
    s.get("mode", cfg.sweep.mode);
    s.get_optional("t2_s", cfg.sweep.t2_s);
    s.get("shots", cfg.sweep.shots);
    s.get("sta_steps", cfg.sweep.sta_steps);
    s.get("feedback_shots", cfg.sweep.feedback_shots);
    s.get("svg", cfg.sweep.svg);
  });
  root.finish();
  cfg.validate();
  return cfg;
}

json to_json(const rl::EnvConfig& env) {
  return json{
      {"n_steps", env.n_steps},
      {"omega_hz", env.omega / kTwoPi},
      {"total_time_s", env.total_time},
      {"delta_max_over_omega", env.delta_max / env.omega},
      {"phase", phase_name(env.phase)},
      {"rabi_error_half_width", env.rabi_half_width},
      {"detuning_error_half_width", env.detuning_half_width},
      {"t2_s", env.t2 ? json(*env.t2) : json(nullptr)},
      {"success_threshold", env.success_threshold},
      {"terminal_bonus", env.terminal_bonus},
      {"lindblad_substeps", env.substeps},
  };
}

rl::EnvConfig env_from_json(const json& j) {
  rl::EnvConfig env;
  Section s(j, "env");
  read_env(s, env);
  s.finish();
  env.validate();
  return env;
}

json to_json(const RunConfig& cfg) {
  return json{
      {"schema_version", cfg.schema_version},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"env", to_json(cfg.env)},
      {"ppo",
       {{"learning_rate", cfg.ppo.learning_rate},
        {"clip_epsilon", cfg.ppo.clip_epsilon},
        {"gamma", cfg.ppo.gamma},
        {"gae_lambda", cfg.ppo.gae_lambda},
        {"update_epochs", cfg.ppo.update_epochs},
        {"value_coef", cfg.ppo.value_coef},
        {"entropy_coef", cfg.ppo.entropy_coef},
        {"batch_episodes", cfg.ppo.batch_episodes},
        {"minibatch_steps", cfg.ppo.minibatch_size}}},
      {"schedule",
       {{"pretrain_episodes", cfg.schedule.pretrain_episodes},
        {"finetune_episodes", cfg.schedule.finetune_episodes},
        {"eval_interval_batches", cfg.schedule.eval_interval},
        {"eval_error_samples", cfg.schedule.eval_error_samples}}},
      {"network",
       {{"hidden", cfg.network.hidden}, {"architecture", arch_name(cfg.network.architecture)}}},
      {"detector",
       {{"lambda_dark", cfg.detector.lambda_dark},
        {"lambda_bright", cfg.detector.lambda_bright},
        {"threshold", cfg.detector.threshold},
        {"prep_error", cfg.detector.prep_error}}},
      {"sweep",
       {{"type", cfg.sweep.type},
        {"axis", cfg.sweep.axis},
        {"grid", cfg.sweep.grid},
        {"rabi_grid", cfg.sweep.rabi_grid},
        {"detuning_grid", cfg.sweep.detuning_grid},
        {"mode", cfg.sweep.mode},
        {"t2_s", cfg.sweep.t2_s ? json(*cfg.sweep.t2_s) : json(nullptr)},
        {"shots", cfg.sweep.shots},
        {"sta_steps", cfg.sweep.sta_steps},
        {"feedback_shots", cfg.sweep.feedback_shots},
        {"svg", cfg.sweep.svg}}},
  };
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

std::string fingerprint(const json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string fingerprint(const RunConfig& cfg) { return fingerprint(to_json(cfg)); }

}  // namespace qflip
