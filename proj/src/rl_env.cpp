#include "qflip/rl_env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qflip/errors.hpp"
#include "qflip/seeding.hpp"

namespace qflip::rl {

void EnvConfig::validate() const {
  if (n_steps < 1) throw ConfigError("EnvConfig: n_steps must be >= 1");
  if (!(omega > 0.0)) throw ConfigError("EnvConfig: omega must be positive");
  if (!(total_time > 0.0)) throw ConfigError("EnvConfig: total_time must be positive");
  if (!(delta_max > 0.0)) throw ConfigError("EnvConfig: delta_max must be positive");
  if (!(rabi_half_width >= 0.0) || !(detuning_half_width >= 0.0)) {
    throw ConfigError("EnvConfig: error half-widths must be non-negative");
  }
  if (t2 && !(*t2 > 0.0)) throw ConfigError("EnvConfig: t2 must be positive");
  if (substeps < 1) throw ConfigError("EnvConfig: substeps must be >= 1");
}

double decode_action(double a_tilde, double delta_max) {
  return (2.0 * a_tilde - 1.0) * delta_max;
}

double encode_detuning(double delta, double delta_max) {
  return std::clamp((delta + delta_max) / (2.0 * delta_max), 0.0, 1.0);
}

double ramp_target(int step_index, int n_steps) {
  if (n_steps <= 1) return 0.0;
  return static_cast<double>(step_index - 1) / (n_steps - 1);
}

QubitEnv::QubitEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  start_episode(0.0, 0.0);
}

void QubitEnv::start_episode(double delta_omega, double delta_delta) {
  errors_ = ErrorModel{delta_omega, delta_delta, config_.t2};
  state_ = QubitState::ground();
  committed_ = PulseSequence{config_.omega, {}};
  committed_.steps.reserve(static_cast<std::size_t>(config_.n_steps));
  prev_action_ = 0.5;
  step_index_ = 0;
}

Observation QubitEnv::reset(std::uint64_t seed) {
  double d_omega = 0.0;
  double d_delta = 0.0;
  if (config_.phase == Phase::Finetune) {
    std::mt19937_64 rng(mix_seed(seed));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    d_omega = config_.rabi_half_width * u(rng);
    d_delta = config_.detuning_half_width * u(rng);
  }
  start_episode(d_omega, d_delta);
  return observation();
}

Observation QubitEnv::reset_with_errors(double delta_omega, double delta_delta) {
  start_episode(delta_omega, delta_delta);
  return observation();
}

Observation QubitEnv::observation() const {
  return {expectation_z(state_), prev_action_,
          static_cast<double>(step_index_) / config_.n_steps};
}

Transition QubitEnv::step(double action) {
  if (done()) {
    throw ConfigError("QubitEnv::step: episode already finished");
  }
  if (!(action >= 0.0 && action <= 1.0)) {
    throw ConfigError("QubitEnv::step: action " + std::to_string(action) + " outside [0, 1]");
  }
  const PulseStep pulse{decode_action(action, config_.delta_max), config_.step_duration()};
  committed_.steps.push_back(pulse);

  const PulseSequence one{config_.omega, {pulse}};
  state_ = errors_.t2 ? evolve_lindblad(state_, one, errors_, config_.substeps)
                      : evolve_unitary(state_, one, errors_);
  prev_action_ = action;
  ++step_index_;

  Transition tr;
  tr.action = action;
  tr.done = done();
  tr.observation = observation();
  if (config_.phase == Phase::Pretrain) {
    tr.reward = -std::abs(action - ramp_target(step_index_, config_.n_steps));
  } else if (tr.done && tr.observation.sz > config_.success_threshold) {
    tr.reward = config_.terminal_bonus;
  }
  return tr;
}

PulseSequence sequence_from_actions(const std::vector<double>& actions, const EnvConfig& config) {
  PulseSequence seq{config.omega, {}};
  for (double a : actions) {
    seq.steps.push_back({decode_action(a, config.delta_max), config.step_duration()});
  }
  return seq;
}

RolloutResult rollout(const ppo::PolicyNetwork& policy, const EnvConfig& config,
                      bool deterministic, std::uint64_t seed,
                      std::optional<std::pair<double, double>> errors) {
  QubitEnv env(config);
  Observation obs = errors ? env.reset_with_errors(errors->first, errors->second)
                           : env.reset(derive_seed(seed, 0));
  ppo::Rng rng(derive_seed(seed, 1));
  RolloutResult out;
  while (!env.done()) {
    const auto fwd = policy.forward(obs.as_vector());
    const auto sample = ppo::sample_action(fwd.beta, rng, deterministic);
    const Transition tr = env.step(sample.action);
    out.actions.push_back(sample.action);
    out.rewards.push_back(tr.reward);
    obs = tr.observation;
  }
  out.sequence = env.committed();
  out.final_sz = obs.sz;
  out.final_flip_probability = flip_probability(env.state());
  out.errors = env.episode_errors();
  return out;
}

}  // namespace qflip::rl
