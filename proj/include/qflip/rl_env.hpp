#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qflip/dynamics.hpp"
#include "qflip/network.hpp"

namespace qflip::rl {

// What the agent sees before choosing pulse i + 1.
struct Observation {
  double sz = -1.0;           // <sigma_z> of the current state
  double prev_action = 0.5;   // normalized detuning of the previous pulse
  double time_frac = 0.0;     // i / N

  Eigen::Vector3d as_vector() const { return {sz, prev_action, time_frac}; }
  bool operator==(const Observation&) const = default;
};

enum class Phase { Pretrain, Finetune };

struct EnvConfig {
  int n_steps = 20;
  double omega = 2.0 * 3.14159265358979323846 * 3300.0;  // rad/s
  double total_time = 300e-6;                               // s
  double delta_max = 2.0 * 2.0 * 3.14159265358979323846 * 3300.0;  // rad/s
  Phase phase = Phase::Pretrain;
  double rabi_half_width = 0.2;      // sampled delta_omega in [-w, w]
  double detuning_half_width = 0.2;  // sampled delta_delta in [-w, w] (units of Omega)
  std::optional<double> t2;          // s; switches stepping to the Lindblad path
  double success_threshold = 0.997;
  double terminal_bonus = 10.0;
  int substeps = kDefaultSubsteps;

  void validate() const;
  double step_duration() const { return total_time / n_steps; }
};

struct Transition {
  Observation observation;  // observation after the step
  double action = 0.0;
  double reward = 0.0;
  bool done = false;
};

// Normalized action [0, 1] -> detuning in [-delta_max, delta_max].
double decode_action(double a_tilde, double delta_max);
// Inverse of decode_action, clamped to [0, 1].
double encode_detuning(double delta, double delta_max);

// Target of the pretraining reward for 1-based step index i: (i-1)/(N-1).
double ramp_target(int step_index, int n_steps);

// Episodic 20-pulse control of the qubit. One instance is single-threaded.
class QubitEnv {
 public:
  explicit QubitEnv(EnvConfig config);

  // Resets to |0>. In the fine-tune phase the episode's systematic errors are
  // drawn uniformly from the configured half-widths using `seed`.
  Observation reset(std::uint64_t seed);
  // Resets with explicitly chosen errors (evaluation and sweeps).
  Observation reset_with_errors(double delta_omega, double delta_delta);

  // Throws ConfigError when the episode is already finished.
  Transition step(double action);
  Observation observation() const;

  const EnvConfig& config() const { return config_; }
  const ErrorModel& episode_errors() const { return errors_; }
  const QubitState& state() const { return state_; }
  const PulseSequence& committed() const { return committed_; }
  int steps_taken() const { return step_index_; }
  bool done() const { return step_index_ >= config_.n_steps; }

 private:
  void start_episode(double delta_omega, double delta_delta);

  EnvConfig config_;
  ErrorModel errors_;
  QubitState state_;
  PulseSequence committed_;
  double prev_action_ = 0.5;
  int step_index_ = 0;
};

struct RolloutResult {
  PulseSequence sequence;  // nominal (error-free) controls
  std::vector<double> actions;
  std::vector<double> rewards;
  double final_sz = -1.0;
  double final_flip_probability = 0.0;
  ErrorModel errors;
};

// One full episode driven by `policy`. Deterministic mode uses the Beta mean;
// stochastic mode samples with an RNG seeded from `seed`. When `errors` is
// given it replaces the phase's error sampling.
RolloutResult rollout(const ppo::PolicyNetwork& policy, const EnvConfig& config,
                      bool deterministic, std::uint64_t seed,
                      std::optional<std::pair<double, double>> errors = std::nullopt);

// Pulse sequence obtained by decoding a list of normalized actions.
PulseSequence sequence_from_actions(const std::vector<double>& actions, const EnvConfig& config);

}  // namespace qflip::rl
