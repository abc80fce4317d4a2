#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qflip/dynamics.hpp"
#include "qflip/measurement.hpp"
#include "qflip/network.hpp"
#include "qflip/rl_env.hpp"

namespace qflip::bench {

enum class MethodKind { PiPulse, StaDetuningOpt, StaRabiOpt, DrlPolicy, FeedbackDrl };

std::string to_string(MethodKind kind);
MethodKind parse_method(const std::string& name);

// A pulse-design method. DRL variants carry the trained policy and the
// environment it was trained in (Omega, T, delta_max, N).
struct Method {
  MethodKind kind = MethodKind::PiPulse;
  double omega = 2.0 * 3.14159265358979323846 * 3300.0;  // rad/s, non-DRL methods
  int sta_steps = 1000;  // piecewise-constant resolution of the STA profile
  std::shared_ptr<const ppo::PolicyNetwork> policy;
  rl::EnvConfig env;
  // Feedback only: shots per cycle (0 = exact <sigma_z>) and detector.
  long feedback_shots = 2000;
  measurement::DetectorModel feedback_detector;

  static Method pi_pulse(double omega);
  static Method sta(MethodKind kind, double omega, int steps = 1000);
  static Method drl(MethodKind kind, std::shared_ptr<const ppo::PolicyNetwork> policy,
                    rl::EnvConfig env);

  bool is_drl() const { return kind == MethodKind::DrlPolicy || kind == MethodKind::FeedbackDrl; }
  // Throws ConfigError when a DRL method has no policy.
  void validate() const;
  // Same method with the gate stretched by `factor` (Omega / factor).
  Method stretched(double factor) const;
};

// Single resonant step of duration pi / omega.
PulseSequence pi_pulse(double omega);

// Open-loop control sequence of a non-DRL method.
PulseSequence method_sequence(const Method& method);

// Flip probability from |0> under `errors` (exact, no measurement). DRL
// methods roll out the policy in the errored system; FeedbackDrl measures
// with the method's shot budget seeded by `seed`.
double method_flip_probability(const Method& method, const ErrorModel& errors,
                               std::uint64_t seed = 0);

// The sequence a method commits for one run under `errors`.
PulseSequence committed_sequence(const Method& method, const ErrorModel& errors,
                                 std::uint64_t seed = 0);

enum class ErrorAxis { RabiError, DetuningError };
enum class DephasingMode { RabiTime, FlipRepetition };

std::string to_string(ErrorAxis axis);
std::string to_string(DephasingMode mode);

struct SweepPoint {
  double x = 0.0;
  std::optional<double> y;           // second axis of 2-D sweeps
  double exact_probability = 0.0;    // before measurement
  measurement::PopulationEstimate estimate;
  std::optional<double> log_infidelity;  // hybrid sweeps
};

struct SweepResult {
  std::string kind;  // "sweep_1d", "hybrid", "dephasing"
  std::string x_label;
  std::string y_label;  // empty for 1-D sweeps
  std::vector<SweepPoint> points;
  std::vector<std::pair<std::string, std::string>> metadata;
};

// Measurement settings shared by the sweeps. shots = 0 reports the exact
// probability (noiseless mode).
struct MeasureSpec {
  long shots = 2000;
  measurement::DetectorModel detector;
  std::uint64_t seed = 0;
  int threads = 1;
};

SweepResult sweep_1d(const Method& method, ErrorAxis axis, const std::vector<double>& grid,
                     const MeasureSpec& measure, std::optional<double> t2 = std::nullopt);

// log10(1 - p_hat), with p_hat clamped to at most 1 - 1e-6.
double log_infidelity(double p_hat);

// Cells are ordered with delta_omega outer, delta_delta inner.
SweepResult sweep_hybrid(const Method& method, const std::vector<double>& rabi_grid,
                         const std::vector<double>& detuning_grid, const MeasureSpec& measure);

// RabiTime: grid values are duration stretch factors. FlipRepetition: grid
// values are flip counts m >= 1; success is measured against |1> for odd m
// and |0> for even m.
SweepResult sweep_dephasing(const Method& method, DephasingMode mode,
                            const std::vector<double>& grid, double t2,
                            const MeasureSpec& measure);

struct FeedbackCycle {
  int cycle = 0;            // 0 = initial action from the reset observation
  double measured_sz = -1.0;
  double action = 0.5;
};

struct FeedbackResult {
  PulseSequence sequence;
  std::vector<double> actions;
  std::vector<FeedbackCycle> cycles;  // 1 initial + (N - 1) feedback rows
  double final_probability = 0.0;     // exact flip probability of the sequence
  double final_sz = -1.0;
};

// Replaces the estimate of <sigma_z> after n pulses; receives the true value.
using SzEstimator = std::function<double(int cycle, double true_sz)>;

// Closed-loop design: after each of the first N - 1 pulses the committed
// prefix is replayed from |0>, <sigma_z> is estimated from `shots` measured
// shots (exact when shots = 0) and fed to the deterministic policy, which
// picks the next pulse. Errors, when given, act on the physical system.
FeedbackResult feedback_protocol(const ppo::PolicyNetwork& policy, const rl::EnvConfig& config,
                                 const measurement::DetectorModel& det, long shots,
                                 std::uint64_t seed, const ErrorModel& errors = {},
                                 const SzEstimator& estimator = {});

// Runs f(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f);

}  // namespace qflip::bench
