#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qflip/network.hpp"
#include "qflip/rl_env.hpp"

namespace qflip::ppo {

struct PpoHyperparams {
  double learning_rate = 1e-4;
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int update_epochs = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int batch_episodes = 16;
  // Steps per gradient step inside an epoch; 0 means the whole batch.
  int minibatch_size = 64;

  void validate() const;
};

struct StepRecord {
  Eigen::Vector3d observation = Eigen::Vector3d::Zero();
  double action = 0.5;
  double log_prob = 0.0;  // under the behavior policy
  double reward = 0.0;
  double value = 0.0;     // behavior-time value estimate
  bool done = false;
};

struct Episode {
  std::vector<StepRecord> steps;
};

struct TrajectoryBatch {
  std::vector<Episode> episodes;

  std::size_t step_count() const;
  double mean_return() const;
};

struct AdvantageEstimate {
  std::vector<double> advantages;  // flattened in episode order
  std::vector<double> returns;     // raw advantage + value
};

// Generalized advantage estimation within each episode (bootstrap value 0
// after the terminal step). With `normalize`, advantages are shifted to zero
// mean and, when their variance exceeds 1e-8, scaled to unit variance.
AdvantageEstimate compute_gae(const TrajectoryBatch& batch, double gamma, double lambda,
                              bool normalize = true);

// Flattened samples for one gradient evaluation.
struct Minibatch {
  Matrix observations;  // 3 x n
  Eigen::ArrayXd actions;
  Eigen::ArrayXd old_log_probs;
  Eigen::ArrayXd advantages;
  Eigen::ArrayXd returns;

  Eigen::Index size() const { return actions.size(); }
};

Minibatch flatten(const TrajectoryBatch& batch, const AdvantageEstimate& adv);
Minibatch select(const Minibatch& all, const std::vector<Eigen::Index>& indices);

struct LossTerms {
  double total = 0.0;       // value minimized by the optimizer
  double surrogate = 0.0;   // clipped objective (maximized)
  double unclipped = 0.0;   // plain ratio * advantage objective
  double value_loss = 0.0;  // mean squared error
  double entropy = 0.0;     // mean policy entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

struct LossAndGradient {
  LossTerms terms;
  Vector gradient;  // empty unless requested
};

// total = -surrogate + value_coef * value_loss - entropy_coef * entropy, where
// surrogate = mean(min(r A, clip(r, 1 - eps, 1 + eps) A)).
LossAndGradient ppo_loss(const PolicyNetwork& policy, const Minibatch& mb,
                         const PpoHyperparams& hp, bool with_gradient = true);

// Adaptive-moment optimizer with bias correction, descending on the loss.
class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index size, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);

  void step(Vector& params, const Vector& grad);
  long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Vector m_, v_;
  long t_ = 0;
};

struct LossReport {
  LossTerms first;  // loss terms at the first minibatch of the first epoch
  LossTerms last;   // loss terms at the final minibatch
};

// update_epochs passes over the batch in shuffled minibatches. Throws
// NumericalError on a non-finite loss or gradient.
LossReport ppo_update(PolicyNetwork& policy, AdamOptimizer& optimizer,
                      const TrajectoryBatch& batch, const PpoHyperparams& hp, Rng& rng);

// Runs one stochastic episode, recording what PPO needs.
Episode collect_episode(const PolicyNetwork& policy, rl::QubitEnv& env,
                        std::uint64_t episode_seed, Rng& rng);

struct TrainingSchedule {
  int pretrain_episodes = 20000;
  int finetune_episodes = 60000;
  // Fine-tune evaluations happen every this many batches.
  int eval_interval = 10;
  // Evaluation error samples drawn from the fine-tune distribution (plus the
  // zero-error point).
  int eval_error_samples = 24;
};

struct CurvePoint {
  int batch_index = 0;
  rl::Phase phase = rl::Phase::Pretrain;
  double mean_return = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  std::optional<double> eval_score;
};

struct TrainResult {
  PolicyNetwork policy;      // best fine-tune evaluation (or final if none)
  PolicyNetwork pretrained;  // checkpoint at the phase boundary
  PolicyNetwork last;        // parameters after the final update
  double best_score = 0.0;
  std::vector<CurvePoint> curve;
};

// Deterministic-policy score: 1 + mean flip probability over the evaluation
// errors when the zero-error rollout clears the success threshold, otherwise
// the zero-error <sigma_z> - 1 (always below any passing score).
double evaluation_score(const PolicyNetwork& policy, const rl::EnvConfig& finetune_config,
                        const std::vector<std::pair<double, double>>& eval_errors);

std::vector<std::pair<double, double>> evaluation_errors(const rl::EnvConfig& config, int samples,
                                                         std::uint64_t seed);

using ProgressCallback = std::function<void(const CurvePoint&)>;

// Pretrain (ramp reward, no errors) then fine-tune (terminal reward under
// sampled systematic errors). `env_config.phase` is ignored.
TrainResult train(const rl::EnvConfig& env_config, const PpoHyperparams& hp,
                  const TrainingSchedule& schedule, std::uint64_t seed,
                  const NetworkShape& shape = {}, const ProgressCallback& progress = {});

}  // namespace qflip::ppo
