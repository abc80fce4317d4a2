#include "qflip/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "qflip/errors.hpp"
#include "qflip/seeding.hpp"

namespace qflip::ppo {

void PpoHyperparams::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning_rate must be positive");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw ConfigError("ppo: clip_epsilon must lie in (0, 1)");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw ConfigError("ppo: gae_lambda must lie in [0, 1]");
  }
  if (update_epochs < 1) throw ConfigError("ppo: update_epochs must be >= 1");
  if (!(value_coef >= 0.0) || !(entropy_coef >= 0.0)) {
    throw ConfigError("ppo: loss coefficients must be non-negative");
  }
  if (batch_episodes < 1) throw ConfigError("ppo: batch_episodes must be >= 1");
  if (minibatch_size < 0) throw ConfigError("ppo: minibatch_size must be >= 0");
}

std::size_t TrajectoryBatch::step_count() const {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.steps.size();
  return n;
}

double TrajectoryBatch::mean_return() const {
  if (episodes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ep : episodes) {
    for (const auto& s : ep.steps) total += s.reward;
  }
  return total / static_cast<double>(episodes.size());
}

AdvantageEstimate compute_gae(const TrajectoryBatch& batch, double gamma, double lambda,
                              bool normalize) {
  AdvantageEstimate out;
  const std::size_t n = batch.step_count();
  out.advantages.resize(n);
  out.returns.resize(n);
  std::size_t base = 0;
  for (const auto& ep : batch.episodes) {
    double gae = 0.0;
    for (std::size_t k = ep.steps.size(); k-- > 0;) {
      const auto& s = ep.steps[k];
      const bool last = s.done || k + 1 == ep.steps.size();
      const double next_value = last ? 0.0 : ep.steps[k + 1].value;
      if (last) gae = 0.0;
      const double delta = s.reward + gamma * next_value - s.value;
      gae = delta + gamma * lambda * gae;
      out.advantages[base + k] = gae;
      out.returns[base + k] = gae + s.value;
    }
    base += ep.steps.size();
  }
  if (normalize && n > 0) {
    const double mean = std::accumulate(out.advantages.begin(), out.advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : out.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double scale = var > 1e-8 ? 1.0 / std::sqrt(var) : 1.0;
    for (double& a : out.advantages) a = (a - mean) * scale;
  }
  return out;
}

Minibatch flatten(const TrajectoryBatch& batch, const AdvantageEstimate& adv) {
  const auto n = static_cast<Eigen::Index>(batch.step_count());
  if (adv.advantages.size() != static_cast<std::size_t>(n) ||
      adv.returns.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("ppo: advantage estimate does not match the batch");
  }
  Minibatch mb;
  mb.observations.resize(kObservationSize, n);
  mb.actions.resize(n);
  mb.old_log_probs.resize(n);
  mb.advantages.resize(n);
  mb.returns.resize(n);
  Eigen::Index i = 0;
  for (const auto& ep : batch.episodes) {
    for (const auto& s : ep.steps) {
      mb.observations.col(i) = s.observation;
      mb.actions[i] = s.action;
      mb.old_log_probs[i] = s.log_prob;
      mb.advantages[i] = adv.advantages[static_cast<std::size_t>(i)];
      mb.returns[i] = adv.returns[static_cast<std::size_t>(i)];
      ++i;
    }
  }
  return mb;
}

Minibatch select(const Minibatch& all, const std::vector<Eigen::Index>& indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Minibatch mb;
  mb.observations.resize(kObservationSize, n);
  mb.actions.resize(n);
  mb.old_log_probs.resize(n);
  mb.advantages.resize(n);
  mb.returns.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index j = indices[static_cast<std::size_t>(k)];
    mb.observations.col(k) = all.observations.col(j);
    mb.actions[k] = all.actions[j];
    mb.old_log_probs[k] = all.old_log_probs[j];
    mb.advantages[k] = all.advantages[j];
    mb.returns[k] = all.returns[j];
  }
  return mb;
}

LossAndGradient ppo_loss(const PolicyNetwork& policy, const Minibatch& mb,
                         const PpoHyperparams& hp, bool with_gradient) {
  using boost::math::digamma;
  using boost::math::trigamma;
  const Eigen::Index n = mb.size();
  if (n == 0) throw ConfigError("ppo_loss: empty minibatch");
  const BatchForward fwd = policy.forward_batch(mb.observations);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - hp.clip_epsilon;
  const double hi = 1.0 + hp.clip_epsilon;

  LossAndGradient out;
  OutputGradient g;
  if (with_gradient) {
    g.d_alpha.setZero(n);
    g.d_beta.setZero(n);
    g.d_value.setZero(n);
  }
  double surrogate = 0.0, unclipped = 0.0, value_loss = 0.0, entropy = 0.0;
  double clipped = 0.0, kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const BetaParams p{fwd.alpha[i], fwd.beta[i]};
    const double x = mb.actions[i];
    const double logp = beta_log_prob(p, x);
    const double log_ratio = logp - mb.old_log_probs[i];
    const double r = std::exp(log_ratio);
    const double adv = mb.advantages[i];
    const double plain = r * adv;
    const double bounded = std::clamp(r, lo, hi) * adv;
    surrogate += std::min(plain, bounded);
    unclipped += plain;
    if (r < lo || r > hi) clipped += 1.0;
    kl += -log_ratio;
    const double err = fwd.value[i] - mb.returns[i];
    value_loss += err * err;
    entropy += beta_entropy(p);

    if (!with_gradient) continue;
    // The min picks the unclipped branch unless clipping lowers the objective.
    const bool active = plain <= bounded;
    const double psi_sum = digamma(p.alpha + p.beta);
    const double tri_sum = trigamma(p.alpha + p.beta);
    const double dlogp_da = std::log(x) - digamma(p.alpha) + psi_sum;
    const double dlogp_db = std::log1p(-x) - digamma(p.beta) + psi_sum;
    const double dh_da = -(p.alpha - 1.0) * trigamma(p.alpha) + (p.alpha + p.beta - 2.0) * tri_sum;
    const double dh_db = -(p.beta - 1.0) * trigamma(p.beta) + (p.alpha + p.beta - 2.0) * tri_sum;
    const double dsurr_dlogp = active ? plain : 0.0;
    g.d_alpha[i] = -inv_n * (dsurr_dlogp * dlogp_da + hp.entropy_coef * dh_da);
    g.d_beta[i] = -inv_n * (dsurr_dlogp * dlogp_db + hp.entropy_coef * dh_db);
    g.d_value[i] = hp.value_coef * 2.0 * err * inv_n;
  }
  out.terms.surrogate = surrogate * inv_n;
  out.terms.unclipped = unclipped * inv_n;
  out.terms.value_loss = value_loss * inv_n;
  out.terms.entropy = entropy * inv_n;
  out.terms.clip_fraction = clipped * inv_n;
  out.terms.approx_kl = kl * inv_n;
  out.terms.total = -out.terms.surrogate + hp.value_coef * out.terms.value_loss -
                    hp.entropy_coef * out.terms.entropy;
  if (!std::isfinite(out.terms.total)) throw NumericalError("ppo_loss: non-finite loss");
  if (with_gradient) {
    out.gradient = policy.backward(mb.observations, g);
    if (!out.gradient.allFinite()) throw NumericalError("ppo_loss: non-finite gradient");
  }
  return out;
}

AdamOptimizer::AdamOptimizer(Eigen::Index size, double learning_rate, double beta1, double beta2,
                             double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
      m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void AdamOptimizer::step(Vector& params, const Vector& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ConfigError("AdamOptimizer: size mismatch");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

LossReport ppo_update(PolicyNetwork& policy, AdamOptimizer& optimizer,
                      const TrajectoryBatch& batch, const PpoHyperparams& hp, Rng& rng) {
  hp.validate();
  const AdvantageEstimate adv = compute_gae(batch, hp.gamma, hp.gae_lambda);
  const Minibatch all = flatten(batch, adv);
  const Eigen::Index n = all.size();
  if (n == 0) throw ConfigError("ppo_update: empty batch");
  const Eigen::Index chunk = hp.minibatch_size > 0 ? std::min<Eigen::Index>(hp.minibatch_size, n) : n;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  LossReport report;
  bool first = true;
  for (int epoch = 0; epoch < hp.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += chunk) {
      const Eigen::Index stop = std::min(n, start + chunk);
      const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + stop);
      const LossAndGradient lg = ppo_loss(policy, select(all, idx), hp);
      if (first) {
        report.first = lg.terms;
        first = false;
      }
      report.last = lg.terms;
      optimizer.step(policy.parameters(), lg.gradient);
    }
  }
  if (!policy.parameters().allFinite()) throw NumericalError("ppo_update: non-finite parameters");
  return report;
}

Episode collect_episode(const PolicyNetwork& policy, rl::QubitEnv& env,
                        std::uint64_t episode_seed, Rng& rng) {
  Episode ep;
  rl::Observation obs = env.reset(episode_seed);
  ep.steps.reserve(static_cast<std::size_t>(env.config().n_steps));
  while (!env.done()) {
    StepRecord rec;
    rec.observation = obs.as_vector();
    const ForwardOutput fwd = policy.forward(rec.observation);
    const ActionSample sample = sample_action(fwd.beta, rng);
    const rl::Transition tr = env.step(sample.action);
    rec.action = sample.action;
    rec.log_prob = sample.log_prob;
    rec.value = fwd.value;
    rec.reward = tr.reward;
    rec.done = tr.done;
    ep.steps.push_back(rec);
    obs = tr.observation;
  }
  return ep;
}

std::vector<std::pair<double, double>> evaluation_errors(const rl::EnvConfig& config, int samples,
                                                         std::uint64_t seed) {
  std::vector<std::pair<double, double>> out{{0.0, 0.0}};
  Rng rng(mix_seed(seed));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < samples; ++k) {
    const double d_omega = config.rabi_half_width * u(rng);
    const double d_delta = config.detuning_half_width * u(rng);
    out.emplace_back(d_omega, d_delta);
  }
  return out;
}

double evaluation_score(const PolicyNetwork& policy, const rl::EnvConfig& finetune_config,
                        const std::vector<std::pair<double, double>>& eval_errors) {
  rl::EnvConfig cfg = finetune_config;
  cfg.phase = rl::Phase::Finetune;
  const auto zero = rl::rollout(policy, cfg, true, 0, std::make_pair(0.0, 0.0));
  if (!(zero.final_sz > cfg.success_threshold)) return zero.final_sz - 1.0;
  double total = 0.0;
  for (const auto& e : eval_errors) {
    total += rl::rollout(policy, cfg, true, 0, e).final_flip_probability;
  }
  return 1.0 + (eval_errors.empty() ? 0.0 : total / static_cast<double>(eval_errors.size()));
}

TrainResult train(const rl::EnvConfig& env_config, const PpoHyperparams& hp,
                  const TrainingSchedule& schedule, std::uint64_t seed, const NetworkShape& shape,
                  const ProgressCallback& progress) {
  hp.validate();
  env_config.validate();
  if (schedule.pretrain_episodes < 0 || schedule.finetune_episodes < 0) {
    throw ConfigError("train: episode counts must be non-negative");
  }
  if (schedule.eval_interval < 1) throw ConfigError("train: eval_interval must be >= 1");

  Rng init_rng(derive_seed(seed, 0));
  Rng action_rng(derive_seed(seed, 1));
  Rng shuffle_rng(derive_seed(seed, 2));
  const std::uint64_t episode_base = derive_seed(seed, 3);

  TrainResult result{PolicyNetwork(shape), PolicyNetwork(shape), PolicyNetwork(shape), 0.0, {}};
  PolicyNetwork& net = result.last;
  net.initialize(init_rng);
  AdamOptimizer adam(net.parameter_count(), hp.learning_rate);

  rl::EnvConfig ft_config = env_config;
  ft_config.phase = rl::Phase::Finetune;
  const auto eval_set = evaluation_errors(ft_config, schedule.eval_error_samples, derive_seed(seed, 4));

  long episode_index = 0;
  int batch_index = 0;
  auto run_phase = [&](rl::Phase phase, int episodes, auto&& after_batch) {
    rl::EnvConfig cfg = env_config;
    cfg.phase = phase;
    rl::QubitEnv env(cfg);
    for (int done = 0; done < episodes;) {
      const int count = std::min(hp.batch_episodes, episodes - done);
      TrajectoryBatch batch;
      batch.episodes.reserve(static_cast<std::size_t>(count));
      try {
        for (int k = 0; k < count; ++k) {
          batch.episodes.push_back(collect_episode(
              net, env, derive_seed(episode_base, static_cast<std::uint64_t>(episode_index)),
              action_rng));
          ++episode_index;
        }
      } catch (const NumericalError& e) {
        throw NumericalError("train: episode " + std::to_string(episode_index) + ": " + e.what());
      }
      LossReport report;
      try {
        report = ppo_update(net, adam, batch, hp, shuffle_rng);
      } catch (const NumericalError& e) {
        throw NumericalError("train: update after episode " + std::to_string(episode_index) +
                             ": " + e.what());
      }
      done += count;
      CurvePoint pt;
      pt.batch_index = batch_index++;
      pt.phase = phase;
      pt.mean_return = batch.mean_return();
      pt.policy_objective = report.first.surrogate;
      pt.value_loss = report.first.value_loss;
      pt.entropy = report.first.entropy;
      after_batch(pt, done == episodes);
      result.curve.push_back(pt);
      if (progress) progress(pt);
    }
  };

  run_phase(rl::Phase::Pretrain, schedule.pretrain_episodes, [](CurvePoint&, bool) {});
  result.pretrained = net;

  bool evaluated = false;
  int finetune_batches = 0;
  run_phase(rl::Phase::Finetune, schedule.finetune_episodes, [&](CurvePoint& pt, bool final_batch) {
    ++finetune_batches;
    if (finetune_batches % schedule.eval_interval != 0 && !final_batch) return;
    const double score = evaluation_score(net, ft_config, eval_set);
    pt.eval_score = score;
    if (!evaluated || score > result.best_score) {
      result.best_score = score;
      result.policy = net;
      evaluated = true;
    }
  });
  if (!evaluated) {
    result.policy = net;
    result.best_score = schedule.finetune_episodes > 0 ? evaluation_score(net, ft_config, eval_set) : 0.0;
  }
  return result;
}

}  // namespace qflip::ppo
