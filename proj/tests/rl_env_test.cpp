#include "qflip/rl_env.hpp"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qflip/errors.hpp"
#include "qflip/sta.hpp"

using namespace qflip;
using namespace qflip::rl;

namespace {

EnvConfig finetune_config() {
  EnvConfig cfg;
  cfg.phase = Phase::Finetune;
  return cfg;
}

// Zero weights: alpha = beta everywhere, so the mean action is 0.5.
ppo::PolicyNetwork constant_half_policy() {
  ppo::PolicyNetwork net;
  net.set_parameters(ppo::Vector::Zero(net.parameter_count()));
  return net;
}

}  // namespace

TEST(RlEnv, DecodeActionBounds) {
  const double dmax = 123.0;
  EXPECT_DOUBLE_EQ(decode_action(0.0, dmax), -dmax);
  EXPECT_DOUBLE_EQ(decode_action(0.5, dmax), 0.0);
  EXPECT_DOUBLE_EQ(decode_action(1.0, dmax), dmax);
  for (double a : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    EXPECT_NEAR(encode_detuning(decode_action(a, dmax), dmax), a, 1e-15);
  }
  EXPECT_DOUBLE_EQ(encode_detuning(5.0 * dmax, dmax), 1.0);
  EXPECT_DOUBLE_EQ(encode_detuning(-5.0 * dmax, dmax), 0.0);
}

TEST(RlEnv, RampTarget) {
  EXPECT_DOUBLE_EQ(ramp_target(1, 20), 0.0);
  EXPECT_DOUBLE_EQ(ramp_target(20, 20), 1.0);
  EXPECT_DOUBLE_EQ(ramp_target(11, 21), 0.5);
}

TEST(RlEnv, ResetObservation) {
  for (Phase phase : {Phase::Pretrain, Phase::Finetune}) {
    EnvConfig cfg;
    cfg.phase = phase;
    QubitEnv env(cfg);
    EXPECT_EQ(env.reset(17), (Observation{-1.0, 0.5, 0.0}));
    EXPECT_EQ(env.steps_taken(), 0);
    EXPECT_FALSE(env.done());
  }
}

TEST(RlEnv, PretrainResetHasNoErrors) {
  QubitEnv env(EnvConfig{});
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    env.reset(seed);
    EXPECT_EQ(env.episode_errors().delta_omega, 0.0);
    EXPECT_EQ(env.episode_errors().delta_delta, 0.0);
  }
}

TEST(RlEnv, FinetuneErrorsSeededAndBounded) {
  EnvConfig cfg = finetune_config();
  cfg.rabi_half_width = 0.1;
  cfg.detuning_half_width = 0.3;
  QubitEnv a(cfg), b(cfg);
  a.reset(5);
  b.reset(5);
  EXPECT_EQ(a.episode_errors().delta_omega, b.episode_errors().delta_omega);
  EXPECT_EQ(a.episode_errors().delta_delta, b.episode_errors().delta_delta);
  b.reset(6);
  EXPECT_NE(a.episode_errors().delta_omega, b.episode_errors().delta_omega);
  double max_o = 0.0, max_d = 0.0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    a.reset(s);
    max_o = std::max(max_o, std::abs(a.episode_errors().delta_omega));
    max_d = std::max(max_d, std::abs(a.episode_errors().delta_delta));
  }
  EXPECT_LE(max_o, 0.1);
  EXPECT_LE(max_d, 0.3);
  EXPECT_GT(max_o, 0.09);
  EXPECT_GT(max_d, 0.27);
}

TEST(RlEnv, PretrainRewardFormula) {
  QubitEnv env(EnvConfig{});
  env.reset(0);
  EXPECT_DOUBLE_EQ(env.step(0.0).reward, 0.0);
  env.reset(0);
  EXPECT_DOUBLE_EQ(env.step(0.5).reward, -0.5);
  const auto second = env.step(0.5);
  EXPECT_NEAR(second.reward, -std::abs(0.5 - 1.0 / 19.0), 1e-15);
}

TEST(RlEnv, RampMaximizesPretrainReturn) {
  QubitEnv env(EnvConfig{});
  env.reset(0);
  double ret = 0.0;
  for (int i = 1; i <= 20; ++i) ret += env.step(ramp_target(i, 20)).reward;
  EXPECT_EQ(ret, 0.0);
  env.reset(0);
  double perturbed = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double a = ramp_target(i, 20) + (i == 7 ? 0.01 : 0.0);
    const auto tr = env.step(a);
    EXPECT_LE(tr.reward, 0.0);
    EXPECT_GE(tr.reward, -1.0);
    perturbed += tr.reward;
  }
  EXPECT_LT(perturbed, 0.0);
}

TEST(RlEnv, EpisodeLengthAndDoneFlag) {
  EnvConfig cfg;
  cfg.n_steps = 7;
  QubitEnv env(cfg);
  env.reset(0);
  for (int i = 1; i <= 7; ++i) {
    const auto tr = env.step(0.3);
    EXPECT_EQ(tr.done, i == 7);
    EXPECT_DOUBLE_EQ(tr.observation.time_frac, i / 7.0);
    EXPECT_DOUBLE_EQ(tr.observation.prev_action, 0.3);
  }
  EXPECT_THROW(env.step(0.3), ConfigError);
}

TEST(RlEnv, RejectsActionsOutsideUnitInterval) {
  QubitEnv env(EnvConfig{});
  env.reset(0);
  EXPECT_THROW(env.step(-0.01), ConfigError);
  EXPECT_THROW(env.step(1.01), ConfigError);
  EXPECT_THROW(env.step(std::nan("")), ConfigError);
}

TEST(RlEnv, RejectsInvalidConfig) {
  EnvConfig cfg;
  cfg.n_steps = 0;
  EXPECT_THROW(QubitEnv{cfg}, ConfigError);
  cfg = EnvConfig{};
  cfg.delta_max = 0.0;
  EXPECT_THROW(QubitEnv{cfg}, ConfigError);
  cfg = EnvConfig{};
  cfg.rabi_half_width = -0.1;
  EXPECT_THROW(QubitEnv{cfg}, ConfigError);
}

TEST(RlEnv, StateMatchesDirectEvolutionWithErrors) {
  QubitEnv env(finetune_config());
  env.reset(1234);
  const std::vector<double> actions = {0.1, 0.9, 0.4, 0.6, 0.2, 0.8, 0.5, 0.5, 0.3, 0.7,
                                       0.0, 1.0, 0.45, 0.55, 0.35, 0.65, 0.25, 0.75, 0.15, 0.85};
  double last_sz = 0.0;
  for (double a : actions) last_sz = env.step(a).observation.sz;
  const auto seq = sequence_from_actions(actions, env.config());
  const auto direct = evolve_unitary(QubitState::ground(), seq, env.episode_errors());
  EXPECT_NEAR(expectation_z(direct), last_sz, 1e-12);
  EXPECT_EQ(env.committed().steps.size(), 20u);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    EXPECT_DOUBLE_EQ(env.committed().steps[i].delta, seq.steps[i].delta);
  }
}

TEST(RlEnv, FinetuneRewardsTerminalOnly) {
  QubitEnv env(finetune_config());
  env.reset_with_errors(0.0, 0.0);
  double ret = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto tr = env.step(0.5);
    if (!tr.done) EXPECT_EQ(tr.reward, 0.0);
    ret += tr.reward;
  }
  // 300 us at 3.3 kHz on resonance is ~0.99 of a full Rabi cycle: not a flip.
  EXPECT_EQ(ret, 0.0);
}

TEST(RlEnv, StaProfileEarnsTerminalBonus) {
  const double omega = EnvConfig{}.omega;
  for (auto ch : {sta::ErrorChannel::Detuning, sta::ErrorChannel::Rabi}) {
    const sta::StaAnsatz ans(sta::solve_a(ch, omega), omega);
    const auto seq = sta::discretize(ans, 20);
    EnvConfig cfg = finetune_config();
    cfg.total_time = ans.duration();
    QubitEnv env(cfg);
    env.reset_with_errors(0.0, 0.0);
    Transition tr;
    for (const auto& s : seq.steps) tr = env.step(encode_detuning(s.delta, cfg.delta_max));
    EXPECT_GT(tr.observation.sz, 0.997);
    EXPECT_EQ(tr.reward, cfg.terminal_bonus);
  }
}

TEST(RlEnv, ConstantHalfPolicyIsResonantPulse) {
  const auto net = constant_half_policy();
  EnvConfig cfg = finetune_config();
  const auto r = rollout(net, cfg, true, 0, std::make_pair(0.0, 0.0));
  for (double a : r.actions) EXPECT_DOUBLE_EQ(a, 0.5);
  EXPECT_NEAR(r.final_flip_probability,
              rabi_flip_probability(cfg.omega, 0.0, cfg.total_time), 1e-12);
}

TEST(RlEnv, StochasticRolloutReproducible) {
  ppo::Rng rng(3);
  ppo::PolicyNetwork net;
  net.initialize(rng);
  const auto cfg = finetune_config();
  const auto a = rollout(net, cfg, false, 77);
  const auto b = rollout(net, cfg, false, 77);
  const auto c = rollout(net, cfg, false, 78);
  EXPECT_EQ(a.actions, b.actions);
  EXPECT_EQ(a.final_sz, b.final_sz);
  EXPECT_EQ(a.errors.delta_omega, b.errors.delta_omega);
  EXPECT_NE(a.actions, c.actions);
}

TEST(RlEnv, LindbladPathWhenT2Set) {
  EnvConfig cfg = finetune_config();
  cfg.t2 = 0.35e-3;
  cfg.substeps = 32;
  QubitEnv env(cfg);
  env.reset_with_errors(0.0, 0.0);
  for (int i = 0; i < 20; ++i) env.step(ramp_target(i + 1, 20));
  EXPECT_TRUE(env.state().is_valid(1e-9));
  // Dephasing leaves a mixed state.
  const auto ev = env.state().eigenvalues();
  EXPECT_GT(std::min(ev[0], ev[1]), 1e-3);

  EnvConfig pure = cfg;
  pure.t2.reset();
  QubitEnv ref(pure);
  ref.reset_with_errors(0.0, 0.0);
  for (int i = 0; i < 20; ++i) ref.step(ramp_target(i + 1, 20));
  EXPECT_NE(expectation_z(env.state()), expectation_z(ref.state()));
}
