#include "qflip/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "qflip/errors.hpp"
#include "qflip/seeding.hpp"
#include "qflip/sta.hpp"

namespace qflip::bench {

std::string to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::PiPulse: return "pi_pulse";
    case MethodKind::StaDetuningOpt: return "sta_detuning";
    case MethodKind::StaRabiOpt: return "sta_rabi";
    case MethodKind::DrlPolicy: return "drl";
    case MethodKind::FeedbackDrl: return "feedback_drl";
  }
  return "unknown";
}

MethodKind parse_method(const std::string& name) {
  for (auto k : {MethodKind::PiPulse, MethodKind::StaDetuningOpt, MethodKind::StaRabiOpt,
                 MethodKind::DrlPolicy, MethodKind::FeedbackDrl}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown method '" + name +
                    "' (expected pi_pulse, sta_detuning, sta_rabi, drl, feedback_drl)");
}

std::string to_string(ErrorAxis axis) {
  return axis == ErrorAxis::RabiError ? "delta_omega" : "delta_delta";
}

std::string to_string(DephasingMode mode) {
  return mode == DephasingMode::RabiTime ? "rabi_time" : "flip_repetition";
}

Method Method::pi_pulse(double omega) {
  Method m;
  m.kind = MethodKind::PiPulse;
  m.omega = omega;
  return m;
}

Method Method::sta(MethodKind kind, double omega, int steps) {
  if (kind != MethodKind::StaDetuningOpt && kind != MethodKind::StaRabiOpt) {
    throw ConfigError("Method::sta: not an STA method");
  }
  Method m;
  m.kind = kind;
  m.omega = omega;
  m.sta_steps = steps;
  return m;
}

Method Method::drl(MethodKind kind, std::shared_ptr<const ppo::PolicyNetwork> policy,
                   rl::EnvConfig env) {
  Method m;
  m.kind = kind;
  m.policy = std::move(policy);
  m.env = std::move(env);
  m.env.phase = rl::Phase::Finetune;
  m.omega = m.env.omega;
  if (!m.is_drl()) throw ConfigError("Method::drl: not a DRL method");
  return m;
}

void Method::validate() const {
  if (is_drl()) {
    if (!policy) throw ConfigError(to_string(kind) + ": a policy checkpoint is required");
    env.validate();
  } else if (!(omega > 0.0)) {
    throw ConfigError(to_string(kind) + ": omega must be positive");
  }
  if (sta_steps < 1) throw ConfigError("sta_steps must be >= 1");
}

Method Method::stretched(double factor) const {
  if (!(factor > 0.0)) throw ConfigError("stretch factor must be positive");
  Method m = *this;
  m.omega = omega / factor;
  m.env.omega = env.omega / factor;
  m.env.delta_max = env.delta_max / factor;
  m.env.total_time = env.total_time * factor;
  return m;
}

PulseSequence pi_pulse(double omega) {
  if (!(omega > 0.0)) throw ConfigError("pi_pulse: omega must be positive");
  return PulseSequence{omega, {{0.0, std::numbers::pi / omega}}};
}

PulseSequence method_sequence(const Method& method) {
  method.validate();
  switch (method.kind) {
    case MethodKind::PiPulse:
      return pi_pulse(method.omega);
    case MethodKind::StaDetuningOpt:
    case MethodKind::StaRabiOpt: {
      const auto channel = method.kind == MethodKind::StaDetuningOpt ? sta::ErrorChannel::Detuning
                                                                     : sta::ErrorChannel::Rabi;
      const sta::StaAnsatz ans(sta::solve_a(channel, method.omega), method.omega);
      return sta::discretize(ans, method.sta_steps);
    }
    default:
      throw ConfigError("method_sequence: DRL methods have no open-loop sequence");
  }
}

namespace {

rl::EnvConfig drl_env(const Method& method, const ErrorModel& errors) {
  rl::EnvConfig cfg = method.env;
  cfg.phase = rl::Phase::Finetune;
  cfg.t2 = errors.t2;
  return cfg;
}

// Precomputes whatever a method needs so per-point evaluation is cheap.
struct Evaluator {
  Method method;
  std::optional<PulseSequence> fixed;

  explicit Evaluator(const Method& m) : method(m) {
    method.validate();
    if (!method.is_drl()) fixed = method_sequence(method);
  }

  PulseSequence sequence(const ErrorModel& errors, std::uint64_t seed) const {
    if (fixed) return *fixed;
    if (method.kind == MethodKind::DrlPolicy) {
      return rl::rollout(*method.policy, drl_env(method, errors), true, seed,
                         std::make_pair(errors.delta_omega, errors.delta_delta))
          .sequence;
    }
    return feedback_protocol(*method.policy, drl_env(method, errors), method.feedback_detector,
                             method.feedback_shots, seed, errors)
        .sequence;
  }

  double probability(const ErrorModel& errors, std::uint64_t seed) const {
    if (fixed) return flip_probability(evolve(QubitState::ground(), *fixed, errors));
    if (method.kind == MethodKind::DrlPolicy) {
      return rl::rollout(*method.policy, drl_env(method, errors), true, seed,
                         std::make_pair(errors.delta_omega, errors.delta_delta))
          .final_flip_probability;
    }
    return feedback_protocol(*method.policy, drl_env(method, errors), method.feedback_detector,
                             method.feedback_shots, seed, errors)
        .final_probability;
  }
};

measurement::PopulationEstimate measure(double p, const MeasureSpec& spec, std::uint64_t seed) {
  if (spec.shots == 0) return measurement::exact_population(p);
  measurement::Rng rng(seed);
  return measurement::estimate_population(p, spec.detector, spec.shots, rng);
}

void check_spec(const MeasureSpec& spec) {
  if (spec.shots < 0) throw ConfigError("shots must be >= 0");
  if (spec.threads < 1) throw ConfigError("threads must be >= 1");
  spec.detector.validate();
}

std::string fmt_double(double x) { return fmt::format("{:.12g}", x); }

std::vector<std::pair<std::string, std::string>> base_metadata(const Method& method,
                                                               const MeasureSpec& spec) {
  std::vector<std::pair<std::string, std::string>> md = {
      {"method", to_string(method.kind)},
      {"omega_rad_s", fmt_double(method.is_drl() ? method.env.omega : method.omega)},
      {"seed", std::to_string(spec.seed)},
      {"shots", std::to_string(spec.shots)},
  };
  if (method.is_drl()) {
    md.emplace_back("duration_s", fmt_double(method.env.total_time));
    md.emplace_back("delta_max_rad_s", fmt_double(method.env.delta_max));
    md.emplace_back("n_steps", std::to_string(method.env.n_steps));
  } else {
    md.emplace_back("duration_s", fmt_double(method_sequence(method).total_duration()));
  }
  if (method.kind == MethodKind::FeedbackDrl) {
    md.emplace_back("feedback_shots", std::to_string(method.feedback_shots));
  }
  if (spec.shots > 0) {
    md.emplace_back("lambda_dark", fmt_double(spec.detector.lambda_dark));
    md.emplace_back("lambda_bright", fmt_double(spec.detector.lambda_bright));
    md.emplace_back("threshold", std::to_string(spec.detector.threshold));
    md.emplace_back("prep_error", fmt_double(spec.detector.prep_error));
  }
  return md;
}

}  // namespace

double method_flip_probability(const Method& method, const ErrorModel& errors,
                               std::uint64_t seed) {
  return Evaluator(method).probability(errors, seed);
}

PulseSequence committed_sequence(const Method& method, const ErrorModel& errors,
                                 std::uint64_t seed) {
  return Evaluator(method).sequence(errors, seed);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

SweepResult sweep_1d(const Method& method, ErrorAxis axis, const std::vector<double>& grid,
                     const MeasureSpec& measure_spec, std::optional<double> t2) {
  if (grid.empty()) throw ConfigError("sweep_1d: empty grid");
  check_spec(measure_spec);
  const Evaluator eval(method);
  SweepResult res;
  res.kind = "sweep_1d";
  res.x_label = to_string(axis);
  res.points.resize(grid.size());
  parallel_for(grid.size(), measure_spec.threads, [&](std::size_t i) {
    ErrorModel e;
    (axis == ErrorAxis::RabiError ? e.delta_omega : e.delta_delta) = grid[i];
    e.t2 = t2;
    const std::uint64_t point_seed = derive_seed(measure_spec.seed, i);
    SweepPoint& pt = res.points[i];
    pt.x = grid[i];
    pt.exact_probability = eval.probability(e, derive_seed(point_seed, 1));
    pt.estimate = measure(pt.exact_probability, measure_spec, point_seed);
  });
  res.metadata = base_metadata(method, measure_spec);
  if (t2) res.metadata.emplace_back("t2_s", fmt_double(*t2));
  return res;
}

double log_infidelity(double p_hat) {
  return std::log10(1.0 - std::min(p_hat, 1.0 - 1e-6));
}

SweepResult sweep_hybrid(const Method& method, const std::vector<double>& rabi_grid,
                         const std::vector<double>& detuning_grid,
                         const MeasureSpec& measure_spec) {
  if (rabi_grid.empty() || detuning_grid.empty()) throw ConfigError("sweep_hybrid: empty grid");
  check_spec(measure_spec);
  const Evaluator eval(method);
  SweepResult res;
  res.kind = "hybrid";
  res.x_label = to_string(ErrorAxis::RabiError);
  res.y_label = to_string(ErrorAxis::DetuningError);
  const std::size_t ny = detuning_grid.size();
  res.points.resize(rabi_grid.size() * ny);
  parallel_for(res.points.size(), measure_spec.threads, [&](std::size_t i) {
    const ErrorModel e{rabi_grid[i / ny], detuning_grid[i % ny], std::nullopt};
    const std::uint64_t point_seed = derive_seed(measure_spec.seed, i);
    SweepPoint& pt = res.points[i];
    pt.x = e.delta_omega;
    pt.y = e.delta_delta;
    pt.exact_probability = eval.probability(e, derive_seed(point_seed, 1));
    pt.estimate = measure(pt.exact_probability, measure_spec, point_seed);
    pt.log_infidelity = log_infidelity(pt.estimate.p_hat);
  });
  res.metadata = base_metadata(method, measure_spec);
  return res;
}

SweepResult sweep_dephasing(const Method& method, DephasingMode mode,
                            const std::vector<double>& grid, double t2,
                            const MeasureSpec& measure_spec) {
  if (grid.empty()) throw ConfigError("sweep_dephasing: empty grid");
  if (!(t2 > 0.0)) throw ConfigError("sweep_dephasing: t2 must be positive");
  check_spec(measure_spec);
  SweepResult res;
  res.kind = "dephasing";
  res.x_label = mode == DephasingMode::RabiTime ? "time_factor" : "flips";
  res.points.resize(grid.size());
  const ErrorModel noisy{0.0, 0.0, t2};

  if (mode == DephasingMode::RabiTime) {
    for (double f : grid) {
      if (!(f > 0.0)) throw ConfigError("sweep_dephasing: time factors must be positive");
    }
    parallel_for(grid.size(), measure_spec.threads, [&](std::size_t i) {
      const Evaluator eval(method.stretched(grid[i]));
      const std::uint64_t point_seed = derive_seed(measure_spec.seed, i);
      SweepPoint& pt = res.points[i];
      pt.x = grid[i];
      pt.exact_probability = eval.probability(noisy, derive_seed(point_seed, 1));
      pt.estimate = measure(pt.exact_probability, measure_spec, point_seed);
    });
  } else {
    std::vector<int> flips;
    for (double m : grid) {
      if (!(m >= 1.0) || m != std::floor(m)) {
        throw ConfigError("sweep_dephasing: flip counts must be positive integers");
      }
      flips.push_back(static_cast<int>(m));
    }
    // The designed flip is fixed; only its repetitions see dephasing.
    const PulseSequence flip = Evaluator(method).sequence(ErrorModel{}, mix_seed(measure_spec.seed));
    parallel_for(grid.size(), measure_spec.threads, [&](std::size_t i) {
      PulseSequence repeated{flip.omega, {}};
      for (int r = 0; r < flips[i]; ++r) {
        repeated.steps.insert(repeated.steps.end(), flip.steps.begin(), flip.steps.end());
      }
      const double p1 = flip_probability(evolve(QubitState::ground(), repeated, noisy));
      const std::uint64_t point_seed = derive_seed(measure_spec.seed, i);
      SweepPoint& pt = res.points[i];
      pt.x = flips[i];
      pt.exact_probability = flips[i] % 2 == 1 ? p1 : 1.0 - p1;
      pt.estimate = measure(pt.exact_probability, measure_spec, point_seed);
    });
  }
  res.metadata = base_metadata(method, measure_spec);
  res.metadata.emplace_back("mode", to_string(mode));
  res.metadata.emplace_back("t2_s", fmt_double(t2));
  return res;
}

FeedbackResult feedback_protocol(const ppo::PolicyNetwork& policy, const rl::EnvConfig& config,
                                 const measurement::DetectorModel& det, long shots,
                                 std::uint64_t seed, const ErrorModel& errors,
                                 const SzEstimator& estimator) {
  config.validate();
  if (shots < 0) throw ConfigError("feedback_protocol: shots must be >= 0");
  if (shots > 0) det.validate();
  rl::EnvConfig cfg = config;
  cfg.phase = rl::Phase::Finetune;
  if (errors.t2) cfg.t2 = errors.t2;
  const int n_steps = cfg.n_steps;
  measurement::Rng rng(mix_seed(seed));
  ppo::Rng unused(0);

  // Replaying the committed prefix from |0> reproduces the environment's
  // incremental state, so the environment stands in for each replay.
  rl::QubitEnv env(cfg);
  env.reset_with_errors(errors.delta_omega, errors.delta_delta);
  FeedbackResult out;
  auto choose = [&](const rl::Observation& obs) {
    const auto fwd = policy.forward(obs.as_vector());
    return ppo::sample_action(fwd.beta, unused, true).action;
  };
  out.actions.push_back(choose(env.observation()));
  out.cycles.push_back({0, env.observation().sz, out.actions.back()});
  for (int n = 1; n <= n_steps; ++n) {
    const rl::Observation truth = env.step(out.actions.back()).observation;
    if (n == n_steps) break;
    double measured = truth.sz;
    if (estimator) {
      measured = estimator(n, truth.sz);
    } else if (shots > 0) {
      const auto est =
          measurement::estimate_population(flip_probability(env.state()), det, shots, rng);
      measured = 2.0 * est.p_hat - 1.0;
    }
    rl::Observation obs = truth;
    obs.sz = measured;
    out.actions.push_back(choose(obs));
    out.cycles.push_back({n, measured, out.actions.back()});
  }
  out.sequence = env.committed();
  out.final_probability = flip_probability(env.state());
  out.final_sz = expectation_z(env.state());
  return out;
}

}  // namespace qflip::bench
