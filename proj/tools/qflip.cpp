// qflip command-line driver: STA design, DRL training, benchmark sweeps,
// closed-loop feedback and waveform compilation.
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "qflip/bench.hpp"
#include "qflip/config.hpp"
#include "qflip/errors.hpp"
#include "qflip/io.hpp"
#include "qflip/ppo.hpp"
#include "qflip/sta.hpp"
#include "qflip/waveform.hpp"

using namespace qflip;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Options shared by the config-driven commands.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config (schema_version 1)");
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--threads", threads, "Worker threads (0 = available cores)");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    cfg.validate();
    return cfg;
  }
};

io::Header header(const std::string& command, const std::string& fp) {
  return {{"qflip", command}, {"config_fingerprint", fp}};
}

void write_text(const std::string& path, const std::string& text) {
  auto out = io::open_output(path);
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

// ---- sta-design -----------------------------------------------------------

struct StaDesignArgs {
  std::string channel = "detuning";
  double omega_hz = 3300.0;
  int n_steps = 20;
  std::string out = "sta_pulses.csv";
};

void run_sta_design(const StaDesignArgs& a) {
  if (!(a.omega_hz > 0.0)) throw ConfigError("--omega-hz must be positive");
  if (a.n_steps < 1) throw ConfigError("--n-steps must be >= 1");
  const auto channel = sta::parse_channel(a.channel);
  const double omega = kTwoPi * a.omega_hz;
  const double param = sta::solve_a(channel, omega);
  const sta::StaAnsatz ans(param, omega);
  const double peak = sta::peak_detuning(ans);
  const auto seq = sta::discretize(ans, a.n_steps);
  const json resolved = {{"command", "sta-design"}, {"channel", sta::to_string(channel)},
                         {"omega_hz", a.omega_hz}, {"n_steps", a.n_steps}};
  auto out = io::open_output(a.out);
  io::Header h = header("sta-design", fingerprint(resolved));
  h.emplace_back("channel", sta::to_string(channel));
  h.emplace_back("a", io::fmt_num(param));
  h.emplace_back("duration_s", io::fmt_num(ans.duration()));
  h.emplace_back("peak_delta_over_omega", io::fmt_num(peak / omega));
  io::write_pulse_csv(out, seq, h);
  fmt::print("channel {}\na {:.6f}\nT_us {:.3f}\npeak_delta_over_omega {:.4f}\nwrote {}\n",
             sta::to_string(channel), param, ans.duration() * 1e6, peak / omega, a.out);
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string out = "policy.json";
  std::string curve = "curve.csv";
  std::string pretrained_out;
  std::optional<int> pretrain_episodes;
  std::optional<int> finetune_episodes;
  bool verbose = false;
};

void run_train(const TrainArgs& a) {
  RunConfig cfg = a.common.resolve();
  if (a.pretrain_episodes) cfg.schedule.pretrain_episodes = *a.pretrain_episodes;
  if (a.finetune_episodes) cfg.schedule.finetune_episodes = *a.finetune_episodes;
  cfg.validate();
  const std::string fp = fingerprint(cfg);
  ppo::ProgressCallback progress;
  if (a.verbose) {
    progress = [](const ppo::CurvePoint& p) {
      if (p.batch_index % 100 == 0 || p.eval_score) {
        fmt::print(stderr, "batch {} {} return {:.4f} entropy {:.4f}{}\n", p.batch_index,
                   p.phase == rl::Phase::Pretrain ? "pretrain" : "finetune", p.mean_return,
                   p.entropy, p.eval_score ? fmt::format(" eval {:.5f}", *p.eval_score) : "");
      }
    };
  }
  const auto result = ppo::train(cfg.env, cfg.ppo, cfg.schedule, cfg.seed, cfg.network, progress);
  io::write_checkpoint(a.out, {result.policy, cfg.env, fp});
  if (!a.pretrained_out.empty()) {
    io::write_checkpoint(a.pretrained_out, {result.pretrained, cfg.env, fp});
  }
  {
    auto out = io::open_output(a.curve);
    io::write_curve_csv(out, result.curve, header("train", fp));
  }
  rl::EnvConfig eval_env = cfg.env;
  eval_env.phase = rl::Phase::Finetune;
  const auto r = rl::rollout(result.policy, eval_env, true, 0, std::make_pair(0.0, 0.0));
  fmt::print("final_sz {:.6f}\nsuccess {}\nbest_score {:.6f}\nwrote {} {}\n", r.final_sz,
             r.final_sz > cfg.env.success_threshold ? "yes" : "no", result.best_score, a.out,
             a.curve);
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::string method = "pi_pulse";
  std::string checkpoint;
  std::string out = "sweep.csv";
  std::string svg;
  std::optional<long> shots;
  std::optional<std::string> type;
};

bench::Method build_method(const std::string& name, const std::string& checkpoint,
                           const RunConfig& cfg, std::string& ckpt_fp) {
  const auto kind = bench::parse_method(name);
  if (kind == bench::MethodKind::DrlPolicy || kind == bench::MethodKind::FeedbackDrl) {
    if (checkpoint.empty()) {
      throw ConfigError("method " + name + " needs --checkpoint");
    }
    auto ckpt = io::read_checkpoint(checkpoint);
    ckpt_fp = ckpt.config_fingerprint;
    auto m = bench::Method::drl(kind, std::make_shared<const ppo::PolicyNetwork>(ckpt.policy),
                                ckpt.env);
    m.feedback_shots = cfg.sweep.feedback_shots;
    m.feedback_detector = cfg.detector;
    return m;
  }
  if (kind == bench::MethodKind::PiPulse) return bench::Method::pi_pulse(cfg.env.omega);
  return bench::Method::sta(kind, cfg.env.omega, cfg.sweep.sta_steps);
}

void run_sweep(const SweepArgs& a) {
  RunConfig cfg = a.common.resolve();
  if (a.shots) cfg.sweep.shots = *a.shots;
  if (a.type) cfg.sweep.type = *a.type;
  cfg.validate();
  std::string ckpt_fp;
  const auto method = build_method(a.method, a.checkpoint, cfg, ckpt_fp);
  bench::MeasureSpec spec;
  spec.shots = cfg.sweep.shots;
  spec.detector = cfg.detector;
  spec.seed = cfg.seed;
  spec.threads = cfg.resolved_threads();

  bench::SweepResult res;
  const auto& sw = cfg.sweep;
  if (sw.type == "1d") {
    const auto axis = sw.axis == "rabi" ? bench::ErrorAxis::RabiError : bench::ErrorAxis::DetuningError;
    res = bench::sweep_1d(method, axis, sw.grid, spec, sw.t2_s);
  } else if (sw.type == "hybrid") {
    res = bench::sweep_hybrid(method, sw.rabi_grid, sw.detuning_grid, spec);
  } else {
    if (!sw.t2_s) throw ConfigError("dephasing sweeps need sweep.t2_s");
    const auto mode = sw.mode == "rabi_time" ? bench::DephasingMode::RabiTime
                                             : bench::DephasingMode::FlipRepetition;
    res = bench::sweep_dephasing(method, mode, sw.grid, *sw.t2_s, spec);
  }
  json resolved = to_json(cfg);
  resolved["command"] = "sweep";
  resolved["method"] = a.method;
  resolved["checkpoint_fingerprint"] = ckpt_fp;
  resolved.erase("threads");  // results do not depend on the worker count
  io::Header h = header("sweep", fingerprint(resolved));
  if (!ckpt_fp.empty()) h.emplace_back("checkpoint_fingerprint", ckpt_fp);
  {
    auto out = io::open_output(a.out);
    io::write_sweep_csv(out, res, h);
  }
  std::string svg_path = a.svg;
  if (svg_path.empty() && sw.svg) svg_path = a.out + ".svg";
  if (!svg_path.empty()) write_text(svg_path, io::render_svg(res));
  fmt::print("points {}\nwrote {}{}\n", res.points.size(), a.out,
             svg_path.empty() ? "" : " " + svg_path);
}

// ---- feedback -------------------------------------------------------------

struct FeedbackArgs {
  Common common;
  std::string checkpoint;
  std::string out = "feedback.csv";
  std::string sequence_out;
  long shots = 2000;
  double delta_omega = 0.0;
  double delta_delta = 0.0;
};

void run_feedback(const FeedbackArgs& a) {
  const RunConfig cfg = a.common.resolve();
  if (a.checkpoint.empty()) throw ConfigError("feedback needs --checkpoint");
  if (a.shots < 0) throw ConfigError("--shots must be >= 0");
  const auto ckpt = io::read_checkpoint(a.checkpoint);
  rl::EnvConfig env = ckpt.env;
  env.phase = rl::Phase::Finetune;
  const ErrorModel errors{a.delta_omega, a.delta_delta, std::nullopt};
  const auto fb = bench::feedback_protocol(ckpt.policy, env, cfg.detector, a.shots, cfg.seed, errors);
  const auto open = rl::rollout(ckpt.policy, env, true, 0, std::make_pair(a.delta_omega, a.delta_delta));

  json resolved = to_json(cfg);
  resolved["command"] = "feedback";
  resolved["shots"] = a.shots;
  resolved["errors"] = {a.delta_omega, a.delta_delta};
  resolved["checkpoint_fingerprint"] = ckpt.config_fingerprint;
  resolved.erase("threads");
  io::Header h = header("feedback", fingerprint(resolved));
  h.emplace_back("shots_per_cycle", std::to_string(a.shots));
  h.emplace_back("final_probability", io::fmt_num(fb.final_probability));
  h.emplace_back("open_loop_probability", io::fmt_num(open.final_flip_probability));
  {
    auto out = io::open_output(a.out);
    io::write_feedback_csv(out, fb, env, h);
  }
  if (!a.sequence_out.empty()) {
    auto out = io::open_output(a.sequence_out);
    io::write_pulse_csv(out, fb.sequence, h);
  }
  const double p = open.final_flip_probability;
  const double sigma = a.shots > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(a.shots)) : 0.0;
  fmt::print("final_probability {:.6f}\nopen_loop_probability {:.6f}\nbinomial_sigma {:.6f}\nwrote {}\n",
             fb.final_probability, p, sigma, a.out);
}

// ---- waveform -------------------------------------------------------------

struct WaveformArgs {
  std::string pulses;
  double f0_hz = waveform::kDefaultF0;
  double fc_hz = waveform::kDefaultFc;
  double rate_hz = 2.0e9;
  double a2 = 1.0;
  double omega_hz = 0.0;
  std::string out = "waveform.csv";
};

void run_waveform(const WaveformArgs& a) {
  std::ifstream in(a.pulses);
  if (!in) throw IoError("cannot open pulse file '" + a.pulses + "'");
  const auto seq = io::read_pulse_csv(in, kTwoPi * a.omega_hz);
  const auto plan = waveform::build_phase_plan(seq, a.f0_hz, a.fc_hz);
  const auto wf = waveform::sample_waveform(plan, a.rate_hz, a.a2);
  json content = json::array();
  for (const auto& s : seq.steps) content.push_back({s.delta, s.duration});
  const json fp_input = {{"command", "waveform"}, {"f0_hz", a.f0_hz}, {"fc_hz", a.fc_hz},
                         {"rate_hz", a.rate_hz}, {"a2", a.a2}, {"omega_rad_s", seq.omega},
                         {"pulses", content}};
  auto out = io::open_output(a.out);
  io::write_waveform_csv(out, plan, wf, header("waveform", fingerprint(fp_input)));
  fmt::print("segments {}\nsamples {}\nmax_phase_jump_rad {:.3e}\nwrote {}\n", plan.segments.size(),
             wf.samples.size(), waveform::verify_continuity(plan), a.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qflip: robust qubit-flip pulse design (STA, PPO agent, benchmarks)"};
  app.require_subcommand(1);

  StaDesignArgs sta_args;
  auto* sta_cmd = app.add_subcommand("sta-design", "Solve the STA ansatz and write a pulse CSV");
  sta_cmd->add_option("--channel", sta_args.channel, "detuning | rabi")->capture_default_str();
  sta_cmd->add_option("--omega-hz", sta_args.omega_hz, "Rabi frequency Omega/2pi")->capture_default_str();
  sta_cmd->add_option("--n-steps", sta_args.n_steps, "Piecewise-constant steps")->capture_default_str();
  sta_cmd->add_option("--out", sta_args.out, "Pulse CSV: step,t_start_s,duration_s,delta_rad_s,delta_over_omega")
      ->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Pretrain and fine-tune the PPO agent");
  train_args.common.add(train_cmd);
  train_cmd->add_option("--out", train_args.out, "Checkpoint (best evaluation)")->capture_default_str();
  train_cmd->add_option("--curve", train_args.curve,
                        "Curve CSV: batch_index,phase,mean_return,policy_objective,value_loss,entropy,eval_score")
      ->capture_default_str();
  train_cmd->add_option("--pretrained-out", train_args.pretrained_out, "Checkpoint at the phase boundary");
  train_cmd->add_option("--pretrain-episodes", train_args.pretrain_episodes, "Override the schedule");
  train_cmd->add_option("--finetune-episodes", train_args.finetune_episodes, "Override the schedule");
  train_cmd->add_flag("--verbose", train_args.verbose, "Progress on stderr");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Benchmark sweep (1d, hybrid or dephasing)");
  sweep_args.common.add(sweep_cmd);
  sweep_cmd->add_option("--method", sweep_args.method,
                        "pi_pulse | sta_detuning | sta_rabi | drl | feedback_drl")
      ->capture_default_str();
  sweep_cmd->add_option("--checkpoint", sweep_args.checkpoint, "Policy checkpoint for DRL methods");
  sweep_cmd->add_option("--out", sweep_args.out,
                        "Sweep CSV: axis value(s),exact_probability,p_hat,std,n_shots[,log10_infidelity],metadata...")
      ->capture_default_str();
  sweep_cmd->add_option("--svg", sweep_args.svg, "Also write an SVG chart");
  sweep_cmd->add_option("--shots", sweep_args.shots, "Shots per point (0 = exact)");
  sweep_cmd->add_option("--type", sweep_args.type, "1d | hybrid | dephasing");

  FeedbackArgs fb_args;
  auto* fb_cmd = app.add_subcommand("feedback", "Closed-loop 19-cycle feedback protocol");
  fb_args.common.add(fb_cmd);
  fb_cmd->add_option("--checkpoint", fb_args.checkpoint, "Policy checkpoint")->required();
  fb_cmd->add_option("--out", fb_args.out, "Cycle log CSV: cycle,measured_sz,action,delta_over_omega")
      ->capture_default_str();
  fb_cmd->add_option("--sequence-out", fb_args.sequence_out, "Committed sequence as pulse CSV");
  fb_cmd->add_option("--shots", fb_args.shots, "Shots per cycle (0 = exact)")->capture_default_str();
  fb_cmd->add_option("--delta-omega", fb_args.delta_omega, "Relative Rabi error")->capture_default_str();
  fb_cmd->add_option("--delta-delta", fb_args.delta_delta, "Detuning error / Omega")->capture_default_str();

  WaveformArgs wf_args;
  auto* wf_cmd = app.add_subcommand("waveform", "Compile a pulse CSV into AWG samples");
  wf_cmd->add_option("--pulses", wf_args.pulses, "Pulse CSV")->required();
  wf_cmd->add_option("--f0-hz", wf_args.f0_hz, "Qubit resonance")->capture_default_str();
  wf_cmd->add_option("--fc-hz", wf_args.fc_hz, "Carrier")->capture_default_str();
  wf_cmd->add_option("--rate-hz", wf_args.rate_hz, "Sample rate")->capture_default_str();
  wf_cmd->add_option("--a2", wf_args.a2, "Modulation amplitude")->capture_default_str();
  wf_cmd->add_option("--omega-hz", wf_args.omega_hz, "Omega/2pi if the CSV has no omega_rad_s line");
  wf_cmd->add_option("--out", wf_args.out, "Waveform CSV: time_s,amplitude")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sta_cmd) run_sta_design(sta_args);
    if (*train_cmd) run_train(train_args);
    if (*sweep_cmd) run_sweep(sweep_args);
    if (*fb_cmd) run_feedback(fb_args);
    if (*wf_cmd) run_waveform(wf_args);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return 2;
  } catch (const IoError& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return 3;
  }
  return 0;
}
