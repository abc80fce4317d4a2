#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qflip/bench.hpp"
#include "qflip/dynamics.hpp"
#include "qflip/network.hpp"
#include "qflip/ppo.hpp"
#include "qflip/rl_env.hpp"
#include "qflip/waveform.hpp"

namespace qflip::io {

using Header = std::vector<std::pair<std::string, std::string>>;

// 15 significant digits.
std::string fmt_num(double x);

struct Checkpoint {
  ppo::PolicyNetwork policy;
  rl::EnvConfig env;  // environment the policy was trained in
  std::string config_fingerprint;
};

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Every CSV starts with "# key: value" comment lines.
void write_header(std::ostream& out, const Header& header);

// Columns: step, t_start_s, duration_s, delta_rad_s, delta_over_omega.
void write_pulse_csv(std::ostream& out, const PulseSequence& seq, const Header& header);
// Reads a pulse CSV; omega comes from the "omega_rad_s" header line, or
// `fallback_omega` when absent. Malformed rows raise ConfigError naming the
// line.
PulseSequence read_pulse_csv(std::istream& in, double fallback_omega = 0.0);

void write_sweep_csv(std::ostream& out, const bench::SweepResult& res, const Header& header);

// Columns: batch_index, phase, mean_return, policy_objective, value_loss,
// entropy, eval_score (empty when not evaluated).
void write_curve_csv(std::ostream& out, const std::vector<ppo::CurvePoint>& curve,
                     const Header& header);

// Columns: cycle, measured_sz, action, delta_over_omega.
void write_feedback_csv(std::ostream& out, const bench::FeedbackResult& res,
                        const rl::EnvConfig& env, const Header& header);

// Columns: time_s, amplitude. The plan is summarized in the header.
void write_waveform_csv(std::ostream& out, const waveform::PhasePlan& plan,
                        const waveform::WaveformSamples& wf, const Header& header);

// Line chart for 1-D sweeps, heatmap of log10 infidelity for hybrid sweeps.
std::string render_svg(const bench::SweepResult& res);

// Opens for writing or throws IoError.
std::ofstream open_output(const std::string& path);

}  // namespace qflip::io
