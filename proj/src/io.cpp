#include "qflip/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "qflip/config.hpp"
#include "qflip/errors.hpp"

namespace qflip::io {

using nlohmann::json;

std::string fmt_num(double x) { return fmt::format("{:.15g}", x); }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& net = ckpt.policy;
  json tensors = json::array();
  for (const auto& t : net.tensors()) {
    std::vector<double> values(net.parameters().data() + t.offset,
                               net.parameters().data() + t.offset + t.rows * t.cols);
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"values", values}});
  }
  return json{
      {"format", "qflip-policy"},
      {"version", kCheckpointVersion},
      {"config_fingerprint", ckpt.config_fingerprint},
      {"network",
       {{"hidden", net.shape().hidden},
        {"architecture",
         net.shape().architecture == ppo::Architecture::SharedTrunk ? "shared" : "split"}}},
      {"env", to_json(ckpt.env)},
      {"tensors", tensors},
  };
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "qflip-policy") throw ConfigError("checkpoint: unknown format");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError("checkpoint: unsupported version");
    }
    ppo::NetworkShape shape;
    shape.hidden = j.at("network").at("hidden").get<std::vector<int>>();
    const std::string arch = j.at("network").at("architecture");
    if (arch != "shared" && arch != "split") throw ConfigError("checkpoint: bad architecture");
    shape.architecture =
        arch == "shared" ? ppo::Architecture::SharedTrunk : ppo::Architecture::SplitNetworks;
    Checkpoint ckpt{ppo::PolicyNetwork(shape), env_from_json(j.at("env")),
                    j.at("config_fingerprint").get<std::string>()};
    const auto& layout = ckpt.policy.tensors();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != layout.size()) throw ConfigError("checkpoint: tensor count mismatch");
    ppo::Vector params(ckpt.policy.parameter_count());
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const auto& t = tensors[i];
      const auto& want = layout[i];
      if (t.at("name") != want.name || t.at("rows") != want.rows || t.at("cols") != want.cols) {
        throw ConfigError("checkpoint: tensor '" + want.name + "' has the wrong shape");
      }
      const auto values = t.at("values").get<std::vector<double>>();
      if (values.size() != static_cast<std::size_t>(want.rows * want.cols)) {
        throw ConfigError("checkpoint: tensor '" + want.name + "' has the wrong size");
      }
      std::copy(values.begin(), values.end(), params.data() + want.offset);
    }
    if (!params.allFinite()) throw NumericalError("checkpoint: non-finite parameters");
    ckpt.policy.set_parameters(params);
    return ckpt;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  auto out = open_output(path);
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

void write_header(std::ostream& out, const Header& header) {
  for (const auto& [k, v] : header) out << "# " << k << ": " << v << '\n';
}

void write_pulse_csv(std::ostream& out, const PulseSequence& seq, const Header& header) {
  write_header(out, header);
  out << "# omega_rad_s: " << fmt_num(seq.omega) << '\n';
  out << "step,t_start_s,duration_s,delta_rad_s,delta_over_omega\n";
  double t = 0.0;
  for (std::size_t i = 0; i < seq.steps.size(); ++i) {
    const auto& s = seq.steps[i];
    out << i + 1 << ',' << fmt_num(t) << ',' << fmt_num(s.duration) << ',' << fmt_num(s.delta)
        << ',' << fmt_num(s.delta / seq.omega) << '\n';
    t += s.duration;
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, int line_no, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("line {}: column {}: '{}' is not a number", line_no, column, text));
  }
}

}  // namespace

PulseSequence read_pulse_csv(std::istream& in, double fallback_omega) {
  PulseSequence seq{fallback_omega, {}};
  std::string line;
  int line_no = 0;
  int duration_col = -1, delta_col = -1;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# omega_rad_s:";
      if (line.rfind(key, 0) == 0) {
        std::string v = line.substr(key.size());
        v.erase(0, v.find_first_not_of(' '));
        seq.omega = parse_number(v, line_no, "omega_rad_s");
      }
      continue;
    }
    const auto cells = split(line);
    if (!header_seen) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c] == "duration_s") duration_col = static_cast<int>(c);
        if (cells[c] == "delta_rad_s") delta_col = static_cast<int>(c);
      }
      if (duration_col < 0 || delta_col < 0) {
        throw ConfigError(fmt::format(
            "line {}: pulse CSV header must contain duration_s and delta_rad_s", line_no));
      }
      header_seen = true;
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max(duration_col, delta_col));
    if (cells.size() <= need) {
      throw ConfigError(fmt::format("line {}: expected at least {} columns, found {}", line_no,
                                    need + 1, cells.size()));
    }
    const double duration = parse_number(cells[duration_col], line_no, "duration_s");
    const double delta = parse_number(cells[delta_col], line_no, "delta_rad_s");
    if (!(duration > 0.0)) {
      throw ConfigError(fmt::format("line {}: duration_s must be positive", line_no));
    }
    seq.steps.push_back({delta, duration});
  }
  if (!header_seen) throw ConfigError("pulse CSV: missing column header");
  if (seq.steps.empty()) throw ConfigError("pulse CSV: no pulse rows");
  if (!(seq.omega > 0.0)) throw ConfigError("pulse CSV: omega_rad_s missing and no fallback");
  return seq;
}

void write_sweep_csv(std::ostream& out, const bench::SweepResult& res, const Header& header) {
  write_header(out, header);
  write_header(out, res.metadata);
  const bool two_d = !res.y_label.empty();
  const bool has_log = !res.points.empty() && res.points.front().log_infidelity.has_value();
  out << res.x_label;
  if (two_d) out << ',' << res.y_label;
  out << ",exact_probability,p_hat,std,n_shots";
  if (has_log) out << ",log10_infidelity";
  for (const auto& [k, v] : res.metadata) out << ',' << k;
  out << '\n';
  for (const auto& p : res.points) {
    out << fmt_num(p.x);
    if (two_d) out << ',' << fmt_num(p.y.value_or(0.0));
    out << ',' << fmt_num(p.exact_probability) << ',' << fmt_num(p.estimate.p_hat) << ','
        << fmt_num(p.estimate.std) << ',' << p.estimate.n_shots;
    if (has_log) out << ',' << fmt_num(p.log_infidelity.value_or(0.0));
    for (const auto& kv : res.metadata) out << ',' << kv.second;
    out << '\n';
  }
}

void write_curve_csv(std::ostream& out, const std::vector<ppo::CurvePoint>& curve,
                     const Header& header) {
  write_header(out, header);
  out << "batch_index,phase,mean_return,policy_objective,value_loss,entropy,eval_score\n";
  for (const auto& p : curve) {
    out << p.batch_index << ',' << (p.phase == rl::Phase::Pretrain ? "pretrain" : "finetune")
        << ',' << fmt_num(p.mean_return) << ',' << fmt_num(p.policy_objective) << ','
        << fmt_num(p.value_loss) << ',' << fmt_num(p.entropy) << ','
        << (p.eval_score ? fmt_num(*p.eval_score) : "") << '\n';
  }
}

void write_feedback_csv(std::ostream& out, const bench::FeedbackResult& res,
                        const rl::EnvConfig& env, const Header& header) {
  write_header(out, header);
  out << "cycle,measured_sz,action,delta_over_omega\n";
  for (const auto& c : res.cycles) {
    out << c.cycle << ',' << fmt_num(c.measured_sz) << ',' << fmt_num(c.action) << ','
        << fmt_num(rl::decode_action(c.action, env.delta_max) / env.omega) << '\n';
  }
}

void write_waveform_csv(std::ostream& out, const waveform::PhasePlan& plan,
                        const waveform::WaveformSamples& wf, const Header& header) {
  write_header(out, header);
  out << "# f0_hz: " << fmt::format("{:.12g}", plan.f0) << '\n'
      << "# fc_hz: " << fmt::format("{:.12g}", plan.fc) << '\n'
      << "# sample_rate_hz: " << fmt::format("{:.12g}", wf.sample_rate) << '\n'
      << "# a2: " << fmt::format("{:.12g}", wf.a2) << '\n'
      << "# max_phase_jump_rad: " << fmt::format("{:.12g}", waveform::verify_continuity(plan))
      << '\n';
  for (std::size_t n = 0; n < plan.segments.size(); ++n) {
    const auto& s = plan.segments[n];
    out << fmt::format("# segment {}: delta_rad_s={:.12g} duration_s={:.12g} phase_offset_rad={:.12g}\n",
                       n + 1, s.delta, s.duration, s.phase_offset);
  }
  out << "time_s,amplitude\n";
  for (std::size_t k = 0; k < wf.samples.size(); ++k) {
    out << fmt::format("{:.12g},{:.12g}\n", static_cast<double>(k) / wf.sample_rate, wf.samples[k]);
  }
}

}  // namespace qflip::io
