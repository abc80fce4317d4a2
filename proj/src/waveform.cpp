#include "qflip/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "qflip/errors.hpp"

namespace qflip::waveform {

double PhasePlan::offset_angular() const { return 2.0 * std::numbers::pi * (f0 - fc); }

double PhasePlan::total_duration() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.duration;
  return t;
}

double PhasePlan::end_phase(std::size_t n) const {
  const PhaseSegment& s = segments.at(n);
  return (offset_angular() + s.delta) * s.duration + s.phase_offset;
}

double PhasePlan::phase_at(double t) const {
  if (segments.empty()) throw ConfigError("PhasePlan: no segments");
  double start = 0.0;
  for (std::size_t n = 0; n < segments.size(); ++n) {
    const PhaseSegment& s = segments[n];
    if (t < start + s.duration || n + 1 == segments.size()) {
      const double tau = std::max(0.0, t - start);
      return (offset_angular() + s.delta) * tau + s.phase_offset;
    }
    start += s.duration;
  }
  return 0.0;
}

PhasePlan build_phase_plan(const PulseSequence& seq, double f0, double fc) {
  if (!(f0 > fc)) throw ConfigError("build_phase_plan: need f0 > fc");
  if (!(fc > 0.0)) throw ConfigError("build_phase_plan: fc must be positive");
  seq.validate();
  PhasePlan plan;
  plan.f0 = f0;
  plan.fc = fc;
  plan.omega = seq.omega;
  double offset = 0.0;
  for (std::size_t n = 0; n < seq.steps.size(); ++n) {
    plan.segments.push_back({seq.steps[n].delta, seq.steps[n].duration, offset});
    offset = plan.end_phase(n);
  }
  return plan;
}

PulseSequence extract_sequence(const PhasePlan& plan) {
  PulseSequence seq{plan.omega, {}};
  for (const auto& s : plan.segments) seq.steps.push_back({s.delta, s.duration});
  return seq;
}

double verify_continuity(const PhasePlan& plan) {
  double worst = 0.0;
  for (std::size_t n = 0; n + 1 < plan.segments.size(); ++n) {
    worst = std::max(worst, std::abs(plan.end_phase(n) - plan.segments[n + 1].phase_offset));
  }
  return worst;
}

double nyquist_rate(const PhasePlan& plan) {
  double max_delta = 0.0;
  for (const auto& s : plan.segments) max_delta = std::max(max_delta, std::abs(s.delta));
  return 2.0 * ((plan.f0 - plan.fc) + max_delta / (2.0 * std::numbers::pi));
}

WaveformSamples sample_waveform(const PhasePlan& plan, double rate, double a2) {
  if (plan.segments.empty()) throw ConfigError("sample_waveform: empty plan");
  if (!(rate > nyquist_rate(plan))) {
    throw ConfigError("sample_waveform: rate " + std::to_string(rate) +
                      " Hz is at or below the Nyquist rate " +
                      std::to_string(nyquist_rate(plan)) + " Hz");
  }
  WaveformSamples wf;
  wf.sample_rate = rate;
  wf.a2 = a2;
  const auto n = static_cast<std::size_t>(std::ceil(plan.total_duration() * rate));
  wf.samples.resize(n);
  // Walk segments alongside the sample grid instead of searching per sample.
  std::size_t seg = 0;
  double seg_start = 0.0;
  const double w = plan.offset_angular();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate;
    while (seg + 1 < plan.segments.size() && t >= seg_start + plan.segments[seg].duration) {
      seg_start += plan.segments[seg].duration;
      ++seg;
    }
    const PhaseSegment& s = plan.segments[seg];
    const double tau = t - seg_start;
    wf.samples[k] = a2 * std::sin((w + s.delta) * tau + s.phase_offset);
  }
  return wf;
}

SpectralPeak dominant_frequency(const WaveformSamples& wf) {
  const int n = static_cast<int>(wf.samples.size());
  if (n < 4) throw ConfigError("dominant_frequency: need at least 4 samples");
  std::vector<double> in(wf.samples);
  const int bins = n / 2 + 1;
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(bins));
  if (out == nullptr) throw NumericalError("dominant_frequency: FFT allocation failed");
  // FFTW planning is not thread-safe; callers keep this off worker threads.
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE);
  fftw_execute(plan);
  int best = 1;
  double best_mag = -1.0;
  for (int k = 1; k < bins; ++k) {
    const double mag = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
  const double width = wf.sample_rate / n;
  return {best * width, width};
}

}  // namespace qflip::waveform
