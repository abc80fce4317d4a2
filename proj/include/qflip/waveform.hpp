#pragma once

#include <vector>

#include "qflip/dynamics.hpp"

namespace qflip::waveform {

inline constexpr double kDefaultF0 = 12.6428e9;  // Hz, qubit resonance
inline constexpr double kDefaultFc = 12.4428e9;  // Hz, microwave carrier

struct PhaseSegment {
  double delta = 0.0;         // rad/s
  double duration = 0.0;      // s
  double phase_offset = 0.0;  // rad, phase at the segment's local time 0
};

// Piecewise phase program phi(t): inside segment n, at local time tau,
// phi = (w0 - wc) tau + delta_n tau + phi_{n-1}.
struct PhasePlan {
  double f0 = kDefaultF0;
  double fc = kDefaultFc;
  double omega = 0.0;  // Rabi frequency of the source sequence, rad/s
  std::vector<PhaseSegment> segments;

  double offset_angular() const;  // w0 - wc, rad/s
  double total_duration() const;
  // Phase at the end of segment n (local time = its duration).
  double end_phase(std::size_t n) const;
  // Phase at absolute time t in [0, total_duration]. At a boundary the later
  // segment is used.
  double phase_at(double t) const;
};

// Rejects f0 <= fc.
PhasePlan build_phase_plan(const PulseSequence& seq, double f0 = kDefaultF0,
                           double fc = kDefaultFc);

// Recovers the detunings and durations.
PulseSequence extract_sequence(const PhasePlan& plan);

// max over boundaries of |phi_end(n) - phi_start(n + 1)|.
double verify_continuity(const PhasePlan& plan);

struct WaveformSamples {
  double sample_rate = 0.0;  // Hz
  double a2 = 1.0;
  std::vector<double> samples;  // I(t_k) = a2 sin(phi(k / rate))
};

// Lowest rate accepted by sample_waveform.
double nyquist_rate(const PhasePlan& plan);

// Rejects rates at or below nyquist_rate(plan).
WaveformSamples sample_waveform(const PhasePlan& plan, double rate, double a2 = 1.0);

struct SpectralPeak {
  double frequency = 0.0;  // Hz
  double bin_width = 0.0;  // Hz
};

// Dominant positive-frequency component of the real signal.
SpectralPeak dominant_frequency(const WaveformSamples& wf);

}  // namespace qflip::waveform
