#include "qflip/waveform.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qflip/errors.hpp"
#include "qflip/sta.hpp"

using namespace qflip;
using namespace qflip::waveform;

namespace {

constexpr double kPi = std::numbers::pi;
const double kOmega = 2.0 * kPi * 3300.0;
const double kW = 2.0 * kPi * (kDefaultF0 - kDefaultFc);

PulseSequence random_sequence(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  PulseSequence seq{kOmega, {}};
  for (int i = 0; i < n; ++i) seq.steps.push_back({u(rng) * kOmega, 15e-6});
  return seq;
}

}  // namespace

TEST(PhasePlan, ResonantSingleSegment) {
  const auto plan = build_phase_plan(PulseSequence{kOmega, {{0.0, 100e-6}}});
  for (double t : {0.0, 1e-9, 3.3e-6, 50e-6, 100e-6}) {
    EXPECT_NEAR(plan.phase_at(t), kW * t, 1e-15 * kW * t + 1e-15);
  }
  EXPECT_EQ(verify_continuity(plan), 0.0);
}

TEST(PhasePlan, EqualSegmentsCollapse) {
  const double d = 2.0 * kPi * 5000.0;
  const auto two = build_phase_plan(PulseSequence{kOmega, {{d, 40e-6}, {d, 40e-6}}});
  const auto one = build_phase_plan(PulseSequence{kOmega, {{d, 80e-6}}});
  for (int k = 0; k <= 200; ++k) {
    const double t = 80e-6 * k / 200.0;
    EXPECT_NEAR(two.phase_at(t), one.phase_at(t), 1e-15 * std::abs(one.phase_at(t)) + 1e-12);
  }
}

TEST(PhasePlan, OffsetsFollowRecursion) {
  const auto seq = random_sequence(5, 1);
  const auto plan = build_phase_plan(seq);
  double phi = 0.0;
  for (std::size_t n = 0; n < seq.steps.size(); ++n) {
    EXPECT_EQ(plan.segments[n].phase_offset, phi);
    phi = (kW + seq.steps[n].delta) * seq.steps[n].duration + phi;
  }
  EXPECT_EQ(plan.segments[0].phase_offset, 0.0);
}

TEST(PhasePlan, TwentySegmentContinuity) {
  const sta::StaAnsatz ans(sta::solve_a(sta::ErrorChannel::Rabi, kOmega), kOmega);
  for (const auto& seq : {sta::discretize(ans, 20), random_sequence(20, 2)}) {
    const auto plan = build_phase_plan(seq);
    EXPECT_LT(verify_continuity(plan), 1e-9);
    // One-sided limits straddling each boundary.
    double t = 0.0;
    for (std::size_t n = 0; n + 1 < seq.steps.size(); ++n) {
      t += seq.steps[n].duration;
      const double left = plan.end_phase(n);
      const double right = plan.phase_at(t);
      EXPECT_LT(std::abs(left - right), 1e-9 + 1e-15 * std::abs(left));
    }
  }
}

TEST(PhasePlan, ContinuityReportsInjectedJump) {
  auto plan = build_phase_plan(random_sequence(4, 3));
  plan.segments[2].phase_offset += 0.25;
  EXPECT_NEAR(verify_continuity(plan), 0.25, 1e-9);
  const auto single = build_phase_plan(PulseSequence{kOmega, {{1e4, 1e-5}}});
  EXPECT_EQ(verify_continuity(single), 0.0);
}

TEST(PhasePlan, RoundTripExact) {
  const auto seq = random_sequence(20, 4);
  const auto back = extract_sequence(build_phase_plan(seq));
  EXPECT_EQ(back.omega, seq.omega);
  ASSERT_EQ(back.steps.size(), seq.steps.size());
  for (std::size_t n = 0; n < seq.steps.size(); ++n) {
    EXPECT_EQ(back.steps[n].delta, seq.steps[n].delta);
    EXPECT_EQ(back.steps[n].duration, seq.steps[n].duration);
  }
}

TEST(PhasePlan, RejectsCarrierAboveResonance) {
  const PulseSequence seq{kOmega, {{0.0, 1e-6}}};
  EXPECT_THROW(build_phase_plan(seq, 12e9, 12e9), ConfigError);
  EXPECT_THROW(build_phase_plan(seq, 12e9, 13e9), ConfigError);
}

TEST(Sampling, CountAndRejections) {
  const auto plan = build_phase_plan(PulseSequence{kOmega, {{0.0, 10e-6}, {kOmega, 5.5e-6}}});
  const double rate = 2.0e9;
  const auto wf = sample_waveform(plan, rate);
  EXPECT_EQ(wf.samples.size(), static_cast<std::size_t>(std::ceil(15.5e-6 * rate)));
  EXPECT_THROW(sample_waveform(plan, 400e6), ConfigError);
  EXPECT_GT(nyquist_rate(plan), 400e6);
  EXPECT_NO_THROW(sample_waveform(plan, 1.01 * nyquist_rate(plan)));
}

TEST(Sampling, MatchesPhaseFunction) {
  const auto plan = build_phase_plan(random_sequence(6, 5));
  const double rate = 1.0e9;
  const auto wf = sample_waveform(plan, rate, 0.7);
  for (std::size_t k = 0; k < wf.samples.size(); k += 997) {
    EXPECT_NEAR(wf.samples[k], 0.7 * std::sin(plan.phase_at(k / rate)), 1e-9);
  }
}

TEST(Sampling, AmplitudeLinearity) {
  const auto plan = build_phase_plan(random_sequence(3, 6));
  const auto zero = sample_waveform(plan, 1e9, 0.0);
  for (double s : zero.samples) EXPECT_EQ(s, 0.0);
  const auto one = sample_waveform(plan, 1e9, 1.3);
  const auto two = sample_waveform(plan, 1e9, 2.6);
  for (std::size_t k = 0; k < one.samples.size(); ++k) {
    EXPECT_EQ(two.samples[k], 2.0 * one.samples[k]);
  }
}

TEST(Spectrum, ResonantPeakAtOffset) {
  const auto plan = build_phase_plan(PulseSequence{kOmega, {{0.0, 20e-6}}});
  const auto wf = sample_waveform(plan, 10.0 * (kDefaultF0 - kDefaultFc));
  const auto peak = dominant_frequency(wf);
  EXPECT_LE(std::abs(peak.frequency - (kDefaultF0 - kDefaultFc)), peak.bin_width);
}

TEST(Spectrum, ConstantDetuningShiftsPeak) {
  const double delta = 2.0 * kPi * 50e3;
  const auto plan = build_phase_plan(PulseSequence{kOmega, {{delta, 50e-6}, {delta, 50e-6}}});
  const auto wf = sample_waveform(plan, 2.0e9);
  const auto peak = dominant_frequency(wf);
  const double expected = (kW + delta) / (2.0 * kPi);
  EXPECT_LE(std::abs(peak.frequency - expected), peak.bin_width);
  EXPECT_LT(peak.bin_width, 50e3);
  EXPECT_GT(std::abs(peak.frequency - (kDefaultF0 - kDefaultFc)), peak.bin_width);
}
