#pragma once

#include <numbers>
#include <string>

#include "qflip/dynamics.hpp"

namespace qflip::sta {

// Which systematic error the free parameter a is tuned to cancel.
enum class ErrorChannel { Detuning, Rabi };

std::string to_string(ErrorChannel channel);
ErrorChannel parse_channel(const std::string& name);

// Polar angle of the invariant eigenvector and its time derivatives.
struct ThetaSample {
  double theta = 0.0;
  double dtheta = 0.0;   // d theta / dt
  double ddtheta = 0.0;  // d^2 theta / dt^2
};

// Lower bound on a: the duration formula has a pole at a = 2 - pi^2/6.
inline constexpr double kMinA = 2.0 - std::numbers::pi * std::numbers::pi / 6.0;

// Total duration pi a / ((a + pi^2/6 - 2) omega). Throws ConfigError when
// a <= kMinA or omega <= 0.
double duration(double a, double omega);

// theta(s) = (Omega T / a) [a s - (pi^2/2)(1-s)^2 + (pi^2/3)(1-s)^3 + cos(pi s) + A]
// with A = pi^2/6 - 1 and s = t / T. The boundary conditions
// theta(0) = 0, theta(T) = pi, theta' = Omega and theta'' = 0 at both ends fix
// the polynomial coefficients and the duration T.
class StaAnsatz {
 public:
  static constexpr double kA = std::numbers::pi * std::numbers::pi / 6.0 - 1.0;

  StaAnsatz(double a, double omega);

  double a() const { return a_; }
  double omega() const { return omega_; }
  double duration() const { return duration_; }

  // s must lie in [0, 1].
  ThetaSample theta(double s) const;

  // 1 - (theta'/Omega)^2 evaluated without cancellation near the endpoints.
  double sin_beta_complement_sq(double s) const;
  // sin(theta) evaluated from whichever endpoint is closer.
  double sin_theta(double s) const;

  // True when theta stays inside (0, pi) and |theta'| <= Omega on (0, T),
  // i.e. the auxiliary equations admit a real beta and Delta(t) is finite.
  bool is_admissible(int grid = 2000) const;

 private:
  double a_;
  double omega_;
  double duration_;
};

// Delta(t) = -theta'' / (Omega cos b) + Omega cot(theta) cos b,
// cos b = sqrt(1 - (theta'/Omega)^2). Endpoints return the one-sided limits.
double delta_of_t(const StaAnsatz& ansatz, double t);

// Largest |Delta(t)| over [0, T], sampled on `samples` + 1 points.
double peak_detuning(const StaAnsatz& ansatz, int samples = 10000);

// Lewis-Riesenfeld phase gamma_+(t) = (1/2) int_0^t theta' cot(beta) / sin(theta) dt'.
double lr_phase(const StaAnsatz& ansatz, double t);

// |int_0^T exp(2 i gamma_+) f(t) dt| with f = sin(theta) (Detuning, divided by
// T) or f = -2 i theta' sin^2(theta) (Rabi, divided by pi).
double error_functional(double a, ErrorChannel channel, double omega);

// Minimizes error_functional over a: 0.01 grid scan on (0.36, 1.5) followed by
// Brent refinement to |da| < 1e-4. Grid points whose profile needs a peak
// detuning above max_peak_over_omega * Omega are skipped; close to the pole the
// LR phase winds quickly and the functional has many roots that all demand
// detuning amplitudes far beyond Omega.
inline constexpr double kDefaultMaxPeakDetuning = 2.0;
double solve_a(ErrorChannel channel, double omega,
               double max_peak_over_omega = kDefaultMaxPeakDetuning);

// n equal steps of T/n, each carrying Delta at the interval midpoint.
PulseSequence discretize(const StaAnsatz& ansatz, int n);

}  // namespace qflip::sta
