#include "qflip/sta.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>
#include <boost/math/tools/minima.hpp>

#include "qflip/errors.hpp"

namespace qflip::sta {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;

// sin(x) - x, accurate for small x.
double sin_minus_identity(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return x * x2 * (-1.0 / 6.0 + x2 * (1.0 / 120.0 + x2 * (-1.0 / 5040.0 + x2 / 362880.0)));
  }
  return std::sin(x) - x;
}

// Distance (in units of T) from the nearest endpoint, and which endpoint.
struct EndpointOffset {
  double m;
  bool from_start;
};

EndpointOffset offset(double s) {
  return s <= 0.5 ? EndpointOffset{s, true} : EndpointOffset{1.0 - s, false};
}

// theta(s) a / (Omega T) measured from the closer endpoint:
//   near s = 0:  theta      = (Omega T / a) h(s)
//   near s = 1:  pi - theta = (Omega T / a) h(1 - s)
double bracket_from_endpoint(double a, double m) {
  const double half = std::sin(0.5 * kPi * m);
  return a * m + 0.5 * kPi2 * m * m - kPi2 / 3.0 * m * m * m - 2.0 * half * half;
}

// G(s) = sin(pi s) - pi s (1 - s), so that 1 - theta'/Omega = (pi / a) G.
double g_term(double m) {
  return sin_minus_identity(kPi * m) + kPi * m * m;
}

// Bracket of theta'' a T / Omega; odd under s -> 1 - s.
double curvature_term(double m, bool from_start) {
  const double half = std::sin(0.5 * kPi * m);
  const double k = 2.0 * kPi2 * half * half - 2.0 * kPi2 * m;
  return from_start ? k : -k;
}

void check_s(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw ConfigError("sta: normalized time s = " + std::to_string(s) + " outside [0, 1]");
  }
}

// c / sin(theta) with c = sqrt(1 - (theta'/Omega)^2).
double cos_beta_over_sin_theta(const StaAnsatz& ans, double s) {
  const auto [m, from_start] = offset(s);
  (void)from_start;
  if (m == 0.0) {
    return kPi * std::sqrt(2.0 / ans.a()) / (ans.omega() * ans.duration());
  }
  const double c2 = ans.sin_beta_complement_sq(s);
  if (c2 < 0.0) {
    throw NumericalError("sta: |theta'| exceeds Omega at s = " + std::to_string(s));
  }
  return std::sqrt(c2) / ans.sin_theta(s);
}

}  // namespace

std::string to_string(ErrorChannel channel) {
  return channel == ErrorChannel::Detuning ? "detuning" : "rabi";
}

ErrorChannel parse_channel(const std::string& name) {
  if (name == "detuning" || name == "delta") return ErrorChannel::Detuning;
  if (name == "rabi" || name == "omega") return ErrorChannel::Rabi;
  throw ConfigError("unknown error channel '" + name + "' (expected detuning|rabi)");
}

double duration(double a, double omega) {
  if (!(omega > 0.0)) {
    throw ConfigError("sta::duration: omega must be positive");
  }
  const double denom = a + kPi2 / 6.0 - 2.0;
  if (!(denom > 0.0) || !std::isfinite(a)) {
    throw ConfigError("sta::duration: a = " + std::to_string(a) +
                      " gives a non-positive duration (need a > 2 - pi^2/6)");
  }
  return kPi * a / (denom * omega);
}

StaAnsatz::StaAnsatz(double a, double omega)
    : a_(a), omega_(omega), duration_(sta::duration(a, omega)) {}

ThetaSample StaAnsatz::theta(double s) const {
  check_s(s);
  const auto [m, from_start] = offset(s);
  const double scale = omega_ * duration_ / a_;
  const double h = bracket_from_endpoint(a_, m);
  ThetaSample out;
  out.theta = from_start ? scale * h : kPi - scale * h;
  out.dtheta = omega_ * (1.0 - kPi / a_ * g_term(m));
  out.ddtheta = omega_ / (a_ * duration_) * curvature_term(m, from_start);
  return out;
}

double StaAnsatz::sin_beta_complement_sq(double s) const {
  check_s(s);
  const double one_minus_x = kPi / a_ * g_term(offset(s).m);
  return one_minus_x * (2.0 - one_minus_x);
}

double StaAnsatz::sin_theta(double s) const {
  check_s(s);
  const double scale = omega_ * duration_ / a_;
  return std::sin(scale * bracket_from_endpoint(a_, offset(s).m));
}

bool StaAnsatz::is_admissible(int grid) const {
  for (int k = 1; k < grid; ++k) {
    const double s = static_cast<double>(k) / grid;
    const double th = theta(s).theta;
    if (!(th > 0.0 && th < kPi)) return false;
    if (sin_beta_complement_sq(s) < 0.0) return false;
  }
  return true;
}

double delta_of_t(const StaAnsatz& ans, double t) {
  const double T = ans.duration();
  if (!(t >= 0.0 && t <= T)) {
    throw ConfigError("sta::delta_of_t: t outside [0, T]");
  }
  const double s = std::clamp(t / T, 0.0, 1.0);
  const auto [m, from_start] = offset(s);
  const double omega = ans.omega();
  if (m == 0.0) {
    const double limit = 2.0 * kPi / T * std::sqrt(2.0 / ans.a());
    return from_start ? limit : -limit;
  }
  const double c2 = ans.sin_beta_complement_sq(s);
  if (c2 < 0.0) {
    throw NumericalError("sta::delta_of_t: 1 - (theta'/Omega)^2 < 0 at t = " + std::to_string(t));
  }
  const double c = std::sqrt(c2);
  const ThetaSample th = ans.theta(s);
  const double phase = omega * T / ans.a() * bracket_from_endpoint(ans.a(), m);
  const double cos_theta = from_start ? std::cos(phase) : -std::cos(phase);
  const double sin_theta = std::sin(phase);
  const double delta = -th.ddtheta / (omega * c) + omega * cos_theta / sin_theta * c;
  if (!std::isfinite(delta)) {
    throw NumericalError("sta::delta_of_t: non-finite detuning at t = " + std::to_string(t));
  }
  return delta;
}

double peak_detuning(const StaAnsatz& ans, int samples) {
  double peak = 0.0;
  for (int k = 0; k <= samples; ++k) {
    const double t = ans.duration() * static_cast<double>(k) / samples;
    peak = std::max(peak, std::abs(delta_of_t(ans, std::min(t, ans.duration()))));
  }
  return peak;
}

double lr_phase(const StaAnsatz& ans, double t) {
  const double T = ans.duration();
  if (!(t >= 0.0 && t <= T)) {
    throw ConfigError("sta::lr_phase: t outside [0, T]");
  }
  if (t == 0.0) return 0.0;
  auto integrand = [&](double tp) {
    const double s = std::clamp(tp / T, 0.0, 1.0);
    return -0.5 * ans.omega() * cos_beta_over_sin_theta(ans, s);
  };
  double err = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, t, 15, 1e-10, &err, &l1);
  if (!std::isfinite(value) || err > 1e-8 * l1) {
    throw NumericalError("sta::lr_phase: quadrature did not converge (value " +
                         std::to_string(value) + ", error estimate " + std::to_string(err) +
                         ", L1 " + std::to_string(l1) + ")");
  }
  return value;
}

double error_functional(double a, ErrorChannel channel, double omega) {
  const StaAnsatz ans(a, omega);
  if (!ans.is_admissible()) {
    throw ConfigError("sta::error_functional: a = " + std::to_string(a) +
                      " yields an inadmissible theta profile");
  }
  const double T = ans.duration();

  // gamma_+ and the complex integral are carried together in normalized time
  // s = t / T. The weight multiplying exp(2 i gamma_+) is sin(theta) for
  // Detuning and theta' sin^2(theta) for Rabi; the constant -2i of the Rabi
  // term only rescales the modulus.
  using State = std::array<double, 3>;
  auto rhs = [&](const State& y, State& dyds, double s) {
    s = std::clamp(s, 0.0, 1.0);
    const double st = ans.sin_theta(s);
    const double w = channel == ErrorChannel::Detuning ? st : ans.theta(s).dtheta * st * st;
    dyds[0] = -0.5 * omega * T * cos_beta_over_sin_theta(ans, s);
    dyds[1] = T * w * std::cos(2.0 * y[0]);
    dyds[2] = T * w * std::sin(2.0 * y[0]);
  };
  State y{0.0, 0.0, 0.0};
  namespace ode = boost::numeric::odeint;
  ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-12, 1e-12),
                          rhs, y, 0.0, 1.0, 1e-3);
  if (!std::isfinite(y[0]) || !std::isfinite(y[1]) || !std::isfinite(y[2])) {
    throw NumericalError("sta::error_functional: integration produced non-finite values");
  }
  const double modulus = std::hypot(y[1], y[2]);
  return channel == ErrorChannel::Detuning ? modulus / T : 2.0 * modulus / kPi;
}

double solve_a(ErrorChannel channel, double omega, double max_peak_over_omega) {
  constexpr double kStep = 0.01;
  struct Probe {
    double a;
    double value;
  };
  std::vector<Probe> scan;
  for (int k = 37; k <= 149; ++k) {
    const double a = k * kStep;
    const StaAnsatz ans(a, omega);
    if (!ans.is_admissible()) continue;
    if (peak_detuning(ans, 2000) > max_peak_over_omega * omega) continue;
    scan.push_back({a, error_functional(a, channel, omega)});
  }
  if (scan.size() < 3) {
    throw NumericalError("sta::solve_a: fewer than three admissible grid points");
  }
  auto best = std::min_element(scan.begin(), scan.end(),
                               [](const Probe& x, const Probe& y) { return x.value < y.value; });
  if (best == scan.begin() || best + 1 == scan.end()) {
    throw NumericalError("sta::solve_a: minimum lies on the edge of the scan, no bracket");
  }
  const double lo = (best - 1)->a;
  const double hi = (best + 1)->a;
  if (std::abs(hi - lo - 2.0 * kStep) > 1e-9) {
    throw NumericalError("sta::solve_a: minimum is adjacent to an excluded region");
  }
  auto objective = [&](double a) { return error_functional(a, channel, omega); };
  // 20 bits of relative precision resolves a to well below 1e-4.
  const auto [a_star, value] = boost::math::tools::brent_find_minima(objective, lo, hi, 20);
  (void)value;
  return a_star;
}

PulseSequence discretize(const StaAnsatz& ans, int n) {
  if (n < 1) {
    throw ConfigError("sta::discretize: n must be >= 1");
  }
  PulseSequence seq;
  seq.omega = ans.omega();
  const double dt = ans.duration() / n;
  seq.steps.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t_mid = (i + 0.5) * dt;
    seq.steps.push_back({delta_of_t(ans, t_mid), dt});
  }
  return seq;
}

}  // namespace qflip::sta
