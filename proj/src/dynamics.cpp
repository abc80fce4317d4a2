#include "qflip/dynamics.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "qflip/errors.hpp"

namespace qflip {

namespace {

constexpr Complex kI{0.0, 1.0};

Matrix2c hamiltonian(double omega, double delta) {
  return 0.5 * (omega * pauli_x() + delta * pauli_z());
}

// Effective controls of one step after injecting the systematic errors.
struct Controls {
  double omega;
  double delta;
};

Controls perturbed(double omega, double delta, const ErrorModel& err) {
  return {omega * (1.0 + err.delta_omega), delta + err.delta_delta * omega};
}

}  // namespace

Matrix2c pauli_x() {
  Matrix2c m;
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

Matrix2c pauli_y() {
  Matrix2c m;
  m << 0.0, -kI, kI, 0.0;
  return m;
}

Matrix2c pauli_z() {
  Matrix2c m;
  m << -1.0, 0.0, 0.0, 1.0;
  return m;
}

QubitState::QubitState() : QubitState(ground()) {}

QubitState::QubitState(const Matrix2c& rho) : rho_(rho) {}

QubitState QubitState::ground() {
  Matrix2c m = Matrix2c::Zero();
  m(0, 0) = 1.0;
  return QubitState(m);
}

QubitState QubitState::excited() {
  Matrix2c m = Matrix2c::Zero();
  m(1, 1) = 1.0;
  return QubitState(m);
}

QubitState QubitState::maximally_mixed() {
  return QubitState(Matrix2c::Identity() * 0.5);
}

QubitState QubitState::from_ket(Complex c0, Complex c1) {
  Eigen::Vector2cd ket(c0, c1);
  double norm = ket.norm();
  if (!(norm > 0.0)) {
    throw ConfigError("QubitState::from_ket: zero vector");
  }
  ket /= norm;
  return QubitState(ket * ket.adjoint());
}

double QubitState::trace_error() const {
  return std::abs(rho_.trace() - 1.0);
}

double QubitState::hermiticity_error() const {
  return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
}

Eigen::Vector2d QubitState::eigenvalues() const {
  Matrix2c herm = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix2c> solver(herm, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

bool QubitState::is_valid(double tol) const {
  if (!rho_.allFinite()) return false;
  if (trace_error() > tol || hermiticity_error() > tol) return false;
  Eigen::Vector2d ev = eigenvalues();
  return ev(0) >= -tol && ev(1) <= 1.0 + tol;
}

double PulseSequence::total_duration() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.duration;
  return total;
}

void PulseSequence::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw ConfigError("PulseSequence: omega must be positive, got " + std::to_string(omega));
  }
  if (steps.empty()) {
    throw ConfigError("PulseSequence: no steps");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i].duration > 0.0) || !std::isfinite(steps[i].duration)) {
      throw ConfigError("PulseSequence: step " + std::to_string(i) +
                        " has non-positive duration");
    }
    if (!std::isfinite(steps[i].delta)) {
      throw ConfigError("PulseSequence: step " + std::to_string(i) + " has non-finite detuning");
    }
  }
}

void ErrorModel::validate() const {
  if (!std::isfinite(delta_omega) || !std::isfinite(delta_delta)) {
    throw ConfigError("ErrorModel: non-finite error");
  }
  if (t2 && !(*t2 > 0.0)) {
    throw ConfigError("ErrorModel: t2 must be positive");
  }
}

Matrix2c step_unitary(double omega, double delta, double dt) {
  const double w = std::hypot(omega, delta);
  if (w == 0.0 || dt == 0.0) return Matrix2c::Identity();
  const double phi = 0.5 * dt * w;
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  const double nx = omega / w;
  const double nz = delta / w;
  Matrix2c u;
  u << Complex(c, s * nz), Complex(0.0, -s * nx),
       Complex(0.0, -s * nx), Complex(c, -s * nz);
  return u;
}

QubitState evolve_unitary(const QubitState& state, const PulseSequence& seq,
                          const ErrorModel& err) {
  seq.validate();
  err.validate();
  Matrix2c u = Matrix2c::Identity();
  for (const auto& step : seq.steps) {
    auto [om, de] = perturbed(seq.omega, step.delta, err);
    u = step_unitary(om, de, step.duration) * u;
  }
  return QubitState(u * state.rho() * u.adjoint());
}

QubitState evolve_lindblad(const QubitState& state, const PulseSequence& seq,
                           const ErrorModel& err, int substeps_per_pulse) {
  if (!err.t2) {
    throw ConfigError("evolve_lindblad: t2 is required");
  }
  if (substeps_per_pulse < 1) {
    throw ConfigError("evolve_lindblad: substeps_per_pulse must be >= 1");
  }
  seq.validate();
  err.validate();

  const double gamma = 0.5 / *err.t2;
  const Matrix2c z = pauli_z();
  Matrix2c rho = state.rho();

  for (const auto& step : seq.steps) {
    auto [om, de] = perturbed(seq.omega, step.delta, err);
    const Matrix2c mih = -kI * hamiltonian(om, de);
    auto rhs = [&](const Matrix2c& r) -> Matrix2c {
      return mih * r - r * mih + gamma * (z * r * z - r);
    };
    const double h = step.duration / substeps_per_pulse;
    for (int k = 0; k < substeps_per_pulse; ++k) {
      const Matrix2c k1 = rhs(rho);
      const Matrix2c k2 = rhs(rho + 0.5 * h * k1);
      const Matrix2c k3 = rhs(rho + 0.5 * h * k2);
      const Matrix2c k4 = rhs(rho + h * k3);
      rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }

  QubitState out(rho);
  if (!rho.allFinite()) {
    throw NumericalError("evolve_lindblad: non-finite density matrix");
  }
  if (out.trace_error() > 1e-8) {
    throw NumericalError("evolve_lindblad: trace drift " + std::to_string(out.trace_error()));
  }
  return out;
}

QubitState evolve(const QubitState& state, const PulseSequence& seq,
                  const ErrorModel& err, int substeps_per_pulse) {
  if (err.t2) return evolve_lindblad(state, seq, err, substeps_per_pulse);
  return evolve_unitary(state, seq, err);
}

double expectation_z(const QubitState& state) {
  return (state.rho() * pauli_z()).trace().real();
}

double flip_probability(const QubitState& state) {
  return state.rho()(1, 1).real();
}

double rabi_flip_probability(double omega, double delta, double t) {
  const double w2 = omega * omega + delta * delta;
  if (w2 == 0.0) return 0.0;
  const double s = std::sin(0.5 * std::sqrt(w2) * t);
  return omega * omega / w2 * s * s;
}

}  // namespace qflip
