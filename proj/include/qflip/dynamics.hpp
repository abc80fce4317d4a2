#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace qflip {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

// Basis ordering is (|0>, |1>) with sigma_z = diag(-1, +1), so <sigma_z> = +1
// means the qubit sits in |1>.
Matrix2c pauli_x();
Matrix2c pauli_y();
Matrix2c pauli_z();

// Density matrix of a single two-level system.
class QubitState {
 public:
  QubitState();  // |0><0|
  explicit QubitState(const Matrix2c& rho);

  static QubitState ground();
  static QubitState excited();
  static QubitState maximally_mixed();
  static QubitState from_ket(Complex c0, Complex c1);

  const Matrix2c& rho() const { return rho_; }

  // Largest violation of trace, Hermiticity and positivity constraints.
  double trace_error() const;
  double hermiticity_error() const;
  // Eigenvalues of the Hermitian part, ascending.
  Eigen::Vector2d eigenvalues() const;
  bool is_valid(double tol = 1e-10) const;

 private:
  Matrix2c rho_;
};

struct PulseStep {
  double delta = 0.0;     // rad/s
  double duration = 0.0;  // s
};

struct PulseSequence {
  double omega = 0.0;  // rad/s
  std::vector<PulseStep> steps;

  double total_duration() const;
  // Throws ConfigError unless omega > 0, steps non-empty and every duration > 0.
  void validate() const;
};

// Systematic errors are Omega -> Omega (1 + delta_omega) and
// Delta -> Delta + delta_delta * Omega. t2 switches on pure dephasing.
struct ErrorModel {
  double delta_omega = 0.0;
  double delta_delta = 0.0;
  std::optional<double> t2;

  void validate() const;
};

constexpr int kDefaultSubsteps = 64;

// exp(-i H dt) for H = (Omega sigma_x + Delta sigma_z) / 2 in closed form.
Matrix2c step_unitary(double omega, double delta, double dt);

QubitState evolve_unitary(const QubitState& state, const PulseSequence& seq,
                          const ErrorModel& err = {});

// Fixed-step RK4 integration of
//   d rho/dt = -i [H, rho] + gamma (sigma_z rho sigma_z - rho),  gamma = 1/(2 t2)
// with `substeps_per_pulse` steps inside every pulse interval.
QubitState evolve_lindblad(const QubitState& state, const PulseSequence& seq,
                           const ErrorModel& err,
                           int substeps_per_pulse = kDefaultSubsteps);

// Unitary path when err.t2 is empty, Lindblad path otherwise.
QubitState evolve(const QubitState& state, const PulseSequence& seq,
                  const ErrorModel& err, int substeps_per_pulse = kDefaultSubsteps);

double expectation_z(const QubitState& state);
double flip_probability(const QubitState& state);

// Closed-form |0> -> |1> probability for a constant drive of Rabi frequency
// omega and detuning delta applied for time t.
double rabi_flip_probability(double omega, double delta, double t);

}  // namespace qflip
