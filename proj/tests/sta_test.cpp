#include "qflip/sta.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "qflip/errors.hpp"

using namespace qflip;
using namespace qflip::sta;

namespace {

constexpr double kPi = std::numbers::pi;
const double kOmega = 2.0 * kPi * 3300.0;

// Direct transcription of the ansatz bracket and its s-derivatives, used as
// an independent reference for the endpoint-stable implementation.
struct NaiveTheta {
  double a, omega, T;
  double theta(double s) const {
    const double u = 1.0 - s;
    return omega * T / a *
           (a * s - kPi * kPi / 2.0 * u * u + kPi * kPi / 3.0 * u * u * u + std::cos(kPi * s) +
            StaAnsatz::kA);
  }
  double dtheta(double s) const {
    const double u = 1.0 - s;
    return omega / a * (a + kPi * kPi * u - kPi * kPi * u * u - kPi * std::sin(kPi * s));
  }
  // c / sin(theta), undefined at the endpoints.
  double ratio(double s) const {
    const double x = dtheta(s) / omega;
    return std::sqrt(1.0 - x * x) / std::sin(theta(s));
  }
};

NaiveTheta naive(const StaAnsatz& ans) { return {ans.a(), ans.omega(), ans.duration()}; }

}  // namespace

TEST(sta_duration, closed_form_values) {
  EXPECT_NEAR(duration(0.604, kOmega) * 1e6, 367.7, 0.1);
  EXPECT_NEAR(duration(0.728, kOmega) * 1e6, 295.8, 0.1);
  EXPECT_NEAR(duration(0.604, 2.0 * kOmega), duration(0.604, kOmega) / 2.0, 1e-15);
}

TEST(sta_duration, pole_and_rejection) {
  EXPECT_GT(duration(kMinA + 1e-9, kOmega), 1.0);
  EXPECT_THROW(duration(kMinA, kOmega), ConfigError);
  EXPECT_THROW(duration(0.2, kOmega), ConfigError);
  EXPECT_THROW(duration(0.6, 0.0), ConfigError);
}

TEST(sta_theta, boundary_values) {
  for (double a : {0.5, 0.604, 0.728, 1.0, 1.4}) {
    const StaAnsatz ans(a, kOmega);
    EXPECT_NEAR(ans.theta(0.0).theta, 0.0, 1e-12);
    EXPECT_NEAR(ans.theta(1.0).theta, kPi, 1e-12);
    EXPECT_NEAR(ans.theta(0.0).dtheta / kOmega, 1.0, 1e-12);
    EXPECT_NEAR(ans.theta(1.0).dtheta / kOmega, 1.0, 1e-12);
    EXPECT_NEAR(ans.theta(0.0).ddtheta, 0.0, 1e-9);
    EXPECT_NEAR(ans.theta(1.0).ddtheta, 0.0, 1e-9);
  }
}

TEST(sta_theta, agrees_with_direct_formula) {
  const StaAnsatz ans(0.604, kOmega);
  const auto ref = naive(ans);
  for (int k = 0; k <= 100; ++k) {
    const double s = k / 100.0;
    EXPECT_NEAR(ans.theta(s).theta, ref.theta(s), 1e-12);
    EXPECT_NEAR(ans.theta(s).dtheta / kOmega, ref.dtheta(s) / kOmega, 1e-12);
  }
}

TEST(sta_theta, finite_difference_derivatives_at_endpoints) {
  // Boundary conditions on theta' and theta'' checked without the analytic
  // derivative code, via one-sided differences of theta itself.
  for (double a : {0.45, 0.604, 0.728, 1.2}) {
    const StaAnsatz ans(a, kOmega);
    const double T = ans.duration();
    auto th = [&](double s) { return ans.theta(s).theta; };
    double h = 1e-5;
    const double d0 = (-3.0 * th(0) + 4.0 * th(h) - th(2 * h)) / (2.0 * h * T);
    const double d1 = (3.0 * th(1) - 4.0 * th(1 - h) + th(1 - 2 * h)) / (2.0 * h * T);
    h = 1e-4;
    EXPECT_NEAR(d0 / kOmega, 1.0, 1e-7);
    EXPECT_NEAR(d1 / kOmega, 1.0, 1e-7);
    // Second derivative scaled by T^2 / Omega T to be dimensionless.
    const double dd0 = (2 * th(0) - 5 * th(h) + 4 * th(2 * h) - th(3 * h)) / (h * h);
    const double dd1 = (2 * th(1) - 5 * th(1 - h) + 4 * th(1 - 2 * h) - th(1 - 3 * h)) / (h * h);
    EXPECT_NEAR(dd0 / (kOmega * T), 0.0, 1e-5);
    EXPECT_NEAR(dd1 / (kOmega * T), 0.0, 1e-5);
    // Analytic derivatives reproduce the same values to 1e-9.
    EXPECT_NEAR(ans.theta(0.0).ddtheta * T / kOmega, 0.0, 1e-9);
    EXPECT_NEAR(ans.theta(1.0).ddtheta * T / kOmega, 0.0, 1e-9);
  }
}

TEST(sta_theta, interior_derivative_matches_finite_difference) {
  const StaAnsatz ans(0.728, kOmega);
  const double T = ans.duration();
  for (double s : {0.1, 0.33, 0.5, 0.77, 0.9}) {
    const double h = 1e-6;
    const double fd = (ans.theta(s + h).theta - ans.theta(s - h).theta) / (2 * h * T);
    EXPECT_NEAR(fd / kOmega, ans.theta(s).dtheta / kOmega, 1e-7);
    const double fd2 = (ans.theta(s + h).dtheta - ans.theta(s - h).dtheta) / (2 * h * T);
    EXPECT_NEAR(fd2 * T / kOmega, ans.theta(s).ddtheta * T / kOmega, 1e-6);
  }
}

TEST(sta_theta, monotone_profile_for_rabi_optimum) {
  const StaAnsatz ans(0.728, kOmega);
  double prev = ans.theta(0.0).theta;
  for (int k = 1; k <= 10000; ++k) {
    const double cur = ans.theta(k / 10000.0).theta;
    ASSERT_GT(cur, prev) << "s = " << k / 10000.0;
    prev = cur;
  }
}

TEST(sta_theta, detuning_optimum_dips_but_stays_admissible) {
  // For a = 0.604 theta' becomes slightly negative mid-pulse, so theta is not
  // monotone; the profile is still admissible (|theta'| <= Omega, 0 < theta < pi).
  const StaAnsatz ans(0.604, kOmega);
  double min_rate = 1.0;
  for (int k = 0; k <= 10000; ++k) {
    min_rate = std::min(min_rate, ans.theta(k / 10000.0).dtheta / kOmega);
  }
  EXPECT_LT(min_rate, 0.0);
  EXPECT_GT(min_rate, -0.2);
  EXPECT_TRUE(ans.is_admissible());
}

TEST(sta_theta, admissibility_boundary) {
  EXPECT_FALSE(StaAnsatz(0.38, kOmega).is_admissible());
  EXPECT_FALSE(StaAnsatz(0.42, kOmega).is_admissible());
  EXPECT_TRUE(StaAnsatz(0.45, kOmega).is_admissible());
  EXPECT_TRUE(StaAnsatz(1.49, kOmega).is_admissible());
}

TEST(sta_delta, peak_detuning_values) {
  EXPECT_NEAR(peak_detuning(StaAnsatz(0.604, kOmega)) / kOmega, 1.5, 0.05);
  EXPECT_NEAR(peak_detuning(StaAnsatz(0.728, kOmega)) / kOmega, 1.7, 0.05);
}

TEST(sta_delta, endpoint_limits_match_one_sided_values) {
  for (double a : {0.604, 0.728}) {
    const StaAnsatz ans(a, kOmega);
    const double T = ans.duration();
    const double left = delta_of_t(ans, 0.0);
    const double right = delta_of_t(ans, T);
    // Richardson extrapolation of interior samples toward each endpoint.
    const double h = 1e-4 * T;
    const double l_ext = 2.0 * delta_of_t(ans, h) - delta_of_t(ans, 2 * h);
    const double r_ext = 2.0 * delta_of_t(ans, T - h) - delta_of_t(ans, T - 2 * h);
    EXPECT_NEAR(left / kOmega, l_ext / kOmega, 1e-6);
    EXPECT_NEAR(right / kOmega, r_ext / kOmega, 1e-6);
    EXPECT_NEAR(left, -right, 1e-9 * kOmega);
  }
}

TEST(sta_delta, rejects_times_outside_pulse) {
  const StaAnsatz ans(0.604, kOmega);
  EXPECT_THROW(delta_of_t(ans, -1e-9), ConfigError);
  EXPECT_THROW(delta_of_t(ans, 2.0 * ans.duration()), ConfigError);
}

TEST(sta_lr_phase, zero_and_symmetry) {
  const StaAnsatz ans(0.604, kOmega);
  EXPECT_EQ(lr_phase(ans, 0.0), 0.0);
  const double g = lr_phase(ans, 0.4 * ans.duration());
  EXPECT_LT(g, 0.0);  // gamma_+ is monotone decreasing; gamma_- = -gamma_+
}

TEST(sta_lr_phase, matches_dense_trapezoid_oracle) {
  const StaAnsatz ans(0.604, kOmega);
  const auto ref = naive(ans);
  const int n = 1000000;
  const double T = ans.duration();
  const double h = 1.0 / n;
  auto f = [&](double s) { return -0.5 * kOmega * ref.ratio(s); };
  // Endpoint values by linear extrapolation of interior samples.
  const double f0 = 2.0 * f(h) - f(2.0 * h);
  const double f1 = 2.0 * f(1.0 - h) - f(1.0 - 2.0 * h);
  double sum = 0.5 * (f0 + f1);
  for (int k = 1; k < n; ++k) sum += f(k * h);
  const double oracle = sum * h * T;
  EXPECT_NEAR(lr_phase(ans, T), oracle, 1e-7);
}

TEST(sta_error_functional, vanishes_at_solved_roots) {
  const double a_det = solve_a(ErrorChannel::Detuning, kOmega);
  const double a_rabi = solve_a(ErrorChannel::Rabi, kOmega);
  EXPECT_LT(error_functional(a_det, ErrorChannel::Detuning, kOmega), 1e-4);
  EXPECT_LT(error_functional(a_rabi, ErrorChannel::Rabi, kOmega), 1e-4);
  // The rounded published values sit close to the root.
  EXPECT_LT(error_functional(0.604, ErrorChannel::Detuning, kOmega), 2e-3);
  EXPECT_LT(error_functional(0.728, ErrorChannel::Rabi, kOmega), 2e-3);
  EXPECT_NEAR(a_det, 0.604, 0.01);
  EXPECT_NEAR(a_rabi, 0.728, 0.01);
}

TEST(sta_error_functional, positive_away_from_root) {
  EXPECT_GT(error_functional(0.5, ErrorChannel::Detuning, kOmega), 0.05);
  EXPECT_GT(error_functional(0.5, ErrorChannel::Rabi, kOmega), 0.05);
  EXPECT_THROW(error_functional(0.38, ErrorChannel::Detuning, kOmega), ConfigError);
}

TEST(sta_solve_a, insensitive_to_omega) {
  for (auto channel : {ErrorChannel::Detuning, ErrorChannel::Rabi}) {
    EXPECT_NEAR(solve_a(channel, kOmega), solve_a(channel, 2.0 * kOmega), 2e-4);
  }
}

TEST(sta_discretize, step_layout) {
  const StaAnsatz ans(0.604, kOmega);
  const auto seq = discretize(ans, 20);
  ASSERT_EQ(seq.steps.size(), 20u);
  EXPECT_NEAR(seq.total_duration(), ans.duration(), 1e-18);
  EXPECT_EQ(seq.omega, kOmega);
  EXPECT_DOUBLE_EQ(seq.steps[3].delta, delta_of_t(ans, 3.5 * ans.duration() / 20));

  const auto single = discretize(ans, 1);
  ASSERT_EQ(single.steps.size(), 1u);
  EXPECT_DOUBLE_EQ(single.steps[0].delta, delta_of_t(ans, ans.duration() / 2));
  EXPECT_THROW(discretize(ans, 0), ConfigError);
}

TEST(sta_discretize, converges_to_analog_flip) {
  for (double a : {0.604, 0.728}) {
    const StaAnsatz ans(a, kOmega);
    const double p = flip_probability(evolve_unitary(QubitState(), discretize(ans, 4096)));
    EXPECT_LT(1.0 - p, 1e-5) << "a = " << a;
    const double p20 = flip_probability(evolve_unitary(QubitState(), discretize(ans, 20)));
    EXPECT_LT(1.0 - p20, 1e-2) << "a = " << a;
  }
}

TEST(sta_robustness, first_order_cancellation_transfers_to_dynamics) {
  const double a = solve_a(ErrorChannel::Detuning, kOmega);
  const auto seq = discretize(StaAnsatz(a, kOmega), 4096);
  const PulseSequence pi{kOmega, {{0.0, kPi / kOmega}}};
  for (double dd : {-0.1, 0.1}) {
    ErrorModel err{0.0, dd, std::nullopt};
    const double sta_inf = 1.0 - flip_probability(evolve_unitary(QubitState(), seq, err));
    const double pi_inf = 1.0 - flip_probability(evolve_unitary(QubitState(), pi, err));
    EXPECT_LT(sta_inf, pi_inf / 10.0) << "dd = " << dd;
  }
}

TEST(sta_robustness, twenty_step_pulse_flat_near_zero_error) {
  const double a = solve_a(ErrorChannel::Detuning, kOmega);
  const auto seq = discretize(StaAnsatz(a, kOmega), 20);
  const PulseSequence pi{kOmega, {{0.0, kPi / kOmega}}};
  auto infidelity = [](const PulseSequence& s, double dd) {
    return 1.0 - flip_probability(evolve_unitary(QubitState(), s, ErrorModel{0.0, dd, std::nullopt}));
  };
  const double sta0 = infidelity(seq, 0.0);
  const double pi0 = infidelity(pi, 0.0);
  for (double dd : {-0.1, 0.1}) {
    EXPECT_LE(infidelity(seq, dd), 10.0 * sta0);
    EXPECT_GE(infidelity(pi, dd), 100.0 * pi0);
  }
}
