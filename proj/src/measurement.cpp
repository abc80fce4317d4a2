#include "qflip/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

#include "qflip/errors.hpp"

namespace qflip::measurement {

void DetectorModel::validate() const {
  if (!(lambda_dark >= 0.0) || !(lambda_bright > lambda_dark)) {
    throw ConfigError("DetectorModel: need 0 <= lambda_dark < lambda_bright");
  }
  if (std::isinf(lambda_dark)) throw ConfigError("DetectorModel: lambda_dark must be finite");
  if (threshold < 0) throw ConfigError("DetectorModel: threshold must be >= 0");
  if (!(prep_error >= 0.0 && prep_error < 1.0)) {
    throw ConfigError("DetectorModel: prep_error must lie in [0, 1)");
  }
}

DetectorModel DetectorModel::ideal() {
  return {0.0, std::numeric_limits<double>::infinity(), 0, 0.0};
}

double poisson_cdf(int k, double lambda) {
  if (k < 0) return 0.0;
  if (lambda == 0.0) return 1.0;
  if (std::isinf(lambda)) return 0.0;
  // P(X <= k) = Q(k + 1, lambda), the regularized upper incomplete gamma.
  return boost::math::gamma_q(static_cast<double>(k) + 1.0, lambda);
}

SpamErrors spam_errors(const DetectorModel& det) {
  det.validate();
  SpamErrors e;
  e.eps_dark = poisson_cdf(det.threshold, det.lambda_bright);
  // P(X > k) = P(k + 1, lambda); the direct form keeps tiny tails accurate.
  e.eps_bright = det.lambda_dark > 0.0
                     ? boost::math::gamma_p(static_cast<double>(det.threshold) + 1.0, det.lambda_dark)
                     : 0.0;
  e.eps = 0.5 * (e.eps_bright + e.eps_dark);
  return e;
}

double prepared_probability(double p_bright, const DetectorModel& det) {
  return (1.0 - det.prep_error) * p_bright + det.prep_error * (1.0 - p_bright);
}

double measured_probability(double p_bright, const DetectorModel& det) {
  const SpamErrors e = spam_errors(det);
  const double p = prepared_probability(p_bright, det);
  return p * (1.0 - e.eps_dark) + (1.0 - p) * e.eps_bright;
}

namespace {

bool count_exceeds(double lambda, int threshold, Rng& rng) {
  if (lambda == 0.0) return 0 > threshold;
  if (std::isinf(lambda)) return true;
  std::poisson_distribution<long> poisson(lambda);
  return poisson(rng) > threshold;
}

// Accepts round-off just outside [0, 1] from the simulators.
double checked_probability(double p) {
  if (!(p >= -1e-9 && p <= 1.0 + 1e-9)) {
    throw ConfigError("measurement: probability must lie in [0, 1]");
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

bool simulate_shot(double p_bright, const DetectorModel& det, Rng& rng) {
  std::bernoulli_distribution state(prepared_probability(checked_probability(p_bright), det));
  const bool bright = state(rng);
  return count_exceeds(bright ? det.lambda_bright : det.lambda_dark, det.threshold, rng);
}

PopulationEstimate estimate_population(double p_bright, const DetectorModel& det, long n_shots,
                                       Rng& rng) {
  det.validate();
  p_bright = checked_probability(p_bright);
  if (n_shots < 1) throw ConfigError("estimate_population: n_shots must be >= 1");
  long bright = 0;
  for (long k = 0; k < n_shots; ++k) bright += simulate_shot(p_bright, det, rng) ? 1 : 0;
  PopulationEstimate est;
  est.n_shots = n_shots;
  est.p_hat = static_cast<double>(bright) / static_cast<double>(n_shots);
  est.std = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(n_shots));
  return est;
}

PopulationEstimate exact_population(double p_bright) {
  return {checked_probability(p_bright), 0.0, 0};
}

}  // namespace qflip::measurement
