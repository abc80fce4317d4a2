#pragma once

#include <cstdint>
#include <random>

namespace qflip::measurement {

using Rng = std::mt19937_64;

// Photon-count threshold readout: a shot reads "bright" when the Poisson
// count exceeds `threshold`. |1> is the bright state.
struct DetectorModel {
  double lambda_dark = 0.1;
  double lambda_bright = 10.0;  // may be +inf for a perfect bright state
  int threshold = 2;
  double prep_error = 0.005;    // probability the |0> preparation lands in |1>

  void validate() const;
  // No dark counts, no missed bright counts, perfect preparation.
  static DetectorModel ideal();
};

struct SpamErrors {
  double eps_bright = 0.0;  // dark state read as bright
  double eps_dark = 0.0;    // bright state read as dark
  double eps = 0.0;         // (eps_bright + eps_dark) / 2
};

// P(Poisson(lambda) <= k).
double poisson_cdf(int k, double lambda);

SpamErrors spam_errors(const DetectorModel& det);

// Bright probability after a failed preparation swaps the populations.
double prepared_probability(double p_bright, const DetectorModel& det);

// Probability that one shot reads bright, given the ideal |1> population.
double measured_probability(double p_bright, const DetectorModel& det);

// One shot: Bernoulli draw of the (preparation-mixed) state, then a Poisson
// count at that state's mean, thresholded.
bool simulate_shot(double p_bright, const DetectorModel& det, Rng& rng);

struct PopulationEstimate {
  double p_hat = 0.0;
  double std = 0.0;  // sqrt(p_hat (1 - p_hat) / n_shots)
  long n_shots = 0;
};

// Raw bright fraction over n_shots; no SPAM inversion.
PopulationEstimate estimate_population(double p_bright, const DetectorModel& det, long n_shots,
                                       Rng& rng);

// Exact probability reported as an estimate with zero spread (n_shots = 0);
// used for noiseless evaluation.
PopulationEstimate exact_population(double p_bright);

}  // namespace qflip::measurement
