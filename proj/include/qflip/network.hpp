#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qflip::ppo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr int kObservationSize = 3;

// Shape parameters of the Beta policy over the normalized action [0, 1].
struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;

  double mean() const { return alpha / (alpha + beta); }
};

double beta_log_prob(const BetaParams& p, double x);
double beta_entropy(const BetaParams& p);

struct ActionSample {
  double action = 0.5;
  double log_prob = 0.0;
};

// Draws from Beta(alpha, beta) via two gamma variates. Deterministic mode
// returns the mean. Samples are kept a hair inside (0, 1) so the log density
// stays finite.
ActionSample sample_action(const BetaParams& p, Rng& rng, bool deterministic = false);

enum class Architecture { SharedTrunk, SplitNetworks };

struct NetworkShape {
  std::vector<int> hidden = {32, 32, 32};
  Architecture architecture = Architecture::SharedTrunk;
};

struct ForwardOutput {
  BetaParams beta;
  double value = 0.0;
};

// Per-sample forward results for a batch (columns = samples).
struct BatchForward {
  Eigen::ArrayXd alpha, beta, value;
  Eigen::ArrayXd policy_logit_a, policy_logit_b;
};

// Gradient of a scalar loss with respect to the three per-sample network
// outputs (alpha, beta, value).
struct OutputGradient {
  Eigen::ArrayXd d_alpha, d_beta, d_value;
};

// Fully connected ReLU network with a Beta policy head
// (alpha, beta = 1 + softplus(logits)) and a scalar value head. All weights
// live in one flat parameter vector so optimizers and checkpoints treat the
// network as a single tensor.
class PolicyNetwork {
 public:
  PolicyNetwork() : PolicyNetwork(NetworkShape{}) {}
  explicit PolicyNetwork(NetworkShape shape);

  // Uniform fan-in initialization; the policy output layer is scaled by 0.01
  // so the initial policy is close to Beta(1 + ln 2, 1 + ln 2).
  void initialize(Rng& rng);

  const NetworkShape& shape() const { return shape_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }
  void set_parameters(const Vector& p);

  // Throws NumericalError on non-finite input or activations.
  ForwardOutput forward(const Eigen::Vector3d& obs) const;
  BatchForward forward_batch(const Matrix& obs) const;

  // Gradient of sum_i [d_alpha_i alpha_i + d_beta_i beta_i + d_value_i v_i]
  // with respect to the parameters.
  Vector backward(const Matrix& obs, const OutputGradient& grad) const;

  // Layout description (name, rows, cols, offset) for serialization.
  struct Tensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    Eigen::Index offset = 0;
  };
  const std::vector<Tensor>& tensors() const { return tensors_; }

  bool operator==(const PolicyNetwork& other) const;

 private:
  struct Layer {
    int in = 0;
    int out = 0;
    Eigen::Index w_offset = 0;
    Eigen::Index b_offset = 0;
  };
  struct Chain {
    std::vector<Layer> hidden;
  };
  struct Cache;

  Layer add_layer(const std::string& name, int in, int out);
  void run(const Matrix& obs, Cache& cache) const;

  NetworkShape shape_;
  Chain policy_trunk_;
  Chain value_trunk_;  // unused with a shared trunk
  Layer policy_head_;
  Layer value_head_;
  std::vector<Tensor> tensors_;
  Vector params_;
};

}  // namespace qflip::ppo
