#include "qflip/network.hpp"

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qflip/errors.hpp"

using namespace qflip;
using namespace qflip::ppo;

namespace {

Matrix random_observations(int n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix obs(kObservationSize, n);
  for (int j = 0; j < n; ++j) {
    obs(0, j) = u(rng);
    obs(1, j) = 0.5 + 0.5 * u(rng);
    obs(2, j) = 0.5 + 0.5 * u(rng);
  }
  return obs;
}

// Random weights large enough that the policy head is not near-constant.
PolicyNetwork random_network(NetworkShape shape, std::uint64_t seed) {
  PolicyNetwork net(std::move(shape));
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  Vector p(net.parameter_count());
  for (auto& x : p) x = n(rng);
  net.set_parameters(p);
  return net;
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Central-difference Jacobian of each output against each parameter.
void check_jacobian(const PolicyNetwork& net, const Matrix& obs) {
  const double h = 1e-5;
  const Eigen::Index n = obs.cols();
  for (int output = 0; output < 3; ++output) {
    OutputGradient g{Eigen::ArrayXd::Zero(n), Eigen::ArrayXd::Zero(n), Eigen::ArrayXd::Zero(n)};
    (output == 0 ? g.d_alpha : output == 1 ? g.d_beta : g.d_value).setOnes();
    const Vector analytic = net.backward(obs, g);
    auto total = [&](const PolicyNetwork& m) {
      const auto f = m.forward_batch(obs);
      return (output == 0 ? f.alpha : output == 1 ? f.beta : f.value).sum();
    };
    PolicyNetwork probe = net;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < net.parameter_count(); ++k) {
      const double p0 = net.parameters()[k];
      probe.parameters()[k] = p0 + h;
      const double up = total(probe);
      probe.parameters()[k] = p0 - h;
      const double down = total(probe);
      probe.parameters()[k] = p0;
      const double fd = (up - down) / (2.0 * h);
      if (std::abs(fd) < 1e-7 && std::abs(analytic[k]) < 1e-7) continue;
      worst = std::max(worst, rel_error(analytic[k], fd));
    }
    EXPECT_LT(worst, 1e-4) << "output " << output;
  }
}

}  // namespace

TEST(Network, ZeroParametersGiveSoftplusZero) {
  PolicyNetwork net;
  net.set_parameters(Vector::Zero(net.parameter_count()));
  const auto out = net.forward({0.3, -0.2, 0.9});
  EXPECT_DOUBLE_EQ(out.value, 0.0);
  EXPECT_NEAR(out.beta.alpha, 1.0 + std::log(2.0), 1e-15);
  EXPECT_NEAR(out.beta.beta, 1.0 + std::log(2.0), 1e-15);
}

TEST(Network, DefaultShapeParameterCount) {
  PolicyNetwork net;
  // 3x32, 32x32, 32x32 trunk; 2- and 1-unit heads.
  EXPECT_EQ(net.parameter_count(), (3 * 32 + 32) + 2 * (32 * 32 + 32) + (32 * 2 + 2) + (32 + 1));
  PolicyNetwork split(NetworkShape{{32, 32, 32}, Architecture::SplitNetworks});
  EXPECT_EQ(split.parameter_count(), net.parameter_count() + (3 * 32 + 32) + 2 * (32 * 32 + 32));
}

TEST(Network, ForwardIsPure) {
  const auto net = random_network({}, 5);
  const Eigen::Vector3d x{-0.4, 0.7, 0.35};
  const auto a = net.forward(x);
  const auto b = net.forward(x);
  EXPECT_EQ(a.beta.alpha, b.beta.alpha);
  EXPECT_EQ(a.beta.beta, b.beta.beta);
  EXPECT_EQ(a.value, b.value);
}

TEST(Network, BatchMatchesSingle) {
  Rng rng(3);
  const auto net = random_network({}, 6);
  const Matrix obs = random_observations(7, rng);
  const auto batch = net.forward_batch(obs);
  for (int j = 0; j < 7; ++j) {
    const auto one = net.forward(obs.col(j));
    EXPECT_NEAR(batch.alpha[j], one.beta.alpha, 1e-13);
    EXPECT_NEAR(batch.beta[j], one.beta.beta, 1e-13);
    EXPECT_NEAR(batch.value[j], one.value, 1e-13);
  }
}

TEST(Network, ShapeParametersAtLeastOne) {
  Rng rng(11);
  const auto net = random_network({}, 12);
  const auto out = net.forward_batch(random_observations(500, rng) * 20.0);
  EXPECT_GE(out.alpha.minCoeff(), 1.0);
  EXPECT_GE(out.beta.minCoeff(), 1.0);
}

TEST(Network, InitialPolicyNearUniformShape) {
  Rng rng(1);
  PolicyNetwork net;
  net.initialize(rng);
  Rng obs_rng(2);
  const auto out = net.forward_batch(random_observations(50, obs_rng));
  EXPECT_LT((out.alpha - (1.0 + std::log(2.0))).abs().maxCoeff(), 0.05);
  EXPECT_LT((out.beta - (1.0 + std::log(2.0))).abs().maxCoeff(), 0.05);
  EXPECT_TRUE(net.parameters().allFinite());
}

TEST(Network, InitializationIsSeedDeterministic) {
  Rng a(9), b(9), c(10);
  PolicyNetwork n1, n2, n3;
  n1.initialize(a);
  n2.initialize(b);
  n3.initialize(c);
  EXPECT_TRUE(n1 == n2);
  EXPECT_FALSE(n1 == n3);
}

TEST(Network, JacobianMatchesFiniteDifferences) {
  Rng rng(21);
  check_jacobian(random_network({}, 22), random_observations(6, rng));
}

TEST(Network, SplitJacobianMatchesFiniteDifferences) {
  Rng rng(23);
  check_jacobian(random_network({{8, 8}, Architecture::SplitNetworks}, 24),
                 random_observations(6, rng));
}

TEST(Network, RejectsNonFiniteInput) {
  PolicyNetwork net;
  EXPECT_THROW(net.forward({std::nan(""), 0.0, 0.0}), NumericalError);
  Vector bad = Vector::Zero(net.parameter_count());
  bad[0] = INFINITY;
  net.set_parameters(bad);
  EXPECT_THROW(net.forward({1.0, 0.0, 0.0}), NumericalError);
}

TEST(Network, RejectsBadShapes) {
  EXPECT_THROW(PolicyNetwork(NetworkShape{{}, Architecture::SharedTrunk}), ConfigError);
  EXPECT_THROW(PolicyNetwork(NetworkShape{{4, 0}, Architecture::SharedTrunk}), ConfigError);
  PolicyNetwork net;
  EXPECT_THROW(net.set_parameters(Vector::Zero(3)), ConfigError);
}

TEST(Network, TensorLayoutCoversParameters) {
  PolicyNetwork net;
  Eigen::Index covered = 0;
  for (const auto& t : net.tensors()) {
    EXPECT_EQ(t.offset, covered) << t.name;
    covered += static_cast<Eigen::Index>(t.rows) * t.cols;
  }
  EXPECT_EQ(covered, net.parameter_count());
}

TEST(BetaSampling, UniformCaseMean) {
  Rng rng(42);
  double sum = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) sum += sample_action({1.0, 1.0}, rng).action;
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(BetaSampling, ConcentratedCaseSpread) {
  Rng rng(43);
  const int n = 20000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = sample_action({50.0, 50.0}, rng).action;
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double sd = std::sqrt(s2 / n - mean * mean);
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_LT(sd, 0.06);
  // Beta variance alpha beta / ((alpha + beta)^2 (alpha + beta + 1)).
  EXPECT_NEAR(sd, std::sqrt(2500.0 / (10000.0 * 101.0)), 0.003);
}

TEST(BetaSampling, AsymmetricMeanMatchesFormula) {
  Rng rng(44);
  const BetaParams p{2.5, 6.0};
  double s = 0.0;
  const int n = 50000;
  for (int k = 0; k < n; ++k) s += sample_action(p, rng).action;
  EXPECT_NEAR(s / n, 2.5 / 8.5, 0.005);
}

TEST(BetaSampling, DeterministicReturnsMean) {
  Rng rng(1);
  const BetaParams p{3.0, 1.5};
  const auto s = sample_action(p, rng, true);
  EXPECT_DOUBLE_EQ(s.action, 3.0 / 4.5);
  EXPECT_DOUBLE_EQ(s.log_prob, beta_log_prob(p, s.action));
}

TEST(BetaSampling, LogProbConsistentWithSample) {
  Rng rng(7);
  const BetaParams p{1.7, 4.2};
  for (int k = 0; k < 100; ++k) {
    const auto s = sample_action(p, rng);
    ASSERT_GT(s.action, 0.0);
    ASSERT_LT(s.action, 1.0);
    EXPECT_DOUBLE_EQ(s.log_prob, beta_log_prob(p, s.action));
  }
}

TEST(BetaSampling, DensityIntegratesToOne) {
  for (const BetaParams p : {BetaParams{1.0, 1.0}, BetaParams{2.0, 3.0}, BetaParams{1.3, 7.5}}) {
    const int n = 200000;
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += std::exp(beta_log_prob(p, (k + 0.5) / n));
    EXPECT_NEAR(total / n, 1.0, 1e-6) << p.alpha << "," << p.beta;
  }
}

TEST(BetaSampling, EntropyMatchesNumericIntegral) {
  for (const BetaParams p : {BetaParams{1.0, 1.0}, BetaParams{2.0, 3.0}, BetaParams{5.0, 1.5}}) {
    const int n = 200000;
    double h = 0.0;
    for (int k = 0; k < n; ++k) {
      const double lp = beta_log_prob(p, (k + 0.5) / n);
      h -= std::exp(lp) * lp;
    }
    EXPECT_NEAR(beta_entropy(p), h / n, 1e-5);
  }
  EXPECT_NEAR(beta_entropy({1.0, 1.0}), 0.0, 1e-15);
}
