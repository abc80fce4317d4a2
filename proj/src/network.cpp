#include "qflip/network.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

#include "qflip/errors.hpp"

namespace qflip::ppo {

namespace {

constexpr double kActionEdge = 1e-9;

Eigen::ArrayXd softplus(const Eigen::ArrayXd& x) {
  return x.max(0.0) + (-x.abs()).exp().log1p();
}

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

double log_beta_function(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace

double beta_log_prob(const BetaParams& p, double x) {
  return (p.alpha - 1.0) * std::log(x) + (p.beta - 1.0) * std::log1p(-x) -
         log_beta_function(p.alpha, p.beta);
}

double beta_entropy(const BetaParams& p) {
  using boost::math::digamma;
  const double a = p.alpha;
  const double b = p.beta;
  return log_beta_function(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) +
         (a + b - 2.0) * digamma(a + b);
}

ActionSample sample_action(const BetaParams& p, Rng& rng, bool deterministic) {
  double x = p.mean();
  if (!deterministic) {
    std::gamma_distribution<double> ga(p.alpha, 1.0);
    std::gamma_distribution<double> gb(p.beta, 1.0);
    const double u = ga(rng);
    const double v = gb(rng);
    x = u / (u + v);
  }
  x = std::clamp(x, kActionEdge, 1.0 - kActionEdge);
  return {x, beta_log_prob(p, x)};
}

struct PolicyNetwork::Cache {
  // Pre-activations and activations per hidden layer, per chain.
  std::vector<Matrix> policy_pre, policy_act;
  std::vector<Matrix> value_pre, value_act;
  Matrix policy_logits;  // 2 x batch
  Matrix values;         // 1 x batch
};

PolicyNetwork::PolicyNetwork(NetworkShape shape) : shape_(std::move(shape)) {
  if (shape_.hidden.empty()) {
    throw ConfigError("PolicyNetwork: at least one hidden layer required");
  }
  for (int h : shape_.hidden) {
    if (h < 1) throw ConfigError("PolicyNetwork: hidden sizes must be positive");
  }
  int in = kObservationSize;
  for (std::size_t i = 0; i < shape_.hidden.size(); ++i) {
    policy_trunk_.hidden.push_back(add_layer("trunk" + std::to_string(i), in, shape_.hidden[i]));
    in = shape_.hidden[i];
  }
  if (shape_.architecture == Architecture::SplitNetworks) {
    int vin = kObservationSize;
    for (std::size_t i = 0; i < shape_.hidden.size(); ++i) {
      value_trunk_.hidden.push_back(
          add_layer("value_trunk" + std::to_string(i), vin, shape_.hidden[i]));
      vin = shape_.hidden[i];
    }
  }
  policy_head_ = add_layer("policy_head", in, 2);
  value_head_ = add_layer("value_head", in, 1);
  // Parameters start at zero until initialize() is called.
}

PolicyNetwork::Layer PolicyNetwork::add_layer(const std::string& name, int in, int out) {
  Layer layer;
  layer.in = in;
  layer.out = out;
  layer.w_offset = params_.size();
  tensors_.push_back({name + ".weight", out, in, layer.w_offset});
  layer.b_offset = layer.w_offset + static_cast<Eigen::Index>(in) * out;
  tensors_.push_back({name + ".bias", out, 1, layer.b_offset});
  params_.conservativeResize(layer.b_offset + out);
  params_.tail(static_cast<Eigen::Index>(in) * out + out).setZero();
  return layer;
}

void PolicyNetwork::initialize(Rng& rng) {
  auto init_layer = [&](const Layer& l, double scale) {
    const double bound = scale / std::sqrt(static_cast<double>(l.in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(l.in) * l.out; ++k) {
      params_[l.w_offset + k] = dist(rng);
    }
    params_.segment(l.b_offset, l.out).setZero();
  };
  for (const auto& l : policy_trunk_.hidden) init_layer(l, 1.0);
  for (const auto& l : value_trunk_.hidden) init_layer(l, 1.0);
  init_layer(policy_head_, 0.01);
  init_layer(value_head_, 1.0);
}

void PolicyNetwork::set_parameters(const Vector& p) {
  if (p.size() != params_.size()) {
    throw ConfigError("PolicyNetwork::set_parameters: size mismatch");
  }
  params_ = p;
}

void PolicyNetwork::run(const Matrix& obs, Cache& cache) const {
  if (obs.rows() != kObservationSize) {
    throw ConfigError("PolicyNetwork: observation must have 3 components");
  }
  if (!obs.allFinite()) {
    throw NumericalError("PolicyNetwork: non-finite observation");
  }
  auto weights = [&](const Layer& l) {
    return Eigen::Map<const Matrix>(params_.data() + l.w_offset, l.out, l.in);
  };
  auto bias = [&](const Layer& l) {
    return Eigen::Map<const Vector>(params_.data() + l.b_offset, l.out);
  };
  auto chain = [&](const Chain& c, std::vector<Matrix>& pre, std::vector<Matrix>& act) {
    pre.clear();
    act.clear();
    const Matrix* x = &obs;
    for (const auto& l : c.hidden) {
      pre.push_back((weights(l) * *x).colwise() + bias(l));
      act.push_back(pre.back().cwiseMax(0.0));
      x = &act.back();
    }
  };
  chain(policy_trunk_, cache.policy_pre, cache.policy_act);
  const Matrix& policy_features = cache.policy_act.back();
  const Matrix* value_features = &policy_features;
  if (shape_.architecture == Architecture::SplitNetworks) {
    chain(value_trunk_, cache.value_pre, cache.value_act);
    value_features = &cache.value_act.back();
  }
  cache.policy_logits = (weights(policy_head_) * policy_features).colwise() + bias(policy_head_);
  cache.values = (weights(value_head_) * *value_features).colwise() + bias(value_head_);
  if (!cache.policy_logits.allFinite() || !cache.values.allFinite()) {
    throw NumericalError("PolicyNetwork: non-finite activations");
  }
}

ForwardOutput PolicyNetwork::forward(const Eigen::Vector3d& obs) const {
  const BatchForward out = forward_batch(Matrix(obs));
  return {{out.alpha(0), out.beta(0)}, out.value(0)};
}

BatchForward PolicyNetwork::forward_batch(const Matrix& obs) const {
  Cache cache;
  run(obs, cache);
  BatchForward out;
  out.policy_logit_a = cache.policy_logits.row(0).transpose().array();
  out.policy_logit_b = cache.policy_logits.row(1).transpose().array();
  out.alpha = 1.0 + softplus(out.policy_logit_a);
  out.beta = 1.0 + softplus(out.policy_logit_b);
  out.value = cache.values.row(0).transpose().array();
  return out;
}

Vector PolicyNetwork::backward(const Matrix& obs, const OutputGradient& grad) const {
  Cache cache;
  run(obs, cache);
  const Eigen::Index n = obs.cols();
  Vector g = Vector::Zero(params_.size());

  auto weights = [&](const Layer& l) {
    return Eigen::Map<const Matrix>(params_.data() + l.w_offset, l.out, l.in);
  };
  auto accumulate = [&](const Layer& l, const Matrix& d_pre, const Matrix& input) {
    Eigen::Map<Matrix>(g.data() + l.w_offset, l.out, l.in) += d_pre * input.transpose();
    Eigen::Map<Vector>(g.data() + l.b_offset, l.out) += d_pre.rowwise().sum();
  };

  Matrix d_logits(2, n);
  d_logits.row(0) = (grad.d_alpha * sigmoid(cache.policy_logits.row(0).transpose().array()))
                        .matrix()
                        .transpose();
  d_logits.row(1) = (grad.d_beta * sigmoid(cache.policy_logits.row(1).transpose().array()))
                        .matrix()
                        .transpose();
  const Matrix d_values = grad.d_value.matrix().transpose();

  const bool split = shape_.architecture == Architecture::SplitNetworks;
  const Matrix& policy_features = cache.policy_act.back();
  const Matrix& value_features = split ? cache.value_act.back() : policy_features;

  accumulate(policy_head_, d_logits, policy_features);
  accumulate(value_head_, d_values, value_features);

  auto backprop_chain = [&](const Chain& c, const std::vector<Matrix>& pre,
                            const std::vector<Matrix>& act, Matrix d_act) {
    for (std::size_t k = c.hidden.size(); k-- > 0;) {
      const Layer& l = c.hidden[k];
      const Matrix d_pre = d_act.cwiseProduct((pre[k].array() > 0.0).cast<double>().matrix());
      const Matrix& input = k == 0 ? obs : act[k - 1];
      accumulate(l, d_pre, input);
      if (k > 0) d_act = weights(l).transpose() * d_pre;
    }
  };

  Matrix d_policy_features = weights(policy_head_).transpose() * d_logits;
  const Matrix d_value_features = weights(value_head_).transpose() * d_values;
  if (split) {
    backprop_chain(value_trunk_, cache.value_pre, cache.value_act, d_value_features);
  } else {
    d_policy_features += d_value_features;
  }
  backprop_chain(policy_trunk_, cache.policy_pre, cache.policy_act, d_policy_features);
  return g;
}

bool PolicyNetwork::operator==(const PolicyNetwork& other) const {
  return shape_.hidden == other.shape_.hidden &&
         shape_.architecture == other.shape_.architecture && params_ == other.params_;
}

}  // namespace qflip::ppo
