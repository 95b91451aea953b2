#include "mlab/approximator.h"

#include <cmath>
#include <random>

namespace mlab {

namespace {

void ApplyActivation(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::kReLU) z = z.cwiseMax(0.0);
}

}  // namespace

void NetworkSpec::Validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("NetworkSpec: need at least 2 layer sizes");
  }
  for (int size : layer_sizes) {
    if (size < 1) {
      throw std::invalid_argument("NetworkSpec: layer sizes must be >= 1");
    }
  }
  if (activation != Activation::kReLU) {
    throw std::invalid_argument("NetworkSpec: only ReLU hidden activation");
  }
}

bool Gradients::AllFinite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : bias) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.weights.size() != weights.size()) {
    throw std::invalid_argument("Gradients: layer count mismatch");
  }
  for (size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    bias[i] += other.bias[i];
  }
  return *this;
}

Gradients& Gradients::operator*=(double scale) {
  for (size_t i = 0; i < weights.size(); ++i) {
    weights[i] *= scale;
    bias[i] *= scale;
  }
  return *this;
}

Network::Network(const NetworkSpec& spec) {
  spec.Validate();
  std::mt19937_64 rng(spec.seed);
  const size_t num_layers = spec.layer_sizes.size() - 1;
  layers_.reserve(num_layers);
  for (size_t i = 0; i < num_layers; ++i) {
    const int in = spec.layer_sizes[i];
    const int out = spec.layer_sizes[i + 1];
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(out, in);
    // Row-major fill so the draw order matches the checkpoint layout.
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation =
        (i + 1 == num_layers) ? Activation::kIdentity : spec.activation;
    layers_.push_back(std::move(layer));
  }
}

Network Network::FromLayers(std::vector<DenseLayer> layers) {
  if (layers.empty()) throw std::invalid_argument("Network: no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rows() < 1 || l.weights.cols() < 1 ||
        l.bias.size() != l.weights.rows()) {
      throw std::invalid_argument("Network: malformed layer " +
                                  std::to_string(i));
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw std::invalid_argument("Network: non-finite values in layer " +
                                  std::to_string(i));
    }
    if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
      throw std::invalid_argument("Network: layer " + std::to_string(i) +
                                  " input does not match previous output");
    }
  }
  Network net;
  net.layers_ = std::move(layers);
  return net;
}

std::vector<int> Network::layer_sizes() const {
  std::vector<int> sizes{input_dim()};
  for (const auto& l : layers_) sizes.push_back(l.out_dim());
  return sizes;
}

void Network::CheckInput(std::span<const double> state) const {
  if (static_cast<int>(state.size()) != input_dim()) {
    throw std::invalid_argument("Network: expected input of size " +
                                std::to_string(input_dim()) + ", got " +
                                std::to_string(state.size()));
  }
  for (double v : state) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("Network: non-finite input");
    }
  }
}

Eigen::VectorXd Network::Forward(std::span<const double> state) const {
  CheckInput(state);
  Eigen::MatrixXd x =
      Eigen::Map<const Eigen::VectorXd>(state.data(), state.size());
  return ForwardBatch(x).col(0);
}

Eigen::MatrixXd Network::ForwardBatch(const Eigen::MatrixXd& states) const {
  if (states.rows() != input_dim()) {
    throw std::invalid_argument("Network: batch row count != input dim");
  }
  Eigen::MatrixXd a = states;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    ApplyActivation(layer.activation, z);
    a = std::move(z);
  }
  return a;
}

Gradients Network::Backward(const Eigen::MatrixXd& states,
                            const Eigen::MatrixXd& output_grads) const {
  const Eigen::Index batch = states.cols();
  if (batch == 0) throw std::invalid_argument("Backward: empty batch");
  if (states.rows() != input_dim()) {
    throw std::invalid_argument("Backward: state dim mismatch");
  }
  if (output_grads.rows() != num_actions() || output_grads.cols() != batch) {
    throw std::invalid_argument("Backward: output gradient shape mismatch");
  }

  // activations[i] is the input to layer i; activations.back() is the output.
  std::vector<Eigen::MatrixXd> activations;
  activations.reserve(layers_.size() + 1);
  activations.push_back(states);
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * activations.back();
    z.colwise() += layer.bias;
    ApplyActivation(layer.activation, z);
    activations.push_back(std::move(z));
  }

  Gradients grads;
  grads.weights.resize(layers_.size());
  grads.bias.resize(layers_.size());
  const double inv_batch = 1.0 / static_cast<double>(batch);
  Eigen::MatrixXd delta = output_grads;
  for (size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    if (layer.activation == Activation::kReLU) {
      // ReLU output > 0 exactly where the pre-activation was > 0.
      delta = delta.cwiseProduct(
          (activations[i + 1].array() > 0.0).cast<double>().matrix());
    }
    grads.weights[i] = delta * activations[i].transpose() * inv_batch;
    grads.bias[i] = delta.rowwise().sum() * inv_batch;
    if (i > 0) delta = layer.weights.transpose() * delta;
  }
  if (!grads.AllFinite()) {
    throw DivergenceError("Backward: non-finite gradient");
  }
  return grads;
}

Eigen::VectorXd Network::InputGradient(std::span<const double> state,
                                       Objective objective, int action,
                                       Eigen::VectorXd* outputs) const {
  CheckInput(state);
  if (action < 0 || action >= num_actions()) {
    throw std::out_of_range("InputGradient: action index out of range");
  }
  // Hidden activations are kept per thread to avoid reallocating in FGSM loops.
  thread_local std::vector<Eigen::VectorXd> activations;
  activations.resize(layers_.size() + 1);
  activations[0] = Eigen::Map<const Eigen::VectorXd>(state.data(), state.size());
  for (size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    Eigen::VectorXd& z = activations[i + 1];
    z.noalias() = layer.weights * activations[i];
    z += layer.bias;
    if (layer.activation == Activation::kReLU) z = z.cwiseMax(0.0);
  }
  if (outputs) *outputs = activations.back();
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(num_actions());
  delta(action) = objective == Objective::kActionValue ? 1.0 : -1.0;
  thread_local Eigen::VectorXd scratch;
  for (size_t i = layers_.size(); i-- > 0;) {
    const auto& layer = layers_[i];
    if (layer.activation == Activation::kReLU) {
      delta = (activations[i + 1].array() > 0.0).select(delta, 0.0);
    }
    scratch.noalias() = layer.weights.transpose() * delta;
    delta.swap(scratch);
  }
  return delta;
}

Gradients Network::ZeroGradients() const {
  Gradients g;
  for (const auto& layer : layers_) {
    g.weights.push_back(Eigen::MatrixXd::Zero(layer.out_dim(), layer.in_dim()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.out_dim()));
  }
  return g;
}

double Network::SquaredWeightNorm() const {
  double total = 0.0;
  for (const auto& layer : layers_) total += layer.weights.squaredNorm();
  return total;
}

bool Network::AllFinite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool operator==(const Network& a, const Network& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& la = a.layers_[i];
    const auto& lb = b.layers_[i];
    if (la.activation != lb.activation) return false;
    if (la.weights.rows() != lb.weights.rows() ||
        la.weights.cols() != lb.weights.cols()) {
      return false;
    }
    if (la.weights != lb.weights || la.bias != lb.bias) return false;
  }
  return true;
}

void AdamConfig::Validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("Adam: step_size <= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam: betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam: epsilon <= 0");
}

AdamOptimizer::AdamOptimizer(const Network& net, AdamConfig config)
    : config_(config),
      first_moment_(net.ZeroGradients()),
      second_moment_(net.ZeroGradients()) {
  config_.Validate();
}

void AdamOptimizer::Step(Network& net, const Gradients& grads) {
  auto& layers = net.mutable_layers();
  if (grads.weights.size() != layers.size() ||
      first_moment_.weights.size() != layers.size()) {
    throw std::invalid_argument("Adam: gradient/network layer mismatch");
  }
  for (size_t i = 0; i < layers.size(); ++i) {
    if (grads.weights[i].rows() != layers[i].weights.rows() ||
        grads.weights[i].cols() != layers[i].weights.cols() ||
        grads.bias[i].size() != layers[i].bias.size()) {
      throw std::invalid_argument("Adam: gradient shape mismatch");
    }
  }
  if (!grads.AllFinite()) {
    throw DivergenceError("Adam: non-finite gradient");
  }

  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_count_);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const double lr = config_.step_size;
  const double eps = config_.epsilon;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + eps);
  };
  for (size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weights, first_moment_.weights[i],
           second_moment_.weights[i], grads.weights[i]);
    update(layers[i].bias, first_moment_.bias[i], second_moment_.bias[i],
           grads.bias[i]);
  }
}

int ArgMax(const Eigen::Ref<const Eigen::VectorXd>& values) {
  int best = 0;
  for (int i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return best;
}

int ArgMin(const Eigen::Ref<const Eigen::VectorXd>& values) {
  int best = 0;
  for (int i = 1; i < values.size(); ++i) {
    if (values(i) < values(best)) best = i;
  }
  return best;
}

}  // namespace mlab
