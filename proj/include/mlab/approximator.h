#pragma once

// Small fully-connected Q-function approximator with hand-written reverse-mode
// differentiation. Everything is double precision so that gradient checks
// against finite differences can be tight.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mlab {

// Raised when a gradient or loss stops being finite during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Activation codes are part of the checkpoint format; do not renumber.
enum class Activation : std::uint8_t {
  kReLU = 0,
  kIdentity = 1,
};

struct NetworkSpec {
  // First entry is the input dimension, last is the number of actions.
  std::vector<int> layer_sizes;
  // Applied to hidden layers only; the output layer is always linear.
  Activation activation = Activation::kReLU;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::kIdentity;

  int in_dim() const { return static_cast<int>(weights.cols()); }
  int out_dim() const { return static_cast<int>(weights.rows()); }
};

// Shape-congruent with the layers of the network that produced it.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  bool AllFinite() const;
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double scale);
};

// Scalar objectives supported by Network::InputGradient.
enum class Objective {
  kActionValue,          // Q(s, a)
  kNegativeActionValue,  // -Q(s, a)
};

class Network {
 public:
  // He-uniform weights drawn from spec.seed, zero biases.
  explicit Network(const NetworkSpec& spec);

  // Wraps explicit layers (checkpoint loading, hand-built test networks).
  static Network FromLayers(std::vector<DenseLayer> layers);

  int input_dim() const { return layers_.front().in_dim(); }
  int num_actions() const { return layers_.back().out_dim(); }
  std::vector<int> layer_sizes() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  Eigen::VectorXd Forward(std::span<const double> state) const;

  // States are columns. Returns num_actions x batch.
  Eigen::MatrixXd ForwardBatch(const Eigen::MatrixXd& states) const;

  // Mean over the batch of d(loss)/d(weights), given d(loss)/d(output) for
  // every sample (num_actions x batch, columns aligned with `states`).
  Gradients Backward(const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& output_grads) const;

  // When `outputs` is given it receives forward(state) as well.
  Eigen::VectorXd InputGradient(std::span<const double> state,
                                Objective objective, int action,
                                Eigen::VectorXd* outputs = nullptr) const;

  Gradients ZeroGradients() const;

  // Sum of squared entries of all weight matrices (biases excluded).
  double SquaredWeightNorm() const;

  bool AllFinite() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  Network() = default;
  void CheckInput(std::span<const double> state) const;

  std::vector<DenseLayer> layers_;
};

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void Validate() const;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const Network& net, AdamConfig config);

  // Applies one Adam update in place. Non-finite gradients are rejected
  // before anything is modified.
  void Step(Network& net, const Gradients& grads);

  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  Gradients first_moment_;
  Gradients second_moment_;
  std::int64_t step_count_ = 0;
};

// Index of the largest entry; ties go to the lowest index.
int ArgMax(const Eigen::Ref<const Eigen::VectorXd>& values);
// Index of the smallest entry; ties go to the lowest index.
int ArgMin(const Eigen::Ref<const Eigen::VectorXd>& values);

}  // namespace mlab
