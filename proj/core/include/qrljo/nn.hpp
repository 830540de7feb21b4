#ifndef QRLJO_NN_HPP_
#define QRLJO_NN_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "qrljo/random.hpp"

namespace qrljo {

enum class Activation { kTanh, kIdentity };

// Fully connected feed-forward net. All weights and biases live in one flat
// vector (per layer: W column-major out x in, then b) so optimizers and
// checkpoints see a single parameter block.
class DenseNet {
 public:
  DenseNet() = default;
  // sizes = {in, h1, ..., out}. Hidden layers use `hidden`, the last layer `output`.
  DenseNet(std::vector<std::size_t> sizes, Activation hidden, Activation output);

  // in -> 128 tanh -> 128 tanh -> out (identity)
  static DenseNet mlp(std::size_t in, std::size_t out, std::size_t hidden = 128, std::size_t hidden_layers = 2);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Activation activation(std::size_t layer) const { return activations_.at(layer); }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  void init_uniform(Rng& rng);

  // Pre-activations and activations of a batch forward pass.
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // [0] = input, [L] = output
  };

  // Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  // Reverse-mode pass for the batch recorded in `cache`. Parameter gradients
  // are accumulated into `param_grad` (same layout as params()); the return
  // value is the gradient with respect to the input batch.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& upstream, std::span<double> param_grad) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<std::size_t> sizes_;
  std::vector<Activation> activations_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Parameter count of a dense chain; MLP(in->128->128->out) gives
// 128 in + 128 + 128*128 + 128 + out*128 + out.
std::size_t dense_param_count(std::span<const std::size_t> sizes);

// Trainable affine rescaling of a scalar in [-1, 1]: w * x + b.
struct CriticScale {
  double weight = 1.0;
  double bias = 0.0;
  static constexpr std::size_t kParamCount = 2;
};

struct AdamOptions {
  double learning_rate = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamOptions options);

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::uint64_t step_count() const { return step_; }
  std::size_t size() const { return m_.size(); }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  // Bias-corrected update in place. Throws NumericalError on a non-finite
  // gradient and ContractError on a length mismatch.
  void step(std::span<double> params, std::span<const double> grads);

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t step_ = 0;
};

// Softmax over all logits, masked entries zeroed, renormalized. Computed in
// the numerically stable equivalent form (softmax over the valid logits).
// Throws ContractError if every entry is masked.
std::vector<double> masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask);

// -sum p log p over the support.
double entropy(std::span<const double> probs);

// Draws an index from a probability vector.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

// Index of the largest probability (first on ties).
std::size_t argmax(std::span<const double> values);

}  // namespace qrljo

#endif  // QRLJO_NN_HPP_
