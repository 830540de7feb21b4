#include "qrljo/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qrljo/errors.hpp"

namespace qrljo {

DenseNet::DenseNet(std::vector<std::size_t> sizes, Activation hidden, Activation output) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ContractError("DenseNet needs at least one layer");
  for (auto s : sizes_)
    if (s == 0) throw ContractError("DenseNet layer sizes must be positive");
  const auto layers = sizes_.size() - 1;
  activations_.assign(layers, hidden);
  activations_.back() = output;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets_.push_back(offset);
    offset += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(offset, 0.0);
}

DenseNet DenseNet::mlp(std::size_t in, std::size_t out, std::size_t hidden, std::size_t hidden_layers) {
  std::vector<std::size_t> sizes{in};
  for (std::size_t i = 0; i < hidden_layers; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return DenseNet(std::move(sizes), Activation::kTanh, Activation::kIdentity);
}

void DenseNet::init_uniform(Rng& rng) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    const auto begin = offsets_[l];
    const auto end = begin + sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    for (std::size_t i = begin; i < end; ++i) params_[i] = rng.uniform(-bound, bound);
  }
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (static_cast<std::size_t>(input.rows()) != input_dim())
    throw ContractError("DenseNet input has " + std::to_string(input.rows()) + " rows, expected " +
                        std::to_string(input_dim()));
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + offsets_[l] + out * in, out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (activations_[l] == Activation::kTanh) z = z.array().tanh();
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input), nullptr).col(0);
}

Eigen::MatrixXd DenseNet::backward(const Cache& cache, const Eigen::MatrixXd& upstream,
                                   std::span<double> param_grad) const {
  if (param_grad.size() != params_.size()) throw ContractError("gradient buffer has the wrong size");
  if (cache.activations.size() != num_layers() + 1) throw ContractError("backward needs a cache from forward");
  if (upstream.rows() != static_cast<Eigen::Index>(output_dim()) || upstream.cols() != cache.activations[0].cols())
    throw ContractError("upstream gradient shape does not match the forward batch");
  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto& a_out = cache.activations[l + 1];
    const auto& a_in = cache.activations[l];
    if (activations_[l] == Activation::kTanh) delta = delta.array() * (1.0 - a_out.array().square());
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::MatrixXd> gw(param_grad.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(param_grad.data() + offsets_[l] + out * in, out);
    gw.noalias() += delta * a_in.transpose();
    gb.noalias() += delta.rowwise().sum();
    delta = w.transpose() * delta;
  }
  return delta;
}

std::size_t dense_param_count(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::size_t size, AdamOptions options) : options_(options), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ContractError("Adam: parameter/gradient length mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw NumericalError("Adam: non-finite gradient");
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
  }
}

// ---------------------------------------------------------------------------

std::vector<double> masked_softmax(std::span<const double> logits, std::span<const std::uint8_t> mask) {
  if (logits.size() != mask.size()) throw ContractError("masked_softmax: logits and mask differ in length");
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) hi = std::max(hi, logits[i]);
  if (hi == -std::numeric_limits<double>::infinity()) throw ContractError("masked_softmax: every action is masked");
  std::vector<double> p(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    p[i] = std::exp(logits[i] - hi);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

double entropy(std::span<const double> probs) {
  double s = 0.0;
  for (double p : probs)
    if (p > 0.0) s -= p * std::log(p);
  return s;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace qrljo
