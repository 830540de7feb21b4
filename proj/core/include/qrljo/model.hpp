#ifndef QRLJO_MODEL_HPP_
#define QRLJO_MODEL_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qrljo/nn.hpp"
#include "qrljo/qsim.hpp"

namespace qrljo {

enum class PartKind { kClassical, kVqc };

enum class GradientMethod { kAdjoint, kParameterShift };

// Which optimizer learning rate a parameter block trains with.
enum class ParamGroup { kClassical, kQuantum, kPostProcessing };

const char* to_string(ParamGroup g);

// Actor/critic composition. The four combinations are Classical, Q-Critic,
// Q-Actor and Fully-Quantum.
struct ModelConfig {
  PartKind actor = PartKind::kClassical;
  PartKind critic = PartKind::kClassical;
  VqcShape vqc;
  std::size_t hidden_units = 128;
  std::size_t hidden_layers = 2;
  GradientMethod gradient_method = GradientMethod::kAdjoint;

  std::size_t n_max() const { return vqc.n_max; }
  std::string name() const;

  static ModelConfig classical(std::size_t n_max);
  static ModelConfig q_critic(const VqcShape& vqc);
  static ModelConfig q_actor(const VqcShape& vqc);
  static ModelConfig fully_quantum(const VqcShape& vqc);
  // Accepts "classical", "q-critic", "q-actor", "fully-quantum" (case-insensitive).
  static ModelConfig from_name(const std::string& name, const VqcShape& vqc);
};

// A named, contiguous parameter container of a model.
struct ParamBlockView {
  std::string name;
  ParamGroup group;
  std::span<double> values;
};

struct ConstParamBlockView {
  std::string name;
  ParamGroup group;
  std::span<const double> values;
};

// Actor-critic pair whose halves are independently a dense net or a VQC.
//
// VQC actor: per-qubit <Z> -> dense head (n_qubits -> n(n-1)) -> logits.
// VQC critic: w * <Z...Z> + b.
class ActorCritic {
 public:
  ActorCritic(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::size_t observation_size() const { return observation_size_; }
  std::size_t num_actions() const { return num_actions_; }

  std::vector<ParamBlockView> blocks();
  std::vector<ConstParamBlockView> blocks() const;
  std::size_t param_count() const;

  // Batch forward over observation columns; keeps what backward needs.
  struct Pass {
    Eigen::MatrixXd logits;  // actions x batch
    Eigen::VectorXd values;  // batch
    Eigen::MatrixXd observations;
    DenseNet::Cache actor_cache;
    DenseNet::Cache critic_cache;
    std::vector<Statevector> actor_states;
    std::vector<Statevector> critic_states;
    Eigen::VectorXd critic_parity;
  };
  Pass forward(const Eigen::MatrixXd& observations) const;

  // Gradients laid out like blocks().
  using Gradients = std::vector<std::vector<double>>;
  Gradients zero_gradients() const;
  // Accumulates d loss / d params given d loss / d logits and d loss / d values.
  void backward(const Pass& pass, const Eigen::MatrixXd& dlogits, const Eigen::VectorXd& dvalues,
                Gradients& grads) const;

  // Single-observation conveniences.
  std::vector<double> logits(std::span<const double> observation) const;
  double value(std::span<const double> observation) const;

  // VQC actor internals, used by noisy evaluation.
  const CircuitSpec& actor_circuit() const { return actor_circuit_; }
  std::span<const double> actor_circuit_params() const { return actor_circuit_params_; }
  std::vector<double> actor_logits_from_expectations(std::span<const double> z) const;

  // Number of circuit simulations run so far (forward and gradient passes).
  std::uint64_t circuit_evaluations() const { return circuit_evaluations_; }

 private:
  std::vector<double> circuit_gradient(const CircuitSpec& spec, std::span<const double> inputs,
                                       std::span<const double> params, const Statevector& final_state,
                                       const Observable& observable) const;

  ModelConfig config_;
  std::size_t observation_size_ = 0;
  std::size_t num_actions_ = 0;

  DenseNet actor_net_;
  CircuitSpec actor_circuit_;
  std::vector<double> actor_circuit_params_;
  DenseNet actor_head_;

  DenseNet critic_net_;
  CircuitSpec critic_circuit_;
  std::vector<double> critic_circuit_params_;
  std::vector<double> critic_scale_;  // {w, b}

  mutable std::uint64_t circuit_evaluations_ = 0;
};

// Flat parameter vectors plus metadata, shared by every model kind.
struct Checkpoint {
  std::string kind;                          // model name or "singlestep"
  std::map<std::string, double> settings;    // architecture knobs
  struct Block {
    std::string name;
    std::string group;
    std::vector<double> values;
  };
  std::vector<Block> blocks;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const ActorCritic& model, std::uint64_t seed, std::uint64_t step);
// Rebuilds the model described by a multi-step checkpoint.
ActorCritic restore_model(const Checkpoint& checkpoint);

}  // namespace qrljo

#endif  // QRLJO_MODEL_HPP_
