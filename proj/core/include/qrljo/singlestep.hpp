#ifndef QRLJO_SINGLESTEP_HPP_
#define QRLJO_SINGLESTEP_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qrljo/catalog.hpp"
#include "qrljo/jointree.hpp"
#include "qrljo/model.hpp"
#include "qrljo/qsim.hpp"

namespace qrljo {

inline constexpr std::size_t kSingleStepMaxRelations = 4;

struct OrderCandidate {
  JoinTree tree;
  double cost = 0.0;
  double label = 0.0;  // C_DP / cost
};

// Every unordered bushy shape of a query without cross joins. Candidate i
// is scored by the probability of basis state i.
struct OrderTable {
  std::size_t num_relations = 0;
  std::vector<OrderCandidate> candidates;
  double c_dp = 0.0;
  std::size_t optimal = 0;  // first candidate with label 1

  // Labels divided by their sum.
  std::vector<double> normalized_labels() const;
};

// Refuses queries with more than four relations.
OrderTable enumerate_orders(const Query& query, const Catalog& catalog);

struct SingleStepConfig {
  std::size_t n_relations = 4;
  bool use_dru = true;
  std::size_t dru_repetitions = 5;
  std::size_t extra_layers = 0;  // no-DRU variant only
  double learning_rate = 1e-2;
  std::size_t budget = 2000;  // optimizer steps, one query each
  GradientMethod gradient_method = GradientMethod::kParameterShift;
  std::uint64_t seed = 0;

  // DRU: repetitions * n (encoding before every layer); otherwise n + extra.
  std::size_t variational_layers() const;
  void validate() const;
};

// n qubits; `layers` variational layers. With `reupload` the encoding
// precedes every layer, otherwise it runs once up front.
CircuitSpec build_singlestep_circuit(std::size_t n_relations, std::size_t layers, bool reupload);

// One qubit per relation: Rx(id / (r-1) * pi) then Ry(selectivity * pi).
class SingleStepModel {
 public:
  SingleStepModel(const SingleStepConfig& config, std::uint64_t seed);

  const SingleStepConfig& config() const { return config_; }
  const CircuitSpec& circuit() const { return circuit_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }
  std::size_t num_qubits() const { return circuit_.num_qubits(); }

  // [ids..., selectivities...], all in [0, 1].
  std::vector<double> encode(const Query& query) const;
  // Probability of every computational basis state.
  std::vector<double> basis_probabilities(const Query& query) const;

 private:
  SingleStepConfig config_;
  CircuitSpec circuit_;
  std::vector<double> params_;
};

struct SingleStepPrediction {
  std::size_t chosen = 0;
  JoinTree tree;
  std::vector<double> scores;  // per candidate
};

SingleStepPrediction predict(const SingleStepModel& model, const Query& query, const OrderTable& table);
SingleStepPrediction predict(const SingleStepModel& model, const Query& query, const Catalog& catalog);

// Mean squared error between candidate probabilities and normalized labels.
double singlestep_loss(const SingleStepModel& model, const Query& query, const OrderTable& table);
// Gradient of singlestep_loss with respect to the circuit parameters.
std::vector<double> singlestep_gradient(const SingleStepModel& model, const Query& query, const OrderTable& table);

struct SingleStepResult {
  SingleStepModel model;
  std::vector<double> loss_curve;  // mean loss per log window
  std::vector<std::size_t> test_queries;
  std::vector<double> test_relative_costs;
};

using SingleStepProgress = std::function<void(std::size_t step, double mean_loss)>;

// Adam over the circuit parameters on the nine training folds; greedy
// evaluation on `fold`.
SingleStepResult train_singlestep(const Workload& workload, int fold, const SingleStepConfig& config,
                                  const SingleStepProgress& progress = {}, std::size_t log_every = 100);

std::vector<double> evaluate_singlestep(const SingleStepModel& model, const Workload& workload,
                                        std::span<const std::size_t> queries);

Checkpoint make_checkpoint(const SingleStepModel& model, std::uint64_t seed, std::uint64_t step);
SingleStepModel restore_singlestep(const Checkpoint& checkpoint);

}  // namespace qrljo

#endif  // QRLJO_SINGLESTEP_HPP_
