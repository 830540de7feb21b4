#ifndef QRLJO_PPO_HPP_
#define QRLJO_PPO_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qrljo/catalog.hpp"
#include "qrljo/env.hpp"
#include "qrljo/model.hpp"
#include "qrljo/random.hpp"

namespace qrljo {

struct PPOConfig {
  double clip_epsilon = 0.2;
  double value_coef = 0.5;     // c1
  double entropy_coef = 0.01;  // c2
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t episodes_per_update = 8;
  std::size_t epochs = 4;
  std::size_t minibatch_size = 32;
  double lr_classical = 2.5e-4;
  double lr_quantum = 1e-2;
  double lr_post = 1e-3;
  bool normalize_advantages = true;
  double max_grad_norm = 0.0;  // 0 disables per-block norm clipping
  std::size_t total_episodes = 10000;
  std::uint64_t seed = 0;
  std::size_t log_every = 100;
  std::size_t rolling_window = 500;

  // Throws ContractError when a field is out of range.
  void validate() const;
};

struct StepRecord {
  std::vector<double> observation;
  std::vector<std::uint8_t> mask;
  std::size_t action = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  std::size_t episode = 0;
};

struct TrajectoryBatch {
  std::vector<StepRecord> steps;
  std::vector<std::size_t> episode_query;   // workload query index per episode
  std::vector<double> episode_relative_cost;
  std::vector<double> episode_cost_sum;     // sum of C_t per episode
};

// Optimal costs for every query of a workload (computed once per run).
std::vector<double> optimal_costs(const Workload& workload);

// Samples `count` episodes with queries drawn uniformly from `query_pool`.
// Log-probabilities and values are recorded at collection time.
TrajectoryBatch collect_rollouts(const JoinOrderEnv& env, const Workload& workload, std::span<const double> c_dp,
                                 std::span<const std::size_t> query_pool, const ActorCritic& model,
                                 std::size_t count, Rng& rng);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;  // value targets = raw advantage + value estimate
};

// GAE(gamma, lambda) within each episode; normalized to zero mean and unit
// variance when requested and the batch holds more than one step.
Advantages compute_advantages(const TrajectoryBatch& batch, double gamma, double lambda, bool normalize = true);

struct LossReport {
  double clip_objective = 0.0;  // mean L^clip over the last epoch
  double value_loss = 0.0;      // mean squared error
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  std::vector<double> grad_norms;  // per parameter block, last minibatch
};

// Per-minibatch loss terms and the gradient of
// -(L^clip - c1 L^VF + c2 S) with respect to logits and values.
struct MinibatchLoss {
  double clip_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  Eigen::MatrixXd dlogits;
  Eigen::VectorXd dvalues;
};
MinibatchLoss ppo_loss(const ActorCritic::Pass& pass, std::span<const StepRecord* const> steps,
                       std::span<const double> advantages, std::span<const double> returns, const PPOConfig& config);

// Owns the optimizer state for one model.
class PPOTrainer {
 public:
  PPOTrainer(ActorCritic& model, const PPOConfig& config);

  LossReport update(const TrajectoryBatch& batch, Rng& rng);
  std::uint64_t updates() const { return updates_; }

 private:
  ActorCritic* model_;
  PPOConfig config_;
  std::vector<Adam> optimizers_;
  std::uint64_t updates_ = 0;
};

// One optimisation stage over a batch.
LossReport ppo_update(ActorCritic& model, const TrajectoryBatch& batch, const PPOConfig& config, Rng& rng);

struct CurvePoint {
  std::size_t episode = 0;
  double rolling_median = 0.0;
  double clip_loss = 0.0;
  double vf_loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  ActorCritic model;
  std::vector<CurvePoint> curve;
  double final_rolling_median = 0.0;
  std::vector<std::size_t> test_queries;
  std::vector<double> test_relative_costs;
  std::uint64_t updates = 0;
};

using ProgressCallback = std::function<void(const CurvePoint&)>;

// Trains on the nine folds other than `fold`, logs the rolling median of
// the relative cost every log_every episodes, then evaluates greedily on
// the held-out fold.
TrainResult train(const Workload& workload, int fold, const ModelConfig& model_config, const PPOConfig& config,
                  const ProgressCallback& progress = {});

// Plays one episode with argmax actions and returns the plan.
struct GreedyOutcome {
  JoinTree plan;
  double cost = 0.0;
  double relative_cost = 0.0;
  std::vector<Action> actions;
};
GreedyOutcome greedy_episode(const JoinOrderEnv& env, const Query& query, double c_dp, const ActorCritic& model);

// Greedy relative costs for the given queries.
std::vector<double> evaluate_greedy(const ActorCritic& model, const Workload& workload, std::span<const double> c_dp,
                                    std::span<const std::size_t> queries);

// Median of a copy; NaN for an empty input.
double median(std::vector<double> values);
// Linear-interpolated quantile, q in [0,1].
double quantile(std::vector<double> values, double q);

// CSV "episode,rolling_median_rel_cost,clip_loss,vf_loss,entropy".
void write_training_log(std::ostream& out, std::span<const CurvePoint> curve);

}  // namespace qrljo

#endif  // QRLJO_PPO_HPP_
