#include "qrljo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include "qrljo/errors.hpp"

namespace qrljo {

void PPOConfig::validate() const {
  if (!(clip_epsilon > 0.0)) throw ContractError("PPO: clip epsilon must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("PPO: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ContractError("PPO: lambda must lie in [0, 1]");
  if (value_coef < 0.0 || entropy_coef < 0.0) throw ContractError("PPO: c1 and c2 must be >= 0");
  if (episodes_per_update == 0 || epochs == 0 || minibatch_size == 0)
    throw ContractError("PPO: batch sizes and epochs must be positive");
  if (!(lr_classical > 0.0 && lr_quantum > 0.0 && lr_post > 0.0)) throw ContractError("PPO: learning rates must be > 0");
  if (max_grad_norm < 0.0) throw ContractError("PPO: max_grad_norm must be >= 0");
  if (log_every == 0 || rolling_window == 0) throw ContractError("PPO: logging cadence must be positive");
}

std::vector<double> optimal_costs(const Workload& workload) {
  std::vector<double> out;
  out.reserve(workload.queries.size());
  for (const auto& q : workload.queries) out.push_back(dp_optimal(q, workload.catalog).cost);
  return out;
}

TrajectoryBatch collect_rollouts(const JoinOrderEnv& env, const Workload& workload, std::span<const double> c_dp,
                                 std::span<const std::size_t> query_pool, const ActorCritic& model,
                                 std::size_t count, Rng& rng) {
  if (count == 0) throw ContractError("collect_rollouts: count must be >= 1");
  if (query_pool.empty()) throw ContractError("collect_rollouts: empty query pool");
  TrajectoryBatch batch;
  for (std::size_t ep = 0; ep < count; ++ep) {
    const auto qi = query_pool[rng.index(query_pool.size())];
    auto state = env.reset(workload.queries.at(qi), c_dp[qi]);
    double cost_sum = 0.0;
    while (!state.done()) {
      const auto obs = env.observe(state);
      const auto mask = env.action_mask(state);
      const auto probs = masked_softmax(model.logits(obs.features), mask.valid);
      const auto a = sample_categorical(probs, rng);
      StepRecord rec;
      rec.observation = obs.features;
      rec.mask = mask.valid;
      rec.action = a;
      rec.log_prob = std::log(probs[a]);
      rec.value = model.value(obs.features);
      auto next = env.step(state, action_from_index(a, env.options().n_max));
      rec.reward = next.reward;
      rec.done = next.done;
      rec.episode = ep;
      cost_sum += next.cost_delta;
      batch.steps.push_back(std::move(rec));
      state = std::move(next.state);
    }
    batch.episode_query.push_back(qi);
    batch.episode_cost_sum.push_back(cost_sum);
    batch.episode_relative_cost.push_back(relative_cost(state.forest_cost(), c_dp[qi]));
  }
  return batch;
}

Advantages compute_advantages(const TrajectoryBatch& batch, double gamma, double lambda, bool normalize) {
  const auto n = batch.steps.size();
  Advantages out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const auto& s = batch.steps[i];
    const bool last_of_episode = s.done || i + 1 == n || batch.steps[i + 1].episode != s.episode;
    const double next_value = last_of_episode ? 0.0 : batch.steps[i + 1].value;
    if (last_of_episode) gae = 0.0;
    const double delta = s.reward + gamma * next_value - s.value;
    gae = delta + gamma * lambda * gae;
    out.advantages[i] = gae;
    out.returns[i] = gae + s.value;
  }
  if (normalize && n > 1) {
    double mean = 0.0;
    for (double a : out.advantages) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : out.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : out.advantages) a = (a - mean) / (sd + 1e-8);
  }
  return out;
}

MinibatchLoss ppo_loss(const ActorCritic::Pass& pass, std::span<const StepRecord* const> steps,
                       std::span<const double> advantages, std::span<const double> returns, const PPOConfig& config) {
  const auto batch = static_cast<Eigen::Index>(steps.size());
  if (pass.logits.cols() != batch || static_cast<Eigen::Index>(advantages.size()) != batch ||
      static_cast<Eigen::Index>(returns.size()) != batch)
    throw ContractError("ppo_loss: batch sizes disagree");
  const auto actions = pass.logits.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double eps = config.clip_epsilon;
  MinibatchLoss out;
  out.dlogits = Eigen::MatrixXd::Zero(actions, batch);
  out.dvalues = Eigen::VectorXd::Zero(batch);

  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& step = *steps[static_cast<std::size_t>(b)];
    const double* col = pass.logits.col(b).data();
    const auto p = masked_softmax({col, static_cast<std::size_t>(actions)}, step.mask);
    const double log_p = std::log(p[step.action]);
    const double ratio = std::exp(log_p - step.log_prob);
    const double adv = advantages[static_cast<std::size_t>(b)];
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    const double objective = std::min(surr1, surr2);
    // d objective / d log pi: only the unclipped branch carries gradient.
    const double d_logp = surr1 <= surr2 ? adv * ratio : 0.0;
    const double s = entropy(p);

    out.clip_objective += objective * inv_b;
    out.entropy += s * inv_b;
    out.approx_kl += (step.log_prob - log_p) * inv_b;
    if (std::abs(ratio - 1.0) > eps) out.clip_fraction += inv_b;

    for (Eigen::Index i = 0; i < actions; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      if (!step.mask[iu]) continue;
      const double onehot = iu == step.action ? 1.0 : 0.0;
      const double d_entropy = p[iu] > 0.0 ? -p[iu] * (std::log(p[iu]) + s) : 0.0;
      out.dlogits(i, b) = (-d_logp * (onehot - p[iu]) - config.entropy_coef * d_entropy) * inv_b;
    }
    const double err = pass.values(b) - returns[static_cast<std::size_t>(b)];
    out.value_loss += err * err * inv_b;
    out.dvalues(b) = config.value_coef * 2.0 * err * inv_b;
  }
  if (!std::isfinite(out.clip_objective) || !std::isfinite(out.value_loss) || !std::isfinite(out.entropy))
    throw NumericalError("PPO loss is not finite (clip=" + std::to_string(out.clip_objective) +
                         ", vf=" + std::to_string(out.value_loss) + ", entropy=" + std::to_string(out.entropy) + ")");
  return out;
}

PPOTrainer::PPOTrainer(ActorCritic& model, const PPOConfig& config) : model_(&model), config_(config) {
  config_.validate();
  for (const auto& b : model.blocks()) {
    AdamOptions opt;
    switch (b.group) {
      case ParamGroup::kClassical: opt.learning_rate = config.lr_classical; break;
      case ParamGroup::kQuantum: opt.learning_rate = config.lr_quantum; break;
      case ParamGroup::kPostProcessing: opt.learning_rate = config.lr_post; break;
    }
    optimizers_.emplace_back(b.values.size(), opt);
  }
}

LossReport PPOTrainer::update(const TrajectoryBatch& batch, Rng& rng) {
  if (batch.steps.empty()) throw ContractError("ppo_update: empty batch");
  const auto adv = compute_advantages(batch, config_.gamma, config_.gae_lambda, config_.normalize_advantages);
  const auto n = batch.steps.size();
  const auto obs_dim = static_cast<Eigen::Index>(model_->observation_size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  LossReport report;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    double clip_sum = 0.0, vf_sum = 0.0, ent_sum = 0.0, kl_sum = 0.0, frac_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config_.minibatch_size) {
      const auto end = std::min(n, start + config_.minibatch_size);
      const auto mb = end - start;
      Eigen::MatrixXd obs(obs_dim, static_cast<Eigen::Index>(mb));
      std::vector<const StepRecord*> steps(mb);
      std::vector<double> a(mb), r(mb);
      for (std::size_t j = 0; j < mb; ++j) {
        const auto idx = order[start + j];
        steps[j] = &batch.steps[idx];
        obs.col(static_cast<Eigen::Index>(j)) =
            Eigen::Map<const Eigen::VectorXd>(steps[j]->observation.data(), obs_dim);
        a[j] = adv.advantages[idx];
        r[j] = adv.returns[idx];
      }
      const auto pass = model_->forward(obs);
      const auto loss = ppo_loss(pass, steps, a, r, config_);
      auto grads = model_->zero_gradients();
      model_->backward(pass, loss.dlogits, loss.dvalues, grads);

      auto blocks = model_->blocks();
      report.grad_norms.assign(blocks.size(), 0.0);
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        double sq = 0.0;
        for (double g : grads[k]) sq += g * g;
        const double norm = std::sqrt(sq);
        report.grad_norms[k] = norm;
        if (config_.max_grad_norm > 0.0 && norm > config_.max_grad_norm)
          for (double& g : grads[k]) g *= config_.max_grad_norm / norm;
        optimizers_[k].step(blocks[k].values, grads[k]);
      }
      const double w = static_cast<double>(mb) / static_cast<double>(n);
      clip_sum += loss.clip_objective * w;
      vf_sum += loss.value_loss * w;
      ent_sum += loss.entropy * w;
      kl_sum += loss.approx_kl * w;
      frac_sum += loss.clip_fraction * w;
    }
    report.clip_objective = clip_sum;
    report.value_loss = vf_sum;
    report.entropy = ent_sum;
    report.approx_kl = kl_sum;
    report.clip_fraction = frac_sum;
  }
  ++updates_;
  return report;
}

LossReport ppo_update(ActorCritic& model, const TrajectoryBatch& batch, const PPOConfig& config, Rng& rng) {
  PPOTrainer trainer(model, config);
  return trainer.update(batch, rng);
}

// ---------------------------------------------------------------------------

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(values.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

GreedyOutcome greedy_episode(const JoinOrderEnv& env, const Query& query, double c_dp, const ActorCritic& model) {
  auto state = env.reset(query, c_dp);
  GreedyOutcome out{JoinTree::leaf(0), 0.0, 0.0, {}};
  while (!state.done()) {
    const auto obs = env.observe(state);
    const auto mask = env.action_mask(state);
    const auto probs = masked_softmax(model.logits(obs.features), mask.valid);
    const auto action = action_from_index(argmax(probs), env.options().n_max);
    out.actions.push_back(action);
    state = env.step(state, action).state;
  }
  out.plan = state.final_tree();
  out.cost = state.forest_cost();
  out.relative_cost = relative_cost(out.cost, c_dp);
  return out;
}

std::vector<double> evaluate_greedy(const ActorCritic& model, const Workload& workload, std::span<const double> c_dp,
                                    std::span<const std::size_t> queries) {
  JoinOrderEnv env(workload.catalog, EnvOptions{model.config().n_max(), Encoding::kReduced, 2});
  std::vector<double> out;
  out.reserve(queries.size());
  for (auto qi : queries) out.push_back(greedy_episode(env, workload.queries.at(qi), c_dp[qi], model).relative_cost);
  return out;
}

TrainResult train(const Workload& workload, int fold, const ModelConfig& model_config, const PPOConfig& config,
                  const ProgressCallback& progress) {
  config.validate();
  if (fold < 0 || fold >= static_cast<int>(kNumFolds)) throw ContractError("train: fold must lie in 0..9");
  if (config.total_episodes == 0) throw ContractError("train: episode budget must be positive");
  const auto pool = workload.training_indices(fold);
  if (pool.empty()) throw ContractError("train: training folds are empty");
  for (auto qi : pool)
    if (workload.queries[qi].size() > model_config.n_max())
      throw ContractError("train: workload query exceeds the model's n_max");

  JoinOrderEnv env(workload.catalog, EnvOptions{model_config.n_max(), Encoding::kReduced, 2});
  const auto c_dp = optimal_costs(workload);
  TrainResult result{ActorCritic(model_config, config.seed), {}, 0.0, workload.fold_indices(fold), {}, 0};
  PPOTrainer trainer(result.model, config);
  Rng rng(mix_seed(config.seed, 0x7a1e + static_cast<std::uint64_t>(fold)));

  std::deque<double> window;
  std::size_t episodes = 0;
  std::size_t next_log = config.log_every;
  LossReport last;
  while (episodes < config.total_episodes) {
    const auto count = std::min(config.episodes_per_update, config.total_episodes - episodes);
    const auto batch = collect_rollouts(env, workload, c_dp, pool, result.model, count, rng);
    last = trainer.update(batch, rng);
    for (double rc : batch.episode_relative_cost) {
      window.push_back(rc);
      if (window.size() > config.rolling_window) window.pop_front();
      ++episodes;
      if (episodes == next_log || episodes == config.total_episodes) {
        CurvePoint pt{episodes, median({window.begin(), window.end()}), last.clip_objective, last.value_loss,
                      last.entropy};
        result.curve.push_back(pt);
        if (progress) progress(pt);
        if (episodes == next_log) next_log += config.log_every;
      }
    }
  }
  result.final_rolling_median = median({window.begin(), window.end()});
  result.updates = trainer.updates();
  result.test_relative_costs = evaluate_greedy(result.model, workload, c_dp, result.test_queries);
  return result;
}

void write_training_log(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "episode,rolling_median_rel_cost,clip_loss,vf_loss,entropy\n";
  out.precision(10);
  for (const auto& p : curve)
    out << p.episode << ',' << p.rolling_median << ',' << p.clip_loss << ',' << p.vf_loss << ',' << p.entropy << '\n';
}

}  // namespace qrljo
