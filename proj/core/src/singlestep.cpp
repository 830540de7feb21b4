#include "qrljo/singlestep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "qrljo/errors.hpp"
#include "qrljo/nn.hpp"
#include "qrljo/ppo.hpp"
#include "qrljo/random.hpp"

namespace qrljo {

std::vector<double> OrderTable::normalized_labels() const {
  double sum = 0.0;
  for (const auto& c : candidates) sum += c.label;
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.label / sum);
  return out;
}

OrderTable enumerate_orders(const Query& query, const Catalog& catalog) {
  if (query.size() > kSingleStepMaxRelations)
    throw ContractError("single-step enumeration supports at most 4 relations, got " + std::to_string(query.size()));
  if (query.size() == 0) throw ContractError("single-step enumeration needs a non-empty query");
  OrderTable table;
  table.num_relations = query.size();
  std::vector<JoinTree> seen;
  for (const auto& tree : enumerate_bushy(query, false)) {
    auto canon = tree.canonical();
    if (std::find(seen.begin(), seen.end(), canon) != seen.end()) continue;
    seen.push_back(canon);
    table.candidates.push_back({canon, cost_out(canon, query, catalog), 0.0});
  }
  if (table.candidates.empty()) throw NoPlanError("query has no cross-join-free plan");
  if (table.candidates.size() > (std::size_t{1} << query.size()))
    throw ContractError("candidate count exceeds the basis size");

  table.c_dp = table.candidates.front().cost;
  for (const auto& c : table.candidates) table.c_dp = std::min(table.c_dp, c.cost);
  bool found = false;
  for (std::size_t i = 0; i < table.candidates.size(); ++i) {
    auto& c = table.candidates[i];
    // Single-leaf queries have cost 0.
    c.label = c.cost > 0.0 ? table.c_dp / c.cost : 1.0;
    if (c.cost == table.c_dp && !found) {
      c.label = 1.0;
      table.optimal = i;
      found = true;
    }
  }
  return table;
}

std::size_t SingleStepConfig::variational_layers() const {
  return use_dru ? dru_repetitions * n_relations : n_relations + extra_layers;
}

void SingleStepConfig::validate() const {
  if (n_relations < 2 || n_relations > kSingleStepMaxRelations)
    throw ContractError("single-step model needs 2..4 relations");
  if (use_dru && dru_repetitions == 0) throw ContractError("DRU needs at least one repetition");
  if (!(learning_rate > 0.0)) throw ContractError("learning rate must be > 0");
}

namespace {

void append_encoding(CircuitSpec& spec, std::size_t n) {
  for (std::size_t q = 0; q < n; ++q) {
    spec.rotation(GateKind::kRx, q, AngleSource::input(q, std::numbers::pi));
    spec.rotation(GateKind::kRy, q, AngleSource::input(n + q, std::numbers::pi));
  }
}

std::vector<double> candidate_probabilities(const SingleStepModel& model, const Query& query, const OrderTable& table,
                                            Statevector* state_out = nullptr) {
  const auto inputs = model.encode(query);
  auto state = simulate(model.circuit(), inputs, model.params());
  std::vector<double> out(table.candidates.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = state.probability(i);
  if (state_out) *state_out = std::move(state);
  return out;
}

void check_dimension(const SingleStepModel& model, const Query& query, const OrderTable& table) {
  if (query.size() != model.num_qubits() || table.num_relations != query.size())
    throw ContractError("single-step model is sized for " + std::to_string(model.num_qubits()) +
                        " relations, query has " + std::to_string(query.size()));
}

}  // namespace

CircuitSpec build_singlestep_circuit(std::size_t n, std::size_t layers, bool reupload) {
  if (n == 0) throw ContractError("single-step circuit needs at least one qubit");
  CircuitSpec spec(n);
  std::size_t slot = 0;
  if (!reupload) append_encoding(spec, n);
  for (std::size_t l = 0; l < layers; ++l) {
    if (reupload) append_encoding(spec, n);
    slot = append_variational_layer(spec, slot);
  }
  spec.reserve_slots(2 * n, slot);
  return spec;
}

SingleStepModel::SingleStepModel(const SingleStepConfig& config, std::uint64_t seed)
    : config_(config), circuit_((config.validate(), build_singlestep_circuit(config.n_relations, config.variational_layers(), config.use_dru))) {
  Rng rng(mix_seed(seed, 0x5157));
  params_.resize(circuit_.param_count());
  for (double& p : params_) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
}

std::vector<double> SingleStepModel::encode(const Query& query) const {
  const auto n = query.size();
  if (n != num_qubits()) throw ContractError("query size does not match the single-step model");
  std::vector<double> in(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    in[k] = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.0;
    in[n + k] = query.selection_selectivity(k);
  }
  return in;
}

std::vector<double> SingleStepModel::basis_probabilities(const Query& query) const {
  const auto state = simulate(circuit_, encode(query), params_);
  std::vector<double> out(state.dimension());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = state.probability(i);
  return out;
}

SingleStepPrediction predict(const SingleStepModel& model, const Query& query, const OrderTable& table) {
  check_dimension(model, query, table);
  auto scores = candidate_probabilities(model, query, table);
  const auto best = argmax(scores);
  return {best, table.candidates[best].tree, std::move(scores)};
}

SingleStepPrediction predict(const SingleStepModel& model, const Query& query, const Catalog& catalog) {
  return predict(model, query, enumerate_orders(query, catalog));
}

double singlestep_loss(const SingleStepModel& model, const Query& query, const OrderTable& table) {
  check_dimension(model, query, table);
  const auto p = candidate_probabilities(model, query, table);
  const auto y = table.normalized_labels();
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) loss += (p[i] - y[i]) * (p[i] - y[i]);
  return loss / static_cast<double>(p.size());
}

std::vector<double> singlestep_gradient(const SingleStepModel& model, const Query& query, const OrderTable& table) {
  check_dimension(model, query, table);
  Statevector state(model.num_qubits());
  const auto p = candidate_probabilities(model, query, table, &state);
  const auto y = table.normalized_labels();
  // dL/dtheta = <D> derivative with D held at 2 (p - y) / C on assigned states.
  std::vector<double> diag(state.dimension(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) diag[i] = 2.0 * (p[i] - y[i]) / static_cast<double>(p.size());
  const auto obs = Observable::diagonal(std::move(diag));
  const auto inputs = model.encode(query);
  if (model.config().gradient_method == GradientMethod::kAdjoint)
    return gradients_adjoint(model.circuit(), inputs, model.params(), obs, state).gradient;
  return gradients_parameter_shift(model.circuit(), inputs, model.params(), obs);
}

std::vector<double> evaluate_singlestep(const SingleStepModel& model, const Workload& workload,
                                        std::span<const std::size_t> queries) {
  std::vector<double> out;
  out.reserve(queries.size());
  for (auto qi : queries) {
    const auto& q = workload.queries.at(qi);
    const auto table = enumerate_orders(q, workload.catalog);
    const auto pred = predict(model, q, table);
    out.push_back(relative_cost(table.candidates[pred.chosen].cost, table.c_dp));
  }
  return out;
}

SingleStepResult train_singlestep(const Workload& workload, int fold, const SingleStepConfig& config,
                                  const SingleStepProgress& progress, std::size_t log_every) {
  config.validate();
  if (fold < 0 || fold >= static_cast<int>(kNumFolds)) throw ContractError("fold must lie in 0..9");
  for (const auto& q : workload.queries)
    if (q.size() != config.n_relations)
      throw ContractError("single-step training needs every query to have " + std::to_string(config.n_relations) +
                          " relations");
  const auto pool = workload.training_indices(fold);
  if (pool.empty()) throw ContractError("single-step training: training folds are empty");
  if (log_every == 0) log_every = 1;

  SingleStepResult result{SingleStepModel(config, config.seed), {}, workload.fold_indices(fold), {}};
  std::unordered_map<std::size_t, OrderTable> tables;
  Adam adam(result.model.params().size(), AdamOptions{config.learning_rate});
  Rng rng(mix_seed(config.seed, 0x55e0 + static_cast<std::uint64_t>(fold)));
  double window = 0.0;
  std::size_t in_window = 0;
  for (std::size_t step = 0; step < config.budget; ++step) {
    const auto qi = pool[rng.index(pool.size())];
    auto it = tables.find(qi);
    if (it == tables.end()) it = tables.emplace(qi, enumerate_orders(workload.queries[qi], workload.catalog)).first;
    const auto& q = workload.queries[qi];
    window += singlestep_loss(result.model, q, it->second);
    ++in_window;
    const auto grad = singlestep_gradient(result.model, q, it->second);
    adam.step(result.model.params(), grad);
    if ((step + 1) % log_every == 0 || step + 1 == config.budget) {
      result.loss_curve.push_back(window / static_cast<double>(in_window));
      if (progress) progress(step + 1, result.loss_curve.back());
      window = 0.0;
      in_window = 0;
    }
  }
  result.test_relative_costs = evaluate_singlestep(result.model, workload, result.test_queries);
  return result;
}

Checkpoint make_checkpoint(const SingleStepModel& model, std::uint64_t seed, std::uint64_t step) {
  const auto& c = model.config();
  Checkpoint ck;
  ck.kind = "singlestep";
  ck.settings = {{"n_relations", static_cast<double>(c.n_relations)},
                 {"use_dru", c.use_dru ? 1.0 : 0.0},
                 {"dru_repetitions", static_cast<double>(c.dru_repetitions)},
                 {"extra_layers", static_cast<double>(c.extra_layers)},
                 {"learning_rate", c.learning_rate}};
  ck.blocks.push_back({"singlestep.circuit", to_string(ParamGroup::kQuantum),
                       std::vector<double>(model.params().begin(), model.params().end())});
  ck.seed = seed;
  ck.step = step;
  return ck;
}

SingleStepModel restore_singlestep(const Checkpoint& ck) {
  if (ck.kind != "singlestep") throw ContractError("checkpoint kind '" + ck.kind + "' is not a single-step model");
  auto get = [&](const char* key) {
    auto it = ck.settings.find(key);
    if (it == ck.settings.end()) throw ParseError(std::string("checkpoint setting '") + key + "' missing");
    return it->second;
  };
  SingleStepConfig c;
  c.n_relations = static_cast<std::size_t>(get("n_relations"));
  c.use_dru = get("use_dru") != 0.0;
  c.dru_repetitions = static_cast<std::size_t>(get("dru_repetitions"));
  c.extra_layers = static_cast<std::size_t>(get("extra_layers"));
  c.learning_rate = get("learning_rate");
  SingleStepModel model(c, ck.seed);
  if (ck.blocks.size() != 1 || ck.blocks[0].values.size() != model.params().size())
    throw ParseError("single-step checkpoint parameter block has the wrong size");
  std::copy(ck.blocks[0].values.begin(), ck.blocks[0].values.end(), model.params().begin());
  return model;
}

}  // namespace qrljo
