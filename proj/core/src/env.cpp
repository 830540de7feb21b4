#include "qrljo/env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "json.hpp"
#include "qrljo/errors.hpp"

namespace qrljo {

const char* to_string(Encoding e) { return e == Encoding::kReduced ? "reduced" : "baseline"; }

BaselineLayout BaselineLayout::from_catalog(const Catalog& catalog, std::size_t alias_repeats) {
  if (alias_repeats < 1) throw ContractError("alias_repeats must be >= 1");
  BaselineLayout l;
  l.num_tables = catalog.num_tables();
  l.alias_repeats = alias_repeats;
  l.num_aliases = l.num_tables * alias_repeats;
  l.attribute_offset.resize(l.num_aliases);
  std::size_t offset = 0;
  for (std::size_t rep = 0; rep < alias_repeats; ++rep) {
    for (std::size_t t = 0; t < l.num_tables; ++t) {
      l.attribute_offset[t + rep * l.num_tables] = offset;
      offset += catalog.table(t).attributes.size();
    }
  }
  l.num_attributes = offset;
  return l;
}

std::size_t action_index(Action a, std::size_t n_max) {
  if (a.left >= n_max || a.right >= n_max || a.left == a.right) throw ContractError("malformed action");
  return a.left * (n_max - 1) + (a.right < a.left ? a.right : a.right - 1);
}

Action action_from_index(std::size_t index, std::size_t n_max) {
  if (index >= action_count(n_max)) throw ContractError("action index out of range");
  Action a;
  a.left = index / (n_max - 1);
  const auto r = index % (n_max - 1);
  a.right = r < a.left ? r : r + 1;
  return a;
}

std::size_t ActionMask::count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

double EpisodeState::forest_cost() const {
  double total = 0.0;
  for (std::size_t k = 0; k < slots_.size(); ++k)
    if (slots_[k]) total += slot_costs_[k];
  return total;
}

std::size_t EpisodeState::num_nonempty() const {
  return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); }));
}

const JoinTree& EpisodeState::final_tree() const {
  if (!done()) throw ContractError("final_tree() before the episode finished");
  for (const auto& s : slots_)
    if (s) return *s;
  throw ContractError("empty forest");
}

double clipped_reward(double cost_delta, double c_dp, std::size_t n) {
  if (!(c_dp > 0.0)) throw ContractError("C_DP must be positive");
  if (n < 2) throw ContractError("reward needs at least two relations");
  const double cap = static_cast<double>(n - 1);
  return (-std::min(cost_delta / c_dp, cap) + 2.0) / cap;
}

double relative_cost(double plan_cost, double c_dp) {
  if (!(c_dp > 0.0)) throw ContractError("C_DP must be positive");
  return plan_cost / c_dp;
}

JoinOrderEnv::JoinOrderEnv(const Catalog& catalog, EnvOptions options)
    : catalog_(&catalog), options_(options) {
  if (options_.n_max < 2) throw ContractError("n_max must be >= 2");
  if (options_.n_max > kMaxQueryRelations) throw ContractError("n_max must be <= 32");
  layout_ = BaselineLayout::from_catalog(catalog, options_.alias_repeats);
}

std::size_t JoinOrderEnv::observation_size() const {
  return options_.encoding == Encoding::kReduced ? reduced_length(options_.n_max) : layout_.length();
}

EpisodeState JoinOrderEnv::reset(const Query& query, std::optional<double> c_dp) const {
  const auto n = query.size();
  if (n < 2) throw ContractError("query needs at least two relations");
  if (n > options_.n_max)
    throw ContractError("query has " + std::to_string(n) + " relations, n_max is " + std::to_string(options_.n_max));
  EpisodeState s;
  s.query_ = &query;
  s.catalog_ = catalog_;
  s.slots_.resize(options_.n_max);
  s.slot_costs_.assign(options_.n_max, 0.0);
  for (std::size_t k = 0; k < n; ++k) s.slots_[k] = JoinTree::leaf(k);
  s.c_dp_ = c_dp ? *c_dp : dp_optimal(query, *catalog_).cost;
  if (!(s.c_dp_ > 0.0)) throw ContractError("C_DP must be positive");
  return s;
}

Observation JoinOrderEnv::observe(const EpisodeState& state) const {
  return options_.encoding == Encoding::kReduced ? encode_reduced(state) : encode_baseline(state);
}

namespace {

// 2^-depth for every leaf of `tree`, written into `row` (indexed by relation).
template <typename Index>
void write_tree_row(const JoinTree& tree, std::size_t n, double* row, Index column) {
  const auto depths = tree.leaf_depths(n);
  for (std::size_t i = 0; i < n; ++i)
    if (depths[i] >= 0) row[column(i)] = std::ldexp(1.0, -depths[i]);
}

}  // namespace

Observation JoinOrderEnv::encode_reduced(const EpisodeState& state) const {
  const auto n_max = options_.n_max;
  const auto& q = state.query();
  const auto n = q.size();
  Observation obs{std::vector<double>(reduced_length(n_max), 0.0), Encoding::kReduced};
  double* idx = obs.features.data();
  double* sel = idx + n_max;
  double* tree = sel + n_max;
  double* graph = tree + n_max * n_max;
  const double r_minus_1 = static_cast<double>(catalog_->num_tables() - 1);
  for (std::size_t k = 0; k < n; ++k) {
    idx[k] = r_minus_1 > 0 ? static_cast<double>(q.relation(k).table_index) / r_minus_1 : 0.0;
    sel[k] = q.selection_selectivity(k);
    for (std::size_t l = 0; l < n; ++l) graph[k * n_max + l] = q.has_edge(k, l) ? 1.0 : 0.0;
  }
  for (std::size_t k = 0; k < n_max; ++k) {
    if (!state.slot(k)) continue;
    write_tree_row(*state.slot(k), n, tree + k * n_max, [](std::size_t i) { return i; });
  }
  return obs;
}

Observation JoinOrderEnv::encode_baseline(const EpisodeState& state) const {
  const auto& q = state.query();
  const auto n = q.size();
  const auto r = layout_.num_aliases;
  Observation obs{std::vector<double>(layout_.length(), 0.0), Encoding::kBaseline};

  // Map query relations onto the alias universe.
  std::vector<std::size_t> alias(n);
  std::vector<std::size_t> seen(layout_.num_tables, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto t = q.relation(k).table_index;
    const auto occurrence = seen[t]++;
    if (occurrence >= layout_.alias_repeats)
      throw ContractError("query uses table " + std::to_string(t) + " more often than the alias universe allows");
    alias[k] = t + occurrence * layout_.num_tables;
  }

  double* graph = obs.features.data();
  double* preds = graph + r * r;
  double* tree = preds + layout_.num_attributes;
  for (auto [k, l] : q.edges()) {
    graph[alias[k] * r + alias[l]] = 1.0;
    graph[alias[l] * r + alias[k]] = 1.0;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (auto a : q.selected_attributes(k)) preds[layout_.attribute_offset[alias[k]] + a] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!state.slot(k)) continue;
    write_tree_row(*state.slot(k), n, tree + alias[k] * r, [&](std::size_t i) { return alias[i]; });
  }
  return obs;
}

ActionMask JoinOrderEnv::action_mask(const EpisodeState& state) const {
  if (state.done()) throw ContractError("action_mask on a terminal state");
  const auto n_max = options_.n_max;
  ActionMask mask{std::vector<std::uint8_t>(action_count(n_max), 0)};
  const auto& q = state.query();
  // Neighbourhood of each slot's subtree.
  std::vector<RelSet> reach(n_max, 0);
  for (std::size_t k = 0; k < n_max; ++k) {
    if (!state.slot(k)) continue;
    for (RelSet s = state.slot(k)->leaf_set(); s; s &= s - 1)
      reach[k] |= q.neighbours(static_cast<std::size_t>(std::countr_zero(s)));
  }
  for (std::size_t k = 0; k < n_max; ++k) {
    if (!state.slot(k)) continue;
    for (std::size_t l = 0; l < n_max; ++l) {
      if (l == k || !state.slot(l)) continue;
      if (reach[k] & state.slot(l)->leaf_set()) mask.valid[action_index({k, l}, n_max)] = 1;
    }
  }
  return mask;
}

StepResult JoinOrderEnv::step(const EpisodeState& state, Action action) const {
  if (state.done()) throw ContractError("step on a terminal state");
  const auto mask = action_mask(state);
  if (!mask[action_index(action, options_.n_max)])
    throw ContractError("invalid action (" + std::to_string(action.left) + "," + std::to_string(action.right) +
                        "): mask the policy before sampling");
  StepResult out{state, 0.0, 0.0, false};
  auto& s = out.state;
  const auto& left = *state.slot(action.left);
  const auto& right = *state.slot(action.right);
  auto joined = JoinTree::join(left, right);
  const double card = cardinality(joined.leaf_set(), state.query(), state.catalog());
  const double left_cost = state.slot_cost(action.left);
  const double right_cost = state.slot_cost(action.right);
  // Same association as cost_out so the final slot cost equals C_out exactly.
  const double joined_cost = card + left_cost + right_cost;
  s.slots_[action.left] = std::move(joined);
  s.slot_costs_[action.left] = joined_cost;
  s.slots_[action.right].reset();
  s.slot_costs_[action.right] = 0.0;
  s.t_ += 1;
  // Forest cost difference between t and t-1 reduces to the new join's
  // cardinality; other slots are untouched.
  out.cost_delta = card;
  out.reward = clipped_reward(card, state.c_dp(), state.num_relations());
  out.done = s.done();
  return out;
}

void write_trajectory_jsonl(std::ostream& out, const TrajectoryRecord& rec, std::size_t n_max) {
  nlohmann::json j;
  j["episode"] = rec.episode;
  j["step"] = rec.step;
  j["layout"] = to_string(rec.observation.layout);
  j["observation"] = rec.observation.features;
  std::string bits;
  for (auto b : rec.mask.valid) bits.push_back(b ? '1' : '0');
  j["mask"] = bits;
  j["action"] = {rec.action.left, rec.action.right};
  j["action_index"] = action_index(rec.action, n_max);
  j["cost_delta"] = rec.cost_delta;
  j["reward"] = rec.reward;
  out << j.dump() << '\n';
}

}  // namespace qrljo
