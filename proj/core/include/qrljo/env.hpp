#ifndef QRLJO_ENV_HPP_
#define QRLJO_ENV_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "qrljo/catalog.hpp"
#include "qrljo/jointree.hpp"

namespace qrljo {

enum class Encoding { kReduced, kBaseline };

const char* to_string(Encoding e);

// Feature vector fed to the actor/critic. Every entry lies in [0, 1].
struct Observation {
  std::vector<double> features;
  Encoding layout = Encoding::kReduced;
};

// Alias universe for the baseline encoding. Every catalog table owns
// `alias_repeats` alias slots (the k-th alias of table t maps to
// t + k * num_tables), so r = tables * repeats and a = attributes * repeats.
struct BaselineLayout {
  std::size_t num_tables = 0;
  std::size_t alias_repeats = 1;
  std::size_t num_aliases = 0;
  std::size_t num_attributes = 0;
  std::vector<std::size_t> attribute_offset;  // per alias

  static BaselineLayout from_catalog(const Catalog& catalog, std::size_t alias_repeats);
  // a + 2 r^2
  std::size_t length() const { return num_attributes + 2 * num_aliases * num_aliases; }
};

inline constexpr std::size_t baseline_length(std::size_t a, std::size_t r) { return a + 2 * r * r; }
inline constexpr std::size_t reduced_length(std::size_t n_max) { return 2 * (n_max * n_max + n_max); }

// Ordered pair of forest slots; the result lands in `left`'s slot.
struct Action {
  std::size_t left = 0;
  std::size_t right = 0;
  bool operator==(const Action&) const = default;
};

inline constexpr std::size_t action_count(std::size_t n_max) { return n_max * (n_max - 1); }
std::size_t action_index(Action a, std::size_t n_max);
Action action_from_index(std::size_t index, std::size_t n_max);

struct ActionMask {
  std::vector<std::uint8_t> valid;  // length n_max (n_max - 1)

  std::size_t count() const;
  bool operator[](std::size_t i) const { return valid[i] != 0; }
  std::size_t size() const { return valid.size(); }
};

// One episode's state: a forest of subtrees in n_max slots. Holds
// non-owning pointers to the query and catalog, which must outlive it.
class EpisodeState {
 public:
  const Query& query() const { return *query_; }
  const Catalog& catalog() const { return *catalog_; }
  std::size_t n_max() const { return slots_.size(); }
  std::size_t num_relations() const { return query_->size(); }
  std::size_t step_count() const { return t_; }
  double c_dp() const { return c_dp_; }

  const std::optional<JoinTree>& slot(std::size_t k) const { return slots_.at(k); }
  double slot_cost(std::size_t k) const { return slot_costs_.at(k); }
  // Sum of C_out over the current forest.
  double forest_cost() const;
  std::size_t num_nonempty() const;
  bool done() const { return t_ + 1 == query_->size(); }
  // The complete plan; only valid once done().
  const JoinTree& final_tree() const;

 private:
  friend class JoinOrderEnv;
  const Query* query_ = nullptr;
  const Catalog* catalog_ = nullptr;
  std::vector<std::optional<JoinTree>> slots_;
  std::vector<double> slot_costs_;
  std::size_t t_ = 0;
  double c_dp_ = 0.0;
};

struct EnvOptions {
  std::size_t n_max = 4;
  Encoding encoding = Encoding::kReduced;
  // Only used by the baseline encoding.
  std::size_t alias_repeats = 2;
};

struct StepResult {
  EpisodeState state;
  double reward = 0.0;
  double cost_delta = 0.0;  // C_t
  bool done = false;
};

// R_t = (1/(n-1)) [ -min(C_t / C_DP, n-1) + 2 ]
double clipped_reward(double cost_delta, double c_dp, std::size_t n);

// Plan cost over the optimal cost; 1.0 means optimal.
double relative_cost(double plan_cost, double c_dp);

// The join-order MDP over one catalog.
class JoinOrderEnv {
 public:
  JoinOrderEnv(const Catalog& catalog, EnvOptions options);

  const EnvOptions& options() const { return options_; }
  const BaselineLayout& baseline_layout() const { return layout_; }
  std::size_t observation_size() const;
  std::size_t num_actions() const { return action_count(options_.n_max); }

  // Starts an episode: slot i holds Leaf(i). C_DP comes from dp_optimal
  // unless supplied.
  EpisodeState reset(const Query& query, std::optional<double> c_dp = std::nullopt) const;

  Observation observe(const EpisodeState& state) const;
  Observation encode_baseline(const EpisodeState& state) const;
  Observation encode_reduced(const EpisodeState& state) const;

  // (k,l) is valid iff both slots hold a subtree, k != l, and a join edge
  // connects the two subtrees. Throws on terminal states.
  ActionMask action_mask(const EpisodeState& state) const;

  // Throws ContractError if the action is masked.
  StepResult step(const EpisodeState& state, Action action) const;

 private:
  const Catalog* catalog_;
  EnvOptions options_;
  BaselineLayout layout_;
};

// One line of a trajectory dump.
struct TrajectoryRecord {
  std::size_t episode = 0;
  std::size_t step = 0;
  Observation observation;
  ActionMask mask;
  Action action;
  double cost_delta = 0.0;
  double reward = 0.0;
};

// JSON lines, one record per step.
void write_trajectory_jsonl(std::ostream& out, const TrajectoryRecord& record, std::size_t n_max);

}  // namespace qrljo

#endif  // QRLJO_ENV_HPP_
