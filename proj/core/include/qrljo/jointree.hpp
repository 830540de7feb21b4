#ifndef QRLJO_JOINTREE_HPP_
#define QRLJO_JOINTREE_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qrljo/catalog.hpp"

namespace qrljo {

// Bitset over the relations of one query (bit k = relation k).
using RelSet = std::uint32_t;

inline constexpr RelSet singleton(std::size_t k) { return RelSet{1} << k; }
inline constexpr RelSet full_set(std::size_t n) { return n >= 32 ? ~RelSet{0} : (RelSet{1} << n) - 1; }

// Immutable binary join tree. Copies share structure.
class JoinTree {
 public:
  static JoinTree leaf(std::size_t relation);
  // Throws ContractError if the leaf sets overlap.
  static JoinTree join(const JoinTree& left, const JoinTree& right);

  bool is_leaf() const;
  std::size_t relation() const;
  const JoinTree& left() const;
  const JoinTree& right() const;
  RelSet leaf_set() const;
  std::size_t num_leaves() const;

  // Depth (edges from this root) of every leaf, indexed by relation.
  // Relations absent from the tree report -1.
  std::vector<int> leaf_depths(std::size_t num_relations) const;

  // Children sorted so that the left child holds the smaller leaf bitmask.
  JoinTree canonical() const;

  // "(a1 ⋈ (a2 ⋈ D))"
  std::string to_string(const Query& query) const;

  bool operator==(const JoinTree& other) const;

 private:
  struct Node;
  explicit JoinTree(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

struct PlanResult {
  JoinTree tree;
  double cost = 0.0;
  double cardinality = 0.0;
};

// Result size of joining the relations in `set` under the independence
// model: product of filtered base cardinalities times the selectivities of
// every join edge internal to the set. Shape-independent.
double cardinality(RelSet set, const Query& query, const Catalog& catalog);

// C_out: sum of cardinalities over all join nodes (0 for a leaf).
double cost_out(const JoinTree& tree, const Query& query, const Catalog& catalog);

// True when every relation of `set` is reachable from every other through
// join edges inside `set`.
bool is_connected_subset(RelSet set, const Query& query);

// Exact minimum-C_out bushy plan via subset dynamic programming. Ties go to
// the split with the smallest left bitmask. Throws NoPlanError when
// allow_cross is false and the query is disconnected.
PlanResult dp_optimal(const Query& query, const Catalog& catalog, bool allow_cross = false);

inline constexpr std::size_t kMaxEnumerateRelations = 8;

// Every distinct ordered binary tree over all query relations; with
// allow_cross=false, trees containing a join without a connecting edge are
// dropped. Refuses queries with more than 8 relations.
std::vector<JoinTree> enumerate_bushy(const Query& query, bool allow_cross);

}  // namespace qrljo

#endif  // QRLJO_JOINTREE_HPP_
