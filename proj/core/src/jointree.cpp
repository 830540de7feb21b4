#include "qrljo/jointree.hpp"

#include <bit>
#include <limits>

#include "qrljo/errors.hpp"

namespace qrljo {

struct JoinTree::Node {
  int relation = -1;
  RelSet leaf_set = 0;
  JoinTree left_child{nullptr};
  JoinTree right_child{nullptr};
};

JoinTree JoinTree::leaf(std::size_t relation) {
  if (relation >= kMaxQueryRelations) throw ContractError("leaf relation index out of range");
  auto node = std::make_shared<Node>();
  node->relation = static_cast<int>(relation);
  node->leaf_set = singleton(relation);
  return JoinTree(std::move(node));
}

JoinTree JoinTree::join(const JoinTree& left, const JoinTree& right) {
  if (left.leaf_set() & right.leaf_set()) throw ContractError("join operands share relations");
  auto node = std::make_shared<Node>();
  node->leaf_set = left.leaf_set() | right.leaf_set();
  node->left_child = left;
  node->right_child = right;
  return JoinTree(std::move(node));
}

bool JoinTree::is_leaf() const { return node_->relation >= 0; }
RelSet JoinTree::leaf_set() const { return node_->leaf_set; }

std::size_t JoinTree::relation() const {
  if (!is_leaf()) throw ContractError("relation() on a join node");
  return static_cast<std::size_t>(node_->relation);
}

const JoinTree& JoinTree::left() const {
  if (is_leaf()) throw ContractError("left() on a leaf");
  return node_->left_child;
}

const JoinTree& JoinTree::right() const {
  if (is_leaf()) throw ContractError("right() on a leaf");
  return node_->right_child;
}

std::size_t JoinTree::num_leaves() const { return static_cast<std::size_t>(std::popcount(leaf_set())); }

namespace {

void collect_depths(const JoinTree& t, int depth, std::vector<int>& out) {
  if (t.is_leaf()) {
    if (t.relation() < out.size()) out[t.relation()] = depth;
    return;
  }
  collect_depths(t.left(), depth + 1, out);
  collect_depths(t.right(), depth + 1, out);
}

}  // namespace

std::vector<int> JoinTree::leaf_depths(std::size_t num_relations) const {
  std::vector<int> out(num_relations, -1);
  collect_depths(*this, 0, out);
  return out;
}

JoinTree JoinTree::canonical() const {
  if (is_leaf()) return *this;
  auto l = left().canonical();
  auto r = right().canonical();
  if (r.leaf_set() < l.leaf_set()) std::swap(l, r);
  return join(l, r);
}

std::string JoinTree::to_string(const Query& query) const {
  if (is_leaf()) return query.relation(relation()).alias;
  return "(" + left().to_string(query) + " ⋈ " + right().to_string(query) + ")";
}

bool JoinTree::operator==(const JoinTree& other) const {
  if (node_ == other.node_) return true;
  if (is_leaf() || other.is_leaf()) return is_leaf() && other.is_leaf() && relation() == other.relation();
  return leaf_set() == other.leaf_set() && left() == other.left() && right() == other.right();
}

// ---------------------------------------------------------------------------

double cardinality(RelSet set, const Query& query, const Catalog& catalog) {
  if (set == 0) throw ContractError("cardinality of an empty relation set");
  // Fixed evaluation order (leaves ascending, then edges ascending) so every
  // caller gets bit-identical values for the same set.
  double card = 1.0;
  for (RelSet s = set; s; s &= s - 1) {
    const auto k = static_cast<std::size_t>(std::countr_zero(s));
    const auto& rel = query.relation(k);
    card *= static_cast<double>(catalog.table(rel.table_index).cardinality) * query.selection_selectivity(k);
  }
  for (RelSet s = set; s; s &= s - 1) {
    const auto k = static_cast<std::size_t>(std::countr_zero(s));
    // Only neighbours with a higher index so each edge counts once.
    for (RelSet nb = query.neighbours(k) & set & ~((RelSet{2} << k) - 1); nb; nb &= nb - 1) {
      const auto l = static_cast<std::size_t>(std::countr_zero(nb));
      card *= catalog.join_selectivity(query.relation(k).table_index, query.relation(l).table_index);
    }
  }
  return card;
}

double cost_out(const JoinTree& tree, const Query& query, const Catalog& catalog) {
  if (tree.is_leaf()) return 0.0;
  return cardinality(tree.leaf_set(), query, catalog) + cost_out(tree.left(), query, catalog) +
         cost_out(tree.right(), query, catalog);
}

bool is_connected_subset(RelSet set, const Query& query) {
  if (set == 0) return false;
  RelSet seen = set & (~set + 1);
  RelSet frontier = seen;
  while (frontier) {
    RelSet next = 0;
    for (RelSet f = frontier; f; f &= f - 1) next |= query.neighbours(static_cast<std::size_t>(std::countr_zero(f)));
    next &= set;
    frontier = next & ~seen;
    seen |= next;
  }
  return seen == set;
}

PlanResult dp_optimal(const Query& query, const Catalog& catalog, bool allow_cross) {
  const auto n = query.size();
  if (n == 0) throw ContractError("dp_optimal on an empty query");
  if (n > 24) throw ContractError("dp_optimal supports at most 24 relations");
  const RelSet all = full_set(n);
  if (!allow_cross && !query.is_connected())
    throw NoPlanError("no cross-join-free plan: the join graph is disconnected");

  const std::size_t states = std::size_t{1} << n;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(states, kInf);
  std::vector<RelSet> split(states, 0);
  std::vector<std::uint8_t> connected(states, 0);

  for (std::size_t k = 0; k < n; ++k) best[singleton(k)] = 0.0;
  // Proper subsets of S are numerically smaller, so ascending order is a
  // valid DP schedule.
  for (RelSet s = 1; s <= all && s != 0; ++s) {
    connected[s] = allow_cross || is_connected_subset(s, query);
    if (std::popcount(s) < 2 || !connected[s]) continue;
    const double card = cardinality(s, query, catalog);
    // Enumerate left operands in ascending bitmask order; strict < keeps the
    // smallest one on ties.
    for (RelSet left = s & (~s + 1); left < s; left = ((left | ~s) + 1) & s) {
      const RelSet right = s & ~left;
      if (!connected[left] || !connected[right]) continue;
      if (best[left] == kInf || best[right] == kInf) continue;
      const double c = card + best[left] + best[right];
      if (c < best[s]) {
        best[s] = c;
        split[s] = left;
      }
    }
  }
  if (best[all] == kInf) throw NoPlanError("no cross-join-free plan found");

  auto build = [&](auto&& self, RelSet s) -> JoinTree {
    if (std::popcount(s) == 1) return JoinTree::leaf(static_cast<std::size_t>(std::countr_zero(s)));
    return JoinTree::join(self(self, split[s]), self(self, s & ~split[s]));
  };
  PlanResult out{build(build, all), best[all], cardinality(all, query, catalog)};
  return out;
}

std::vector<JoinTree> enumerate_bushy(const Query& query, bool allow_cross) {
  const auto n = query.size();
  if (n > kMaxEnumerateRelations)
    throw ContractError("enumerate_bushy refuses queries with more than 8 relations (" + std::to_string(n) + ")");
  if (n == 0) return {};
  const RelSet all = full_set(n);
  std::vector<std::vector<JoinTree>> memo(std::size_t{1} << n);
  std::vector<std::uint8_t> done(std::size_t{1} << n, 0);

  auto trees = [&](auto&& self, RelSet s) -> const std::vector<JoinTree>& {
    if (done[s]) return memo[s];
    done[s] = 1;
    auto& out = memo[s];
    if (std::popcount(s) == 1) {
      out.push_back(JoinTree::leaf(static_cast<std::size_t>(std::countr_zero(s))));
      return out;
    }
    for (RelSet left = s & (~s + 1); left < s; left = ((left | ~s) + 1) & s) {
      const RelSet right = s & ~left;
      if (!allow_cross) {
        bool crossing = false;
        for (RelSet l = left; l && !crossing; l &= l - 1)
          crossing = (query.neighbours(static_cast<std::size_t>(std::countr_zero(l))) & right) != 0;
        if (!crossing) continue;
      }
      const auto& lt = self(self, left);
      const auto& rt = self(self, right);
      for (const auto& a : lt)
        for (const auto& b : rt) out.push_back(JoinTree::join(a, b));
    }
    return out;
  };
  return trees(trees, all);
}

}  // namespace qrljo
