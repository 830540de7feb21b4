#ifndef QRLJO_TESTS_SUPPORT_HPP_
#define QRLJO_TESTS_SUPPORT_HPP_

#include <cmath>
#include <vector>

#include "qrljo/catalog.hpp"
#include "qrljo/jointree.hpp"

namespace qrljo::testing {

// A(10) - B(20) - C(30), sel(AB) = 0.1, sel(BC) = 0.01, no filters.
struct Chain3 {
  Catalog catalog;
  Query query;

  Chain3() {
    catalog = Catalog({{"A", 10, {"a_c0"}}, {"B", 20, {"b_c0"}}, {"C", 30, {"c_c0"}}});
    catalog.set_join_selectivity(0, 1, 0.1);
    catalog.set_join_selectivity(1, 2, 0.01);
    query = Query({{"A", 0}, {"B", 1}, {"C", 2}}, {1.0, 1.0, 1.0}, {{}, {}, {}});
    query.add_edge(0, 1);
    query.add_edge(1, 2);
  }
};

// 4-relation clique over four tables.
inline Query clique4() {
  Query q({{"A", 0}, {"B", 1}, {"C", 2}, {"D", 3}}, {1.0, 1.0, 1.0, 1.0}, {{}, {}, {}, {}});
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) q.add_edge(a, b);
  return q;
}

inline Catalog catalog4() {
  Catalog c({{"A", 100, {"a_c0"}}, {"B", 2000, {"b_c0"}}, {"C", 300, {"c_c0"}}, {"D", 40000, {"d_c0"}}});
  c.set_join_selectivity(0, 1, 0.01);
  c.set_join_selectivity(0, 2, 0.2);
  c.set_join_selectivity(0, 3, 0.001);
  c.set_join_selectivity(1, 2, 0.05);
  c.set_join_selectivity(1, 3, 0.0005);
  c.set_join_selectivity(2, 3, 0.3);
  return c;
}

// Cost by brute recursion with an independent cardinality formula.
inline double oracle_card(RelSet set, const Query& q, const Catalog& c) {
  double card = 1.0;
  for (std::size_t k = 0; k < q.size(); ++k)
    if (set >> k & 1u)
      card *= static_cast<double>(c.table(q.relation(k).table_index).cardinality) * q.selection_selectivity(k);
  for (auto [k, l] : q.edges())
    if ((set >> k & 1u) && (set >> l & 1u))
      card *= c.join_selectivity(q.relation(k).table_index, q.relation(l).table_index);
  return card;
}

inline double oracle_cost(const JoinTree& t, const Query& q, const Catalog& c) {
  if (t.is_leaf()) return 0.0;
  return oracle_card(t.leaf_set(), q, c) + oracle_cost(t.left(), q, c) + oracle_cost(t.right(), q, c);
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace qrljo::testing

#endif  // QRLJO_TESTS_SUPPORT_HPP_
