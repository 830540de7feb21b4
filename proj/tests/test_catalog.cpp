#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <queue>
#include <map>
#include <set>

#include "qrljo/catalog.hpp"
#include "qrljo/errors.hpp"
#include "qrljo/random.hpp"

using namespace qrljo;

TEST(Catalog, GenerationIsDeterministic) {
  EXPECT_EQ(generate_catalog(7, 10, 5), generate_catalog(7, 10, 5));
  EXPECT_NE(generate_catalog(7, 10, 5).join_edges().front().selectivity,
            generate_catalog(8, 10, 5).join_edges().front().selectivity);
}

TEST(Catalog, RangesHold) {
  const auto c = generate_catalog(3, 40, 5);
  for (const auto& t : c.tables()) {
    EXPECT_GE(t.cardinality, 100);
    EXPECT_LE(t.cardinality, 1000000);
    EXPECT_GE(t.attributes.size(), 1u);
    EXPECT_LE(t.attributes.size(), 5u);
  }
  for (const auto& e : c.join_edges()) {
    EXPECT_GE(e.selectivity, 1e-4);
    EXPECT_LE(e.selectivity, 1.0);
  }
  EXPECT_EQ(c.join_edges().size(), 40u * 39u / 2u);
}

TEST(Catalog, MinimalCatalog) {
  const auto c = generate_catalog(1, 2, 1);
  EXPECT_EQ(c.num_tables(), 2u);
  EXPECT_EQ(c.join_edges().size(), 1u);
  EXPECT_THROW(generate_catalog(1, 1, 1), ContractError);
}

TEST(Catalog, SelfJoinIsKeyJoin) {
  Catalog c({{"A", 250, {"a_c0"}}, {"B", 10, {"b_c0"}}});
  EXPECT_DOUBLE_EQ(c.join_selectivity(0, 0), 1.0 / 250.0);
  EXPECT_DOUBLE_EQ(c.join_selectivity(1, 0), 1.0);  // no explicit entry: Cartesian
  c.set_join_selectivity(1, 0, 0.5);
  EXPECT_DOUBLE_EQ(c.join_selectivity(0, 1), 0.5);
  EXPECT_THROW(c.set_join_selectivity(0, 1, 0.0), ContractError);
}

namespace {
bool bfs_connected(const Query& q) {
  std::vector<bool> seen(q.size(), false);
  std::queue<std::size_t> todo;
  todo.push(0);
  seen[0] = true;
  while (!todo.empty()) {
    auto k = todo.front();
    todo.pop();
    for (std::size_t l = 0; l < q.size(); ++l)
      if (q.has_edge(k, l) && !seen[l]) {
        seen[l] = true;
        todo.push(l);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}
}  // namespace

TEST(Query, GeneratedQueriesAreConnectedAndSymmetric) {
  const auto c = generate_catalog(11, 6, 4);
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto n = 2 + s % 7;
    const auto q = generate_query(s, c, n);
    ASSERT_EQ(q.size(), n);
    EXPECT_TRUE(bfs_connected(q));
    EXPECT_TRUE(q.is_connected());
    EXPECT_GE(q.edges().size(), n - 1);
    std::map<std::size_t, int> uses;
    std::set<std::string> aliases;
    for (std::size_t k = 0; k < n; ++k) {
      ++uses[q.relation(k).table_index];
      aliases.insert(q.relation(k).alias);
      EXPECT_GT(q.selection_selectivity(k), 0.0);
      EXPECT_LE(q.selection_selectivity(k), 1.0);
      if (q.selection_selectivity(k) < 1.0) {
        EXPECT_GE(q.selection_selectivity(k), 0.05);
        EXPECT_FALSE(q.selected_attributes(k).empty());
      }
      for (std::size_t l = 0; l < n; ++l) EXPECT_EQ(q.has_edge(k, l), q.has_edge(l, k));
    }
    EXPECT_EQ(aliases.size(), n);
    for (auto [t, u] : uses) EXPECT_LE(u, 2);
  }
}

TEST(Query, TwoRelationsHaveOneEdge) {
  const auto c = generate_catalog(1, 10, 5);
  EXPECT_EQ(generate_query(3, c, 2).edges().size(), 1u);
  const auto q4 = generate_query(3, c, 4);
  EXPECT_EQ(q4.size(), 4u);
  EXPECT_GE(q4.edges().size(), 3u);
  EXPECT_THROW(generate_query(3, c, 1), ContractError);
  EXPECT_THROW(generate_query(3, c, 21), ContractError);
}

TEST(Query, FilterAndRepeatRatesFollowOptions) {
  const auto c = generate_catalog(5, 12, 5);
  int filtered = 0, total = 0, extra = 0, extra_slots = 0, repeats = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const auto q = generate_query(s, c, 5);
    std::set<std::size_t> tabs;
    for (std::size_t k = 0; k < q.size(); ++k) {
      filtered += q.selection_selectivity(k) < 1.0;
      ++total;
      tabs.insert(q.relation(k).table_index);
    }
    repeats += static_cast<int>(q.size() - tabs.size());
    extra += static_cast<int>(q.edges().size()) - 4;
    extra_slots += 10 - 4;
  }
  EXPECT_NEAR(static_cast<double>(filtered) / total, 0.5, 0.02);
  EXPECT_NEAR(static_cast<double>(extra) / extra_slots, 0.3, 0.02);
  // Four draws per query can repeat; each with probability ~0.1.
  EXPECT_NEAR(static_cast<double>(repeats) / (2000.0 * 4.0), 0.1, 0.02);
}

TEST(Workload, FoldsAreBalanced) {
  const auto c = generate_catalog(1, 10, 5);
  const auto w = make_workload(9, c, 500, 4);
  std::vector<int> sizes(kNumFolds, 0);
  for (int f : w.folds) ++sizes[static_cast<std::size_t>(f)];
  for (int s : sizes) EXPECT_EQ(s, 50);
  const auto w2 = make_workload(9, c, 23, 4);
  std::vector<int> s2(kNumFolds, 0);
  for (int f : w2.folds) ++s2[static_cast<std::size_t>(f)];
  EXPECT_LE(*std::max_element(s2.begin(), s2.end()) - *std::min_element(s2.begin(), s2.end()), 1);
  const auto w10 = make_workload(9, c, 10, 3);
  for (int f = 0; f < 10; ++f) EXPECT_EQ(w10.fold_indices(f).size(), 1u);
  EXPECT_THROW(make_workload(9, c, 9, 3), ContractError);
  EXPECT_EQ(make_workload(9, c, 500, 4).folds, w.folds);
  // Fold and training indices partition the workload.
  const auto test = w.fold_indices(4), train = w.training_indices(4);
  EXPECT_EQ(test.size() + train.size(), 500u);
  std::set<std::size_t> all(test.begin(), test.end());
  all.insert(train.begin(), train.end());
  EXPECT_EQ(all.size(), 500u);
}

TEST(Workload, JsonRoundTrip) {
  const auto c = generate_catalog(2, 8, 4);
  const auto w = make_workload(4, c, 60, 5);
  EXPECT_EQ(workload_from_json(workload_to_json(w)), w);
  const auto path = std::filesystem::temp_directory_path() / "qrljo_wl_roundtrip.json";
  save_workload(w, path);
  EXPECT_EQ(load_workload(path), w);
  std::filesystem::remove(path);
}

TEST(Workload, MalformedInputsAreRejected) {
  const auto c = generate_catalog(2, 4, 2);
  const auto text = workload_to_json(make_workload(4, c, 10, 3));
  EXPECT_THROW(workload_from_json(text.substr(0, text.size() / 2)), ParseError);
  auto v99 = text;
  v99.replace(v99.find("\"v1\""), 4, "\"v99\"");
  EXPECT_THROW(workload_from_json(v99), IncompatibleVersionError);
  auto renamed = text;
  renamed.replace(renamed.find("\"edges\""), 7, "\"edgez\"");
  try {
    workload_from_json(renamed);
    ADD_FAILURE() << "missing field accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("edges"), std::string::npos) << e.what();
  }
}
