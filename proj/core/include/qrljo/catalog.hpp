#ifndef QRLJO_CATALOG_HPP_
#define QRLJO_CATALOG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace qrljo {

struct Table {
  std::string name;
  std::int64_t cardinality = 1;
  std::vector<std::string> attributes;

  bool operator==(const Table&) const = default;
};

// Synthetic database schema. Join selectivities are kept for unordered pairs
// of distinct tables; pairs without an entry join as a Cartesian product.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<Table> tables);

  std::size_t num_tables() const { return tables_.size(); }
  const Table& table(std::size_t i) const { return tables_.at(i); }
  const std::vector<Table>& tables() const { return tables_; }
  std::size_t num_attributes() const;

  // Selectivity of the join predicate between tables i and j. A self-join
  // (two aliases of one table) is modeled as a key join with 1/|table|.
  double join_selectivity(std::size_t i, std::size_t j) const;
  bool has_join_selectivity(std::size_t i, std::size_t j) const;
  void set_join_selectivity(std::size_t i, std::size_t j, double s);

  // Explicit (i < j, s) entries in row-major order.
  struct Edge {
    std::size_t i;
    std::size_t j;
    double selectivity;
  };
  std::vector<Edge> join_edges() const;

  bool operator==(const Catalog&) const = default;

 private:
  std::size_t pair_index(std::size_t i, std::size_t j) const;

  std::vector<Table> tables_;
  // Upper triangle; 0 marks "no explicit entry".
  std::vector<double> selectivity_;
};

struct Relation {
  std::string alias;
  std::size_t table_index = 0;

  bool operator==(const Relation&) const = default;
};

// A join query over relations (aliases of catalog tables).
class Query {
 public:
  Query() = default;
  Query(std::vector<Relation> relations, std::vector<double> selection_selectivity,
        std::vector<std::vector<std::size_t>> selected_attributes);

  std::size_t size() const { return relations_.size(); }
  const std::vector<Relation>& relations() const { return relations_; }
  const Relation& relation(std::size_t i) const { return relations_.at(i); }

  void add_edge(std::size_t k, std::size_t l);
  bool has_edge(std::size_t k, std::size_t l) const { return adjacency_[k * size() + l] != 0; }
  // Bitmask of neighbours of relation k.
  std::uint32_t neighbours(std::size_t k) const { return neighbour_mask_[k]; }
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  double selection_selectivity(std::size_t k) const { return selection_selectivity_.at(k); }
  const std::vector<double>& selection_selectivities() const { return selection_selectivity_; }
  const std::vector<std::size_t>& selected_attributes(std::size_t k) const {
    return selected_attributes_.at(k);
  }

  bool is_connected() const;

  bool operator==(const Query&) const = default;

 private:
  std::vector<Relation> relations_;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::uint32_t> neighbour_mask_;
  std::vector<double> selection_selectivity_;
  std::vector<std::vector<std::size_t>> selected_attributes_;
};

inline constexpr std::size_t kNumFolds = 10;
inline constexpr std::size_t kMaxQueryRelations = 32;

struct Workload {
  Catalog catalog;
  std::vector<Query> queries;
  std::vector<int> folds;

  std::vector<std::size_t> fold_indices(int fold) const;
  // Every query outside `fold`.
  std::vector<std::size_t> training_indices(int fold) const;

  bool operator==(const Workload&) const = default;
};

struct QueryOptions {
  double extra_edge_probability = 0.3;
  double filter_probability = 0.5;
  double min_filter_selectivity = 0.05;
  // Probability that a relation re-uses an already chosen table under a new alias.
  double alias_repeat_probability = 0.1;
};

Catalog generate_catalog(std::uint64_t seed, std::size_t num_tables, std::size_t max_attributes);

Query generate_query(std::uint64_t seed, const Catalog& catalog, std::size_t n_relations,
                     const QueryOptions& options = {});

Workload make_workload(std::uint64_t seed, const Catalog& catalog, std::size_t count,
                       std::size_t n_relations, const QueryOptions& options = {});

inline constexpr const char* kWorkloadVersion = "v1";

void save_workload(const Workload& workload, const std::filesystem::path& path);
Workload load_workload(const std::filesystem::path& path);
std::string workload_to_json(const Workload& workload);
Workload workload_from_json(const std::string& text);

}  // namespace qrljo

#endif  // QRLJO_CATALOG_HPP_
