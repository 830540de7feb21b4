#include "qrljo/catalog.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qrljo/errors.hpp"
#include "qrljo/random.hpp"

namespace qrljo {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Catalog

Catalog::Catalog(std::vector<Table> tables) : tables_(std::move(tables)) {
  for (const auto& t : tables_) {
    if (t.cardinality < 1) throw ContractError("table '" + t.name + "' has cardinality < 1");
  }
  selectivity_.assign(tables_.size() * tables_.size(), 0.0);
}

std::size_t Catalog::num_attributes() const {
  std::size_t a = 0;
  for (const auto& t : tables_) a += t.attributes.size();
  return a;
}

std::size_t Catalog::pair_index(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  return i * tables_.size() + j;
}

double Catalog::join_selectivity(std::size_t i, std::size_t j) const {
  if (i == j) return 1.0 / static_cast<double>(tables_.at(i).cardinality);
  const double s = selectivity_.at(pair_index(i, j));
  return s > 0.0 ? s : 1.0;
}

bool Catalog::has_join_selectivity(std::size_t i, std::size_t j) const {
  return i != j && selectivity_.at(pair_index(i, j)) > 0.0;
}

void Catalog::set_join_selectivity(std::size_t i, std::size_t j, double s) {
  if (i == j || i >= tables_.size() || j >= tables_.size())
    throw ContractError("join selectivity needs two distinct table indices");
  if (!(s > 0.0 && s <= 1.0)) throw ContractError("join selectivity must lie in (0, 1]");
  selectivity_[pair_index(i, j)] = s;
}

std::vector<Catalog::Edge> Catalog::join_edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < tables_.size(); ++i)
    for (std::size_t j = i + 1; j < tables_.size(); ++j)
      if (selectivity_[i * tables_.size() + j] > 0.0)
        out.push_back({i, j, selectivity_[i * tables_.size() + j]});
  return out;
}

// ---------------------------------------------------------------------------
// Query

Query::Query(std::vector<Relation> relations, std::vector<double> selection_selectivity,
             std::vector<std::vector<std::size_t>> selected_attributes)
    : relations_(std::move(relations)),
      adjacency_(relations_.size() * relations_.size(), 0),
      neighbour_mask_(relations_.size(), 0),
      selection_selectivity_(std::move(selection_selectivity)),
      selected_attributes_(std::move(selected_attributes)) {
  const auto n = relations_.size();
  if (n > kMaxQueryRelations) throw ContractError("query exceeds 32 relations");
  if (selection_selectivity_.size() != n || selected_attributes_.size() != n)
    throw ContractError("per-relation vectors must match the relation count");
  for (double s : selection_selectivity_)
    if (!(s > 0.0 && s <= 1.0)) throw ContractError("selection selectivity must lie in (0, 1]");
}

void Query::add_edge(std::size_t k, std::size_t l) {
  const auto n = size();
  if (k >= n || l >= n || k == l) throw ContractError("join edge needs two distinct relations");
  adjacency_[k * n + l] = 1;
  adjacency_[l * n + k] = 1;
  neighbour_mask_[k] |= 1u << l;
  neighbour_mask_[l] |= 1u << k;
}

std::vector<std::pair<std::size_t, std::size_t>> Query::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < size(); ++k)
    for (std::size_t l = k + 1; l < size(); ++l)
      if (has_edge(k, l)) out.emplace_back(k, l);
  return out;
}

bool Query::is_connected() const {
  if (size() == 0) return false;
  const std::uint32_t all = size() == 32 ? ~0u : ((1u << size()) - 1);
  std::uint32_t seen = 1, frontier = 1;
  while (frontier) {
    std::uint32_t next = 0;
    for (std::uint32_t f = frontier; f; f &= f - 1) next |= neighbour_mask_[std::countr_zero(f)];
    frontier = next & ~seen;
    seen |= next;
  }
  return seen == all;
}

// ---------------------------------------------------------------------------
// Workload

std::vector<std::size_t> Workload::fold_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.size(); ++i)
    if (folds[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> Workload::training_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.size(); ++i)
    if (folds[i] != fold) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Generators

namespace {

std::string table_name(std::size_t i) {
  if (i < 26) return std::string(1, static_cast<char>('A' + i));
  return "T" + std::to_string(i);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Catalog generate_catalog(std::uint64_t seed, std::size_t num_tables, std::size_t max_attributes) {
  if (num_tables < 2) throw ContractError("generate_catalog: num_tables must be >= 2");
  if (max_attributes < 1) throw ContractError("generate_catalog: max_attributes must be >= 1");
  Rng rng(mix_seed(seed, 0xca7a));
  std::vector<Table> tables(num_tables);
  for (std::size_t i = 0; i < num_tables; ++i) {
    tables[i].name = table_name(i);
    tables[i].cardinality = static_cast<std::int64_t>(std::llround(rng.log_uniform(1e2, 1e6)));
    const auto n_attrs = 1 + rng.index(max_attributes);
    for (std::size_t a = 0; a < n_attrs; ++a)
      tables[i].attributes.push_back(lower(tables[i].name) + "_c" + std::to_string(a));
  }
  Catalog catalog(std::move(tables));
  for (std::size_t i = 0; i < num_tables; ++i)
    for (std::size_t j = i + 1; j < num_tables; ++j)
      catalog.set_join_selectivity(i, j, rng.log_uniform(1e-4, 1.0));
  return catalog;
}

Query generate_query(std::uint64_t seed, const Catalog& catalog, std::size_t n_relations,
                     const QueryOptions& options) {
  if (n_relations < 2) throw ContractError("generate_query: n_relations must be >= 2");
  const auto r = catalog.num_tables();
  if (n_relations > 2 * r || n_relations > kMaxQueryRelations)
    throw ContractError("generate_query: too many relations for this catalog (each table may appear at most twice)");
  Rng rng(mix_seed(seed, 0x9e77));

  // Table choice: fresh tables by default, occasionally a second alias of a
  // table already in the query. Capacity never runs out while n <= 2r.
  std::vector<int> uses(r, 0);
  std::vector<std::size_t> table_of(n_relations);
  for (std::size_t k = 0; k < n_relations; ++k) {
    std::vector<std::size_t> unused, once;
    for (std::size_t t = 0; t < r; ++t) {
      if (uses[t] == 0) unused.push_back(t);
      if (uses[t] == 1) once.push_back(t);
    }
    const bool repeat = !once.empty() && (unused.empty() || rng.bernoulli(options.alias_repeat_probability));
    const auto& pool = repeat ? once : unused;
    table_of[k] = pool[rng.index(pool.size())];
    ++uses[table_of[k]];
  }

  std::vector<Relation> relations(n_relations);
  std::vector<int> ordinal(r, 0);
  for (std::size_t k = 0; k < n_relations; ++k) {
    const auto t = table_of[k];
    const auto& name = catalog.table(t).name;
    relations[k].table_index = t;
    relations[k].alias = uses[t] > 1 ? lower(name) + std::to_string(++ordinal[t]) : name;
  }

  std::vector<double> sel(n_relations, 1.0);
  std::vector<std::vector<std::size_t>> sel_attrs(n_relations);

  // Random spanning tree over a shuffled order, then extra edges.
  std::vector<std::size_t> order(n_relations);
  for (std::size_t k = 0; k < n_relations; ++k) order[k] = k;
  for (std::size_t k = n_relations - 1; k > 0; --k) std::swap(order[k], order[rng.index(k + 1)]);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::uint8_t> adj(n_relations * n_relations, 0);
  auto link = [&](std::size_t a, std::size_t b) {
    adj[a * n_relations + b] = adj[b * n_relations + a] = 1;
    edges.emplace_back(a, b);
  };
  for (std::size_t k = 1; k < n_relations; ++k) link(order[k], order[rng.index(k)]);
  for (std::size_t a = 0; a < n_relations; ++a)
    for (std::size_t b = a + 1; b < n_relations; ++b)
      if (!adj[a * n_relations + b] && rng.bernoulli(options.extra_edge_probability)) link(a, b);

  for (std::size_t k = 0; k < n_relations; ++k) {
    if (!rng.bernoulli(options.filter_probability)) continue;
    sel[k] = rng.uniform(options.min_filter_selectivity, 1.0);
    const auto n_attrs = catalog.table(table_of[k]).attributes.size();
    const auto count = 1 + rng.index(std::min<std::size_t>(2, n_attrs));
    std::vector<std::size_t> pick(n_attrs);
    for (std::size_t a = 0; a < n_attrs; ++a) pick[a] = a;
    for (std::size_t a = 0; a < count; ++a) std::swap(pick[a], pick[a + rng.index(n_attrs - a)]);
    pick.resize(count);
    std::sort(pick.begin(), pick.end());
    sel_attrs[k] = std::move(pick);
  }

  Query q(std::move(relations), std::move(sel), std::move(sel_attrs));
  for (auto [a, b] : edges) q.add_edge(a, b);
  return q;
}

Workload make_workload(std::uint64_t seed, const Catalog& catalog, std::size_t count,
                       std::size_t n_relations, const QueryOptions& options) {
  if (count < kNumFolds) throw ContractError("make_workload: need at least 10 queries for ten folds");
  Workload w;
  w.catalog = catalog;
  w.queries.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    w.queries.push_back(generate_query(mix_seed(seed, i), catalog, n_relations, options));
  std::vector<std::size_t> perm(count);
  for (std::size_t i = 0; i < count; ++i) perm[i] = i;
  Rng rng(mix_seed(seed, 0xf01d));
  for (std::size_t i = count - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  w.folds.assign(count, 0);
  for (std::size_t i = 0; i < count; ++i) w.folds[perm[i]] = static_cast<int>(i % kNumFolds);
  return w;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ParseError("workload field '" + field + "': " + what);
}

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing");
  return *it;
}

const json& array_at(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  return v;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

std::int64_t integer(const json& v, const std::string& path, std::int64_t lo, std::int64_t hi) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > hi) fail(path, "value " + std::to_string(x) + " out of range");
  return x;
}

std::string string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

}  // namespace

std::string workload_to_json(const Workload& w) {
  json tables = json::array();
  for (const auto& t : w.catalog.tables())
    tables.push_back({{"name", t.name}, {"card", t.cardinality}, {"attrs", t.attributes}});
  json join_sel = json::array();
  for (const auto& e : w.catalog.join_edges()) join_sel.push_back(json::array({e.i, e.j, e.selectivity}));

  json queries = json::array();
  for (std::size_t qi = 0; qi < w.queries.size(); ++qi) {
    const auto& q = w.queries[qi];
    json rels = json::array();
    for (const auto& r : q.relations()) rels.push_back(json::array({r.alias, r.table_index}));
    json edges = json::array();
    for (auto [k, l] : q.edges()) edges.push_back(json::array({k, l}));
    json sel_attrs = json::array();
    for (std::size_t k = 0; k < q.size(); ++k) sel_attrs.push_back(q.selected_attributes(k));
    queries.push_back({{"relations", rels},
                       {"edges", edges},
                       {"sel", q.selection_selectivities()},
                       {"sel_attrs", sel_attrs},
                       {"fold", w.folds.at(qi)}});
  }
  json doc = {{"version", kWorkloadVersion},
              {"catalog", {{"tables", tables}, {"join_sel", join_sel}}},
              {"queries", queries}};
  return doc.dump();
}

Workload workload_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("workload is not valid JSON: ") + e.what());
  }
  const auto version = string(member(doc, "version", "$"), "$.version");
  if (version != kWorkloadVersion)
    throw IncompatibleVersionError("workload version '" + version + "' is not supported (expected '" +
                                   kWorkloadVersion + "')");

  Workload w;
  const auto& cat = member(doc, "catalog", "$");
  const auto& tables_j = array_at(member(cat, "tables", "$.catalog"), "$.catalog.tables");
  std::vector<Table> tables;
  for (std::size_t i = 0; i < tables_j.size(); ++i) {
    const auto path = "$.catalog.tables[" + std::to_string(i) + "]";
    Table t;
    t.name = string(member(tables_j[i], "name", path), path + ".name");
    t.cardinality = integer(member(tables_j[i], "card", path), path + ".card", 1, INT64_MAX);
    const auto& attrs = array_at(member(tables_j[i], "attrs", path), path + ".attrs");
    for (std::size_t a = 0; a < attrs.size(); ++a)
      t.attributes.push_back(string(attrs[a], path + ".attrs[" + std::to_string(a) + "]"));
    tables.push_back(std::move(t));
  }
  if (tables.size() < 2) fail("$.catalog.tables", "need at least two tables");
  w.catalog = Catalog(std::move(tables));
  const auto r = static_cast<std::int64_t>(w.catalog.num_tables());

  const auto& js = array_at(member(cat, "join_sel", "$.catalog"), "$.catalog.join_sel");
  for (std::size_t e = 0; e < js.size(); ++e) {
    const auto path = "$.catalog.join_sel[" + std::to_string(e) + "]";
    if (!js[e].is_array() || js[e].size() != 3) fail(path, "expected [i, j, selectivity]");
    const auto i = integer(js[e][0], path + "[0]", 0, r - 1);
    const auto j = integer(js[e][1], path + "[1]", 0, r - 1);
    const auto s = number(js[e][2], path + "[2]");
    if (i == j) fail(path, "self pairs are implicit");
    if (!(s > 0.0 && s <= 1.0)) fail(path + "[2]", "selectivity must lie in (0, 1]");
    w.catalog.set_join_selectivity(static_cast<std::size_t>(i), static_cast<std::size_t>(j), s);
  }

  const auto& qs = array_at(member(doc, "queries", "$"), "$.queries");
  for (std::size_t qi = 0; qi < qs.size(); ++qi) {
    const auto path = "$.queries[" + std::to_string(qi) + "]";
    const auto& qj = qs[qi];
    const auto& rels_j = array_at(member(qj, "relations", path), path + ".relations");
    const auto n = rels_j.size();
    if (n < 2 || n > kMaxQueryRelations) fail(path + ".relations", "need 2..32 relations");
    std::vector<Relation> rels(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto rp = path + ".relations[" + std::to_string(k) + "]";
      if (!rels_j[k].is_array() || rels_j[k].size() != 2) fail(rp, "expected [alias, table_idx]");
      rels[k].alias = string(rels_j[k][0], rp + "[0]");
      rels[k].table_index = static_cast<std::size_t>(integer(rels_j[k][1], rp + "[1]", 0, r - 1));
    }
    const auto& sel_j = array_at(member(qj, "sel", path), path + ".sel");
    if (sel_j.size() != n) fail(path + ".sel", "length must equal the relation count");
    std::vector<double> sel(n);
    for (std::size_t k = 0; k < n; ++k) {
      sel[k] = number(sel_j[k], path + ".sel[" + std::to_string(k) + "]");
      if (!(sel[k] > 0.0 && sel[k] <= 1.0)) fail(path + ".sel[" + std::to_string(k) + "]", "must lie in (0, 1]");
    }
    const auto& sa_j = array_at(member(qj, "sel_attrs", path), path + ".sel_attrs");
    if (sa_j.size() != n) fail(path + ".sel_attrs", "length must equal the relation count");
    std::vector<std::vector<std::size_t>> sel_attrs(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto ap = path + ".sel_attrs[" + std::to_string(k) + "]";
      const auto n_attrs = static_cast<std::int64_t>(w.catalog.table(rels[k].table_index).attributes.size());
      for (std::size_t a = 0; a < array_at(sa_j[k], ap).size(); ++a)
        sel_attrs[k].push_back(
            static_cast<std::size_t>(integer(sa_j[k][a], ap + "[" + std::to_string(a) + "]", 0, n_attrs - 1)));
    }
    Query q(std::move(rels), std::move(sel), std::move(sel_attrs));
    const auto& edges_j = array_at(member(qj, "edges", path), path + ".edges");
    for (std::size_t e = 0; e < edges_j.size(); ++e) {
      const auto ep = path + ".edges[" + std::to_string(e) + "]";
      if (!edges_j[e].is_array() || edges_j[e].size() != 2) fail(ep, "expected [k, l]");
      const auto k = integer(edges_j[e][0], ep + "[0]", 0, static_cast<std::int64_t>(n) - 1);
      const auto l = integer(edges_j[e][1], ep + "[1]", 0, static_cast<std::int64_t>(n) - 1);
      if (k == l) fail(ep, "self loops are not allowed");
      q.add_edge(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
    }
    if (!q.is_connected()) fail(path + ".edges", "join graph is not connected");
    w.folds.push_back(static_cast<int>(integer(member(qj, "fold", path), path + ".fold", 0, kNumFolds - 1)));
    w.queries.push_back(std::move(q));
  }
  return w;
}

void save_workload(const Workload& workload, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << workload_to_json(workload) << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Workload load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open workload '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return workload_from_json(ss.str());
}

}  // namespace qrljo
