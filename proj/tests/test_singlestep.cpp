#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "qrljo/errors.hpp"
#include "qrljo/singlestep.hpp"
#include "support.hpp"

using namespace qrljo;
using qrljo::testing::Chain3;

namespace {

SingleStepConfig small_config(std::size_t n) {
  SingleStepConfig c;
  c.n_relations = n;
  c.dru_repetitions = 2;
  return c;
}

}  // namespace

TEST(Orders, CliqueHasFifteenCandidates) {
  const auto c = qrljo::testing::catalog4();
  const auto t = enumerate_orders(qrljo::testing::clique4(), c);
  EXPECT_EQ(t.candidates.size(), 15u);
  EXPECT_LE(t.candidates.size(), 16u);
  double best = 1e300;
  for (const auto& cand : t.candidates) {
    EXPECT_NEAR(cand.cost, qrljo::testing::oracle_cost(cand.tree, qrljo::testing::clique4(), c), 1e-9 * cand.cost);
    EXPECT_LE(cand.label, 1.0 + 1e-12);
    best = std::min(best, cand.cost);
  }
  EXPECT_DOUBLE_EQ(t.c_dp, best);
  EXPECT_EQ(t.candidates[t.optimal].label, 1.0);
  for (std::size_t i = 0; i < t.candidates.size(); ++i)
    for (std::size_t j = i + 1; j < t.candidates.size(); ++j)
      EXPECT_FALSE(t.candidates[i].tree.canonical() == t.candidates[j].tree.canonical());
}

TEST(Orders, TwoRelationsSingleCandidate) {
  Chain3 f;
  Query q({{"A", 0}, {"B", 1}}, {1.0, 1.0}, {{}, {}});
  q.add_edge(0, 1);
  const auto t = enumerate_orders(q, f.catalog);
  ASSERT_EQ(t.candidates.size(), 1u);
  EXPECT_EQ(t.candidates[0].label, 1.0);
  EXPECT_EQ(t.normalized_labels(), std::vector<double>{1.0});
}

TEST(Orders, ChainLabels) {
  Chain3 f;
  const auto t = enumerate_orders(f.query, f.catalog);
  ASSERT_EQ(t.candidates.size(), 2u);
  std::vector<double> labels{t.candidates[0].label, t.candidates[1].label};
  std::sort(labels.begin(), labels.end());
  EXPECT_NEAR(labels[0], 12.0 / 26.0, 1e-12);
  EXPECT_EQ(labels[1], 1.0);
  EXPECT_DOUBLE_EQ(t.c_dp, 12.0);
  const auto y = t.normalized_labels();
  EXPECT_NEAR(y[0] + y[1], 1.0, 1e-12);
}

TEST(Orders, RefusesLargeQueries) {
  const auto c = generate_catalog(1, 8, 3);
  const auto q = generate_query(2, c, 5);
  EXPECT_THROW(enumerate_orders(q, c), ContractError);
}

TEST(SingleStep, CircuitShape) {
  SingleStepConfig c;
  EXPECT_EQ(c.variational_layers(), 20u);
  SingleStepModel m(c, 0);
  EXPECT_EQ(m.num_qubits(), 4u);
  EXPECT_EQ(m.params().size(), 20u * 2 * 4);
  for (double p : m.params()) {
    EXPECT_GE(p, 0.0);
    EXPECT_LT(p, 2 * std::numbers::pi);
  }
  c.use_dru = false;
  c.extra_layers = 3;
  EXPECT_EQ(c.variational_layers(), 7u);
}

TEST(SingleStep, ScoresAreProbabilities) {
  const auto c = qrljo::testing::catalog4();
  const auto q = qrljo::testing::clique4();
  SingleStepModel m(SingleStepConfig{}, 3);
  const auto pred = predict(m, q, c);
  double sum = 0;
  for (double s : pred.scores) {
    EXPECT_GE(s, 0.0);
    sum += s;
  }
  EXPECT_LE(sum, 1.0 + 1e-12);
  EXPECT_EQ(pred.chosen, static_cast<std::size_t>(std::max_element(pred.scores.begin(), pred.scores.end()) - pred.scores.begin()));
  // Identical inputs, identical scores.
  EXPECT_EQ(predict(m, q, c).scores, pred.scores);
}

TEST(SingleStep, GradientMatchesFiniteDifferences) {
  Chain3 f;
  for (auto method : {GradientMethod::kParameterShift, GradientMethod::kAdjoint}) {
    auto cfg = small_config(3);
    cfg.gradient_method = method;
    SingleStepModel m(cfg, 5);
    const auto t = enumerate_orders(f.query, f.catalog);
    const auto g = singlestep_gradient(m, f.query, t);
    ASSERT_EQ(g.size(), m.params().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = m.params()[i];
      m.params()[i] = x + 1e-5;
      const double hi = singlestep_loss(m, f.query, t);
      m.params()[i] = x - 1e-5;
      const double lo = singlestep_loss(m, f.query, t);
      m.params()[i] = x;
      EXPECT_NEAR(g[i], (hi - lo) / 2e-5, 1e-7);
    }
  }
}

TEST(SingleStep, OverfitsSingleQuery) {
  const auto c = generate_catalog(11, 6, 3);
  auto w = make_workload(12, c, 10, 4);
  for (auto& q : w.queries) q = w.queries[0];
  SingleStepConfig cfg;
  cfg.dru_repetitions = 2;
  cfg.budget = 300;
  cfg.learning_rate = 0.05;
  cfg.gradient_method = GradientMethod::kAdjoint;
  const auto r = train_singlestep(w, 0, cfg);
  const auto t = enumerate_orders(w.queries[0], c);
  EXPECT_EQ(predict(r.model, w.queries[0], t).chosen, t.optimal);
  ASSERT_FALSE(r.loss_curve.empty());
  EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
}

TEST(SingleStep, ZeroBudgetStillEvaluates) {
  const auto c = generate_catalog(11, 6, 3);
  const auto w = make_workload(13, c, 30, 4);
  SingleStepConfig cfg;
  cfg.budget = 0;
  const auto r = train_singlestep(w, 0, cfg);
  EXPECT_EQ(r.test_relative_costs.size(), w.fold_indices(0).size());
  for (double x : r.test_relative_costs) EXPECT_GE(x, 1.0 - 1e-9);
  EXPECT_EQ(evaluate_singlestep(r.model, w, r.test_queries), r.test_relative_costs);
}

TEST(SingleStep, RejectsMixedSizes) {
  const auto c = generate_catalog(11, 6, 3);
  const auto w = make_workload(13, c, 10, 3);
  EXPECT_THROW(train_singlestep(w, 0, SingleStepConfig{}), ContractError);
}

TEST(SingleStep, CheckpointRoundTrip) {
  SingleStepModel m(small_config(4), 9);
  const auto path = std::filesystem::temp_directory_path() / "qrljo_singlestep_ckpt.json";
  save_checkpoint(make_checkpoint(m, 9, 42), path);
  const auto back = restore_singlestep(load_checkpoint(path));
  std::filesystem::remove(path);
  EXPECT_TRUE(std::equal(m.params().begin(), m.params().end(), back.params().begin(), back.params().end()));
  EXPECT_EQ(back.config().dru_repetitions, 2u);
  const auto q = qrljo::testing::clique4();
  EXPECT_EQ(m.basis_probabilities(q), back.basis_probabilities(q));
}
