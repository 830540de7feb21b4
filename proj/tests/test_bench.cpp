#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qrljo/bench.hpp"
#include "qrljo/errors.hpp"

using namespace qrljo;
namespace fs = std::filesystem;

namespace {

double reduction(const ModelConfig& quantum, std::size_t n) {
  const double c = static_cast<double>(count_parameters(ModelConfig::classical(n)).total());
  return 1.0 - static_cast<double>(count_parameters(quantum).total()) / c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Counts, QuantumCriticReduction) {
  EXPECT_NEAR(reduction(ModelConfig::q_critic(VqcShape{4, true, 5, 0}), 4), 0.47, 0.02);
  EXPECT_NEAR(reduction(ModelConfig::q_critic(VqcShape{30, true, 5, 0}), 30), 0.38, 0.02);
}

TEST(Counts, Ordering) {
  for (std::size_t n = 4; n <= 30; ++n) {
    const VqcShape s{n, true, 5, 0};
    const auto cl = count_parameters(ModelConfig::classical(n)).total();
    const auto qc = count_parameters(ModelConfig::q_critic(s)).total();
    const auto qa = count_parameters(ModelConfig::q_actor(s)).total();
    const auto fq = count_parameters(ModelConfig::fully_quantum(s)).total();
    EXPECT_LT(fq, qa) << n;
    EXPECT_LT(qc, cl) << n;
  }
}

TEST(Counts, WalkMatchesFormula) {
  const VqcShape s{3, true, 2, 0};
  for (const auto& cfg : {ModelConfig::classical(3), ModelConfig::q_critic(s), ModelConfig::q_actor(s),
                          ModelConfig::fully_quantum(s)}) {
    const ActorCritic m(cfg, 0);
    const auto a = count_parameters(cfg);
    const auto b = count_parameters(m);
    EXPECT_EQ(a.classical, b.classical) << cfg.name();
    EXPECT_EQ(a.quantum, b.quantum) << cfg.name();
    EXPECT_EQ(a.post, b.post) << cfg.name();
  }
}

TEST(Resources, Qubits) {
  EXPECT_EQ(resource_estimate(4, Approach::kMultiStep).qubits, 10u);
  EXPECT_EQ(resource_estimate(4, Approach::kSingleStep).qubits, 4u);
  EXPECT_EQ(resource_estimate(30, Approach::kMultiStep).qubits, 62u);
  for (std::size_t n = 2; n <= 6; ++n) {
    EXPECT_GT(resource_estimate(n, Approach::kMultiStep).depth, 0u);
    EXPECT_GT(resource_estimate(n, Approach::kSingleStep).depth, 0u);
  }
  EXPECT_THROW(resource_estimate(1, Approach::kMultiStep), ContractError);
}

TEST(Results, CsvRoundTripAndMerge) {
  const auto d = fresh_dir("qrljo_results_test");
  std::vector<ResultRow> rows{{"classical", 0, 1, "test", 0.0, 3, 1.25, 0, 0, 0},
                              {"classical", 0, 1, "test", 0.0, 7, 1.0, 0, 0, 0},
                              {"classical", 0, 1, "test", 0.0, 9, 1.0 / 3.0 + 1.0, 0, 0, 0}};
  fill_aggregates(rows);
  EXPECT_DOUBLE_EQ(rows[0].median, 1.25);
  for (int i = 0; i < 2; ++i) {
    std::ofstream out(d / ("r" + std::to_string(i) + ".csv"));
    write_result_header(out);
    write_result_rows(out, rows);
  }
  const auto back = read_result_csv(d / "r0.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].relative_cost, rows[2].relative_cost);
  EXPECT_EQ(back[1].query, 7u);
  EXPECT_EQ(back[0].phase, "test");
  EXPECT_EQ(merge_results({d / "r0.csv", d / "r1.csv"}, d / "all.csv"), 6u);
  EXPECT_EQ(read_result_csv(d / "all.csv").size(), 6u);

  {
    std::ofstream out(d / "partial.csv");
    out << kResultsSchema << '\n' << kIncompleteMarker << '\n';
  }
  EXPECT_ANY_THROW(merge_results({d / "r0.csv", d / "partial.csv"}, d / "bad.csv"));
  {
    std::ofstream out(d / "foreign.csv");
    out << "# something-else v7\n";
  }
  EXPECT_ANY_THROW(read_result_csv(d / "foreign.csv"));
  fs::remove_all(d);
}

TEST(Experiment, Validation) {
  ExperimentConfig c;
  EXPECT_THROW(c.validate(), ContractError);
  c.folds = {0};
  EXPECT_NO_THROW(c.validate());
  c.noise_grid = {0.0, 0.01};
  EXPECT_THROW(c.validate(), ContractError);
  c.model = "q-actor";
  EXPECT_NO_THROW(c.validate());
  c.noise_grid = {0.2};
  EXPECT_THROW(c.validate(), ContractError);
  c.noise_grid.clear();
  c.folds = {10};
  EXPECT_THROW(c.validate(), ContractError);
  EXPECT_ANY_THROW(experiment_from_json("{\"folds\": [0], \"model\": 3}"));
}

TEST(Experiment, JsonRoundTrip) {
  ExperimentConfig c;
  c.folds = {1, 2};
  c.seeds = {3, 4};
  c.model = "q-critic";
  c.ppo.total_episodes = 77;
  c.vqc.dru_repetitions = 2;
  const auto back = experiment_from_json(experiment_to_json(c));
  EXPECT_EQ(back.folds, c.folds);
  EXPECT_EQ(back.seeds, c.seeds);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.ppo.total_episodes, 77u);
  EXPECT_EQ(back.vqc.dru_repetitions, 2u);
}

TEST(Experiment, DeterministicAndResumable) {
  const auto d = fresh_dir("qrljo_experiment_test");
  const auto cat = generate_catalog(1, 5, 3);
  save_workload(make_workload(2, cat, 40, 3), d / "w.json");
  ExperimentConfig c;
  c.workload = d / "w.json";
  c.folds = {0};
  c.seeds = {5};
  c.ppo.total_episodes = 40;
  c.ppo.log_every = 10;
  c.output_dir = d / "a";
  const auto s1 = run_experiment(c);
  ASSERT_EQ(s1.files.size(), 1u);
  EXPECT_EQ(s1.jobs_run, 1u);
  c.output_dir = d / "b";
  const auto s2 = run_experiment(c);
  EXPECT_EQ(slurp(s1.files[0]), slurp(s2.files[0]));
  const auto rows = read_result_csv(s1.files[0]);
  for (const auto& r : rows) EXPECT_GE(r.relative_cost, 1.0 - 1e-9);
  // Second run over a finished grid skips the job.
  const auto s3 = run_experiment(c);
  EXPECT_EQ(s3.jobs_run, 0u);
  EXPECT_EQ(s3.jobs_skipped, 1u);
  fs::remove_all(d);
}

TEST(Experiment, NoisyEvalRefusesClassicalActor) {
  const auto cat = generate_catalog(1, 5, 3);
  const auto w = make_workload(2, cat, 20, 3);
  const ActorCritic m(ModelConfig::classical(3), 0);
  EXPECT_THROW(noisy_eval(m, w, 0, {0.0}, 4, 0), ContractError);
}

TEST(Experiment, NoisyEvalZeroNoiseMatchesGreedy) {
  const auto cat = generate_catalog(1, 5, 3);
  const auto w = make_workload(2, cat, 20, 3);
  const ActorCritic m(ModelConfig::q_actor(VqcShape{3, true, 1, 0}), 0);
  const auto rows = noisy_eval(m, w, 0, {0.0, 0.02}, 4, 1);
  const auto c_dp = optimal_costs(w);
  const auto test = w.fold_indices(0);
  const auto greedy = evaluate_greedy(m, w, c_dp, test);
  std::size_t i = 0;
  for (const auto& r : rows) {
    EXPECT_GE(r.relative_cost, 1.0 - 1e-9);
    if (r.noise == 0.0) {
      EXPECT_NEAR(r.relative_cost, greedy[i++], 1e-12);
    }
  }
  EXPECT_EQ(i, test.size());
}

TEST(Stats, Spearman) {
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-12);
  EXPECT_NEAR(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-12);
  EXPECT_NEAR(spearman({1, 2, 3}, {1, 1, 2}), std::sqrt(3.0) / 2.0, 1e-12);
  EXPECT_TRUE(std::isnan(spearman({1, 2, 3}, {5, 5, 5})));
  EXPECT_ANY_THROW(spearman({1, 2}, {1}));
}

TEST(Timing, AdamTiming) {
  const auto rows = adam_timing({10, 1000}, 5, 0);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_GT(r.median_ns, 0.0);
    EXPECT_LE(r.q1_ns, r.median_ns);
    EXPECT_LE(r.median_ns, r.q3_ns);
  }
  std::ostringstream out;
  write_adam_timing(out, rows);
  EXPECT_FALSE(out.str().empty());
}
