#ifndef QRLJO_BENCH_HPP_
#define QRLJO_BENCH_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "qrljo/catalog.hpp"
#include "qrljo/model.hpp"
#include "qrljo/ppo.hpp"
#include "qrljo/singlestep.hpp"

namespace qrljo {

inline constexpr const char* kResultsSchema = "# qrljo-results v1";
inline constexpr const char* kIncompleteMarker = "# status: incomplete";

// One experiment grid: a model trained on every (fold, seed) pair.
struct ExperimentConfig {
  std::filesystem::path workload;
  // "classical", "q-critic", "q-actor", "fully-quantum" or "singlestep".
  std::string model = "classical";
  VqcShape vqc;
  PPOConfig ppo;
  SingleStepConfig singlestep;
  std::vector<int> folds;
  std::vector<std::uint64_t> seeds{0};
  std::vector<double> noise_grid;  // empty skips noisy evaluation
  std::size_t trajectories = 128;
  double max_noise = 0.05;
  std::filesystem::path output_dir = "results";

  bool is_singlestep() const { return model == "singlestep"; }
  ModelConfig model_config() const;
  // Throws ContractError on an invalid grid.
  void validate() const;
};

ExperimentConfig experiment_from_json(const std::string& text);
ExperimentConfig load_experiment(const std::filesystem::path& path);
std::string experiment_to_json(const ExperimentConfig& config);

struct ResultRow {
  std::string config;
  int fold = 0;
  std::uint64_t seed = 0;
  std::string phase;  // train | test | noisy-test
  double noise = 0.0;
  std::size_t query = 0;  // workload index; episode index for train rows
  double relative_cost = 0.0;
  double median = 0.0;  // aggregates over the row's (phase, noise) group
  double q1 = 0.0;
  double q3 = 0.0;
};

// Fills median/q1/q3 of every row from its (phase, noise) group.
void fill_aggregates(std::vector<ResultRow>& rows);
void write_result_header(std::ostream& out);
void write_result_rows(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_result_csv(const std::filesystem::path& path);

using ExperimentLog = std::function<void(const std::string&)>;

struct ExperimentSummary {
  std::vector<std::filesystem::path> files;
  std::size_t jobs_run = 0;
  std::size_t jobs_skipped = 0;  // already complete on disk
  std::vector<double> test_medians;  // one per (fold, seed)
};

// Trains and evaluates every (fold, seed) job. Each job writes
// <model>_f<fold>_s<seed>.csv through a partial file that carries the
// incomplete marker until the job finishes; finished jobs are skipped on a
// rerun and trained checkpoints are reused.
ExperimentSummary run_experiment(const ExperimentConfig& config, const ExperimentLog& log = {});

// Greedy evaluation with actor expectations from noisy trajectories.
// Refuses models whose actor is classical.
std::vector<ResultRow> noisy_eval(const ActorCritic& model, const Workload& workload, int fold,
                                  const std::vector<double>& noise_grid, std::size_t trajectories,
                                  std::uint64_t seed, double max_noise = 0.05);

// Greedy relative cost of one query under noisy actor expectations.
double noisy_greedy_relative_cost(const ActorCritic& model, const JoinOrderEnv& env, const Query& query,
                                  double c_dp, const NoiseSpec& noise, Rng& rng);

struct ParamBreakdown {
  std::size_t classical = 0;
  std::size_t quantum = 0;
  std::size_t post = 0;
  std::size_t total() const { return classical + quantum + post; }
};

// Closed-form counts.
ParamBreakdown count_parameters(const ModelConfig& config);
// Walk over an instantiated model's parameter blocks.
ParamBreakdown count_parameters(const ActorCritic& model);

enum class Approach { kMultiStep, kSingleStep };

struct ResourceEstimate {
  std::size_t qubits = 0;
  std::size_t depth = 0;  // gate layers of one data-uploading block
};
ResourceEstimate resource_estimate(std::size_t n, Approach approach);

struct AdamTiming {
  std::size_t size = 0;
  double median_ns = 0.0;
  double q1_ns = 0.0;
  double q3_ns = 0.0;
  std::size_t samples = 0;
};
// Times Adam::step alone on random gradients.
std::vector<AdamTiming> adam_timing(const std::vector<std::size_t>& sizes, std::size_t samples, std::uint64_t seed);
void write_adam_timing(std::ostream& out, const std::vector<AdamTiming>& rows);

// Concatenates complete result files. Throws on an incomplete or
// foreign-schema input.
std::size_t merge_results(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output);

// Spearman rank correlation with average ranks for ties; NaN when either
// side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qrljo

#endif  // QRLJO_BENCH_HPP_
