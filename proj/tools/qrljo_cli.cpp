// qrljo command-line front end.
#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "qrljo/bench.hpp"
#include "qrljo/errors.hpp"

using namespace qrljo;

namespace {

// Flags shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  int fold = 0;
  std::string config;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* fold_opt = nullptr;
};

void add_common(CLI::App* app, Common& c) {
  c.seed_opt = app->add_option("--seed", c.seed, "RNG seed");
  c.fold_opt = app->add_option("--fold", c.fold, "Held-out fold (0-9)")->check(CLI::Range(0, 9));
  app->add_option("--config", c.config, "Experiment config JSON")->check(CLI::ExistingFile);
}

ExperimentConfig base_config(const Common& c) {
  return c.config.empty() ? ExperimentConfig{} : load_experiment(c.config);
}


void write_or_print(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << body;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string result_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream ss;
  write_result_header(ss);
  write_result_rows(ss, rows);
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Join-order optimisation with classical and quantum reinforcement learning"};
  app.require_subcommand(1);

  // gen-workload
  Common gen_c;
  std::size_t tables = 10, attributes = 5, queries = 500, relations = 4;
  double extra_edge = 0.3, filter_p = 0.5, repeat_p = 0.1;
  std::string gen_out = "workload.json";
  auto* gen = app.add_subcommand("gen-workload", "Generate a synthetic catalog and query workload");
  add_common(gen, gen_c);
  gen->add_option("--tables", tables, "Catalog tables")->check(CLI::Range(2, 1000));
  gen->add_option("--attributes", attributes, "Maximum attributes per table")->check(CLI::PositiveNumber);
  gen->add_option("--queries", queries, "Number of queries")->check(CLI::PositiveNumber);
  gen->add_option("--relations", relations, "Relations per query")->check(CLI::Range(2, 32));
  gen->add_option("--extra-edge-probability", extra_edge)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--filter-probability", filter_p)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--alias-repeat-probability", repeat_p)->check(CLI::Range(0.0, 1.0));
  gen->add_option("-o,--out", gen_out, "Output workload JSON");

  // train
  Common train_c;
  std::string train_workload, train_model, train_out;
  std::size_t train_episodes = 0, train_budget = 0;
  std::vector<std::uint64_t> train_seeds;
  std::vector<int> train_folds;
  auto* tr = app.add_subcommand("train", "Train (fold, seed) jobs and write result CSVs and checkpoints");
  add_common(tr, train_c);
  tr->add_option("--workload", train_workload, "Workload JSON");
  tr->add_option("--model", train_model, "classical | q-critic | q-actor | fully-quantum | singlestep");
  tr->add_option("--episodes", train_episodes, "PPO episode budget");
  tr->add_option("--budget", train_budget, "Single-step optimizer steps");
  tr->add_option("--folds", train_folds, "Several folds (overrides --fold)");
  tr->add_option("--seeds", train_seeds, "Several seeds (overrides --seed)");
  tr->add_option("-o,--out", train_out, "Output directory");

  // eval
  Common eval_c;
  std::string eval_ckpt, eval_workload, eval_out;
  auto* ev = app.add_subcommand("eval", "Greedy evaluation of a checkpoint on a held-out fold");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--workload", eval_workload, "Workload JSON");
  ev->add_option("-o,--out", eval_out, "Output CSV (default stdout)");

  // noisy-eval
  Common noisy_c;
  std::string noisy_ckpt, noisy_workload, noisy_out;
  std::vector<double> noisy_grid;
  std::size_t noisy_traj = 0;
  double noisy_max = 0.0;
  auto* ne = app.add_subcommand("noisy-eval", "Greedy evaluation under per-gate depolarizing noise");
  add_common(ne, noisy_c);
  ne->add_option("--checkpoint", noisy_ckpt, "Checkpoint JSON (quantum actor)")->required()->check(CLI::ExistingFile);
  ne->add_option("--workload", noisy_workload, "Workload JSON");
  ne->add_option("--noise", noisy_grid, "Noise levels, e.g. 0 0.01 0.02");
  ne->add_option("--trajectories", noisy_traj, "Trajectories per circuit evaluation");
  ne->add_option("--max-noise", noisy_max, "Guard on the largest noise level");
  ne->add_option("-o,--out", noisy_out, "Output CSV (default stdout)");

  // params
  Common params_c;
  std::size_t p_from = 4, p_to = 30, p_reps = 5;
  std::string params_out;
  auto* pa = app.add_subcommand("params", "Parameter counts per configuration");
  add_common(pa, params_c);
  pa->add_option("--n-min", p_from)->check(CLI::Range(2, 1000));
  pa->add_option("--n-max", p_to)->check(CLI::Range(2, 1000));
  pa->add_option("--dru-repetitions", p_reps)->check(CLI::PositiveNumber);
  pa->add_option("-o,--out", params_out, "Output CSV (default stdout)");

  // resources
  Common res_c;
  std::size_t r_from = 2, r_to = 30;
  std::string res_out;
  auto* re = app.add_subcommand("resources", "Qubit and depth estimates per approach");
  add_common(re, res_c);
  re->add_option("--n-min", r_from)->check(CLI::Range(2, 1000));
  re->add_option("--n-max", r_to)->check(CLI::Range(2, 1000));
  re->add_option("-o,--out", res_out, "Output CSV (default stdout)");

  // adam-bench
  Common adam_c;
  std::vector<std::size_t> adam_sizes{1000, 10000, 100000, 1000000};
  std::size_t adam_samples = 1000;
  std::string adam_out;
  auto* ab = app.add_subcommand("adam-bench", "Time single Adam update steps");
  add_common(ab, adam_c);
  ab->add_option("--sizes", adam_sizes, "Parameter vector sizes");
  ab->add_option("--samples", adam_samples, "Measurements per size")->check(CLI::Range(1000, 100000000));
  ab->add_option("-o,--out", adam_out, "Output CSV (default stdout)");

  // merge
  Common merge_c;
  std::vector<std::string> merge_in;
  std::string merge_out = "merged.csv";
  auto* me = app.add_subcommand("merge", "Concatenate complete result CSVs");
  add_common(me, merge_c);
  me->add_option("inputs", merge_in, "Result CSV files")->required()->check(CLI::ExistingFile);
  me->add_option("-o,--out", merge_out, "Merged CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto catalog = generate_catalog(gen_c.seed, tables, attributes);
      QueryOptions qo;
      qo.extra_edge_probability = extra_edge;
      qo.filter_probability = filter_p;
      qo.alias_repeat_probability = repeat_p;
      const auto wl = make_workload(mix_seed(gen_c.seed, 1), catalog, queries, relations, qo);
      save_workload(wl, gen_out);
      std::cerr << "wrote " << wl.queries.size() << " queries over " << catalog.num_tables() << " tables to " << gen_out
                << '\n';
    } else if (*tr) {
      auto cfg = base_config(train_c);
      if (!train_workload.empty()) cfg.workload = train_workload;
      if (!train_model.empty()) cfg.model = train_model;
      if (train_episodes) cfg.ppo.total_episodes = train_episodes;
      if (train_budget) cfg.singlestep.budget = train_budget;
      if (!train_out.empty()) cfg.output_dir = train_out;
      if (!train_folds.empty()) cfg.folds = train_folds;
      else if (train_c.fold_opt->count() || cfg.folds.empty()) cfg.folds = {train_c.fold};
      if (!train_seeds.empty()) cfg.seeds = train_seeds;
      else if (train_c.seed_opt->count()) cfg.seeds = {train_c.seed};
      if (cfg.workload.empty()) throw ContractError("train needs --workload or a config with a workload path");
      const auto summary = run_experiment(cfg, [](const std::string& s) { std::cerr << s << '\n'; });
      std::cout << "jobs run " << summary.jobs_run << ", skipped " << summary.jobs_skipped << ", median of test medians "
                << median(summary.test_medians) << '\n';
    } else if (*ev) {
      auto cfg = base_config(eval_c);
      if (!eval_workload.empty()) cfg.workload = eval_workload;
      if (cfg.workload.empty()) throw ContractError("eval needs --workload");
      const auto wl = load_workload(cfg.workload);
      const auto ck = load_checkpoint(eval_ckpt);
      const auto test_q = wl.fold_indices(eval_c.fold);
      std::vector<double> rc;
      std::string name;
      if (ck.kind == "singlestep") {
        rc = evaluate_singlestep(restore_singlestep(ck), wl, test_q);
        name = "Single-Step";
      } else {
        const auto model = restore_model(ck);
        rc = evaluate_greedy(model, wl, optimal_costs(wl), test_q);
        name = model.config().name();
      }
      std::vector<ResultRow> rows;
      for (std::size_t i = 0; i < test_q.size(); ++i)
        rows.push_back({name, eval_c.fold, ck.seed, "test", 0.0, test_q[i], rc[i], 0, 0, 0});
      fill_aggregates(rows);
      write_or_print(eval_out, result_csv(rows));
    } else if (*ne) {
      auto cfg = base_config(noisy_c);
      if (!noisy_workload.empty()) cfg.workload = noisy_workload;
      if (cfg.workload.empty()) throw ContractError("noisy-eval needs --workload");
      if (!noisy_grid.empty()) cfg.noise_grid = noisy_grid;
      if (cfg.noise_grid.empty()) cfg.noise_grid = {0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
      if (noisy_traj) cfg.trajectories = noisy_traj;
      if (noisy_max > 0.0) cfg.max_noise = noisy_max;
      const auto ck = load_checkpoint(noisy_ckpt);
      if (ck.kind == "singlestep") throw ContractError("noisy-eval needs a multi-step model with a quantum actor");
      const auto model = restore_model(ck);
      const auto wl = load_workload(cfg.workload);
      const auto rows = noisy_eval(model, wl, noisy_c.fold, cfg.noise_grid, cfg.trajectories, noisy_c.seed, cfg.max_noise);
      write_or_print(noisy_out, result_csv(rows));
    } else if (*pa) {
      if (p_from > p_to) throw ContractError("--n-min exceeds --n-max");
      std::ostringstream ss;
      ss << "n,config,layers,classical,quantum,post,total,reduction_vs_classical\n";
      for (std::size_t n = p_from; n <= p_to; ++n) {
        VqcShape shape{n, true, p_reps, 0};
        const auto base = count_parameters(ModelConfig::classical(n)).total();
        for (const char* name : {"classical", "q-critic", "q-actor", "fully-quantum"}) {
          const auto b = count_parameters(ModelConfig::from_name(name, shape));
          ss << n << ',' << name << ',' << shape.variational_layers() << ',' << b.classical << ',' << b.quantum << ','
             << b.post << ',' << b.total() << ',' << std::setprecision(6)
             << 1.0 - static_cast<double>(b.total()) / static_cast<double>(base) << '\n';
        }
      }
      write_or_print(params_out, ss.str());
    } else if (*re) {
      if (r_from > r_to) throw ContractError("--n-min exceeds --n-max");
      std::ostringstream ss;
      ss << "n,approach,qubits,depth\n";
      for (std::size_t n = r_from; n <= r_to; ++n) {
        const auto m = resource_estimate(n, Approach::kMultiStep);
        const auto s = resource_estimate(n, Approach::kSingleStep);
        ss << n << ",multi-step," << m.qubits << ',' << m.depth << '\n';
        ss << n << ",single-step," << s.qubits << ',' << s.depth << '\n';
      }
      write_or_print(res_out, ss.str());
    } else if (*ab) {
      std::ostringstream ss;
      write_adam_timing(ss, adam_timing(adam_sizes, adam_samples, adam_c.seed));
      write_or_print(adam_out, ss.str());
    } else if (*me) {
      std::vector<std::filesystem::path> in(merge_in.begin(), merge_in.end());
      const auto n = merge_results(in, merge_out);
      std::cerr << "merged " << n << " rows into " << merge_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
