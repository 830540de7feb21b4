#include "qrljo/bench.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "qrljo/errors.hpp"
#include "qrljo/nn.hpp"

namespace qrljo {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError("experiment config field '" + path + "." + key + "' has the wrong type");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiment configuration

ModelConfig ExperimentConfig::model_config() const {
  if (is_singlestep()) throw ContractError("single-step experiments have no actor-critic model");
  return ModelConfig::from_name(model, vqc);
}

void ExperimentConfig::validate() const {
  if (folds.empty()) throw ContractError("experiment: fold list is empty");
  for (int f : folds)
    if (f < 0 || f >= static_cast<int>(kNumFolds)) throw ContractError("experiment: fold " + std::to_string(f) + " out of 0..9");
  if (seeds.empty()) throw ContractError("experiment: seed list is empty");
  for (double p : noise_grid)
    if (!(p >= 0.0 && p <= max_noise))
      throw ContractError("experiment: noise level " + fmt(p) + " outside [0, " + fmt(max_noise) + "]");
  if (!noise_grid.empty() && trajectories == 0) throw ContractError("experiment: trajectories must be positive");
  if (is_singlestep()) {
    singlestep.validate();
    if (!noise_grid.empty()) throw ContractError("experiment: noisy evaluation needs a multi-step quantum actor");
  } else {
    const auto mc = model_config();
    ppo.validate();
    if (!noise_grid.empty() && mc.actor != PartKind::kVqc)
      throw ContractError("experiment: noisy evaluation needs a quantum actor (Q-Actor or Fully-Quantum), got " +
                          mc.name());
  }
}

ExperimentConfig experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("experiment config must be a JSON object");
  ExperimentConfig c;
  std::string workload, out_dir = c.output_dir.string();
  read_field(j, "workload", workload, "$");
  c.workload = workload;
  read_field(j, "model", c.model, "$");
  c.model = lower(c.model);
  if (j.contains("vqc")) {
    const auto& v = j.at("vqc");
    read_field(v, "n_max", c.vqc.n_max, "$.vqc");
    read_field(v, "use_dru", c.vqc.use_dru, "$.vqc");
    read_field(v, "dru_repetitions", c.vqc.dru_repetitions, "$.vqc");
    read_field(v, "extra_layers", c.vqc.extra_layers, "$.vqc");
  }
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    const std::string at = "$.ppo";
    read_field(p, "clip_epsilon", c.ppo.clip_epsilon, at);
    read_field(p, "value_coef", c.ppo.value_coef, at);
    read_field(p, "entropy_coef", c.ppo.entropy_coef, at);
    read_field(p, "gamma", c.ppo.gamma, at);
    read_field(p, "gae_lambda", c.ppo.gae_lambda, at);
    read_field(p, "episodes_per_update", c.ppo.episodes_per_update, at);
    read_field(p, "epochs", c.ppo.epochs, at);
    read_field(p, "minibatch_size", c.ppo.minibatch_size, at);
    read_field(p, "lr_classical", c.ppo.lr_classical, at);
    read_field(p, "lr_quantum", c.ppo.lr_quantum, at);
    read_field(p, "lr_post", c.ppo.lr_post, at);
    read_field(p, "normalize_advantages", c.ppo.normalize_advantages, at);
    read_field(p, "max_grad_norm", c.ppo.max_grad_norm, at);
    read_field(p, "total_episodes", c.ppo.total_episodes, at);
    read_field(p, "log_every", c.ppo.log_every, at);
    read_field(p, "rolling_window", c.ppo.rolling_window, at);
  }
  if (j.contains("singlestep")) {
    const auto& s = j.at("singlestep");
    const std::string at = "$.singlestep";
    read_field(s, "n_relations", c.singlestep.n_relations, at);
    read_field(s, "use_dru", c.singlestep.use_dru, at);
    read_field(s, "dru_repetitions", c.singlestep.dru_repetitions, at);
    read_field(s, "extra_layers", c.singlestep.extra_layers, at);
    read_field(s, "learning_rate", c.singlestep.learning_rate, at);
    read_field(s, "budget", c.singlestep.budget, at);
  }
  read_field(j, "folds", c.folds, "$");
  read_field(j, "seeds", c.seeds, "$");
  read_field(j, "noise_grid", c.noise_grid, "$");
  read_field(j, "trajectories", c.trajectories, "$");
  read_field(j, "max_noise", c.max_noise, "$");
  read_field(j, "output_dir", out_dir, "$");
  c.output_dir = out_dir;
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_from_json(ss.str());
}

std::string experiment_to_json(const ExperimentConfig& c) {
  json j = {
      {"workload", c.workload.string()},
      {"model", c.model},
      {"vqc",
       {{"n_max", c.vqc.n_max},
        {"use_dru", c.vqc.use_dru},
        {"dru_repetitions", c.vqc.dru_repetitions},
        {"extra_layers", c.vqc.extra_layers}}},
      {"ppo",
       {{"clip_epsilon", c.ppo.clip_epsilon},
        {"value_coef", c.ppo.value_coef},
        {"entropy_coef", c.ppo.entropy_coef},
        {"gamma", c.ppo.gamma},
        {"gae_lambda", c.ppo.gae_lambda},
        {"episodes_per_update", c.ppo.episodes_per_update},
        {"epochs", c.ppo.epochs},
        {"minibatch_size", c.ppo.minibatch_size},
        {"lr_classical", c.ppo.lr_classical},
        {"lr_quantum", c.ppo.lr_quantum},
        {"lr_post", c.ppo.lr_post},
        {"normalize_advantages", c.ppo.normalize_advantages},
        {"max_grad_norm", c.ppo.max_grad_norm},
        {"total_episodes", c.ppo.total_episodes},
        {"log_every", c.ppo.log_every},
        {"rolling_window", c.ppo.rolling_window}}},
      {"singlestep",
       {{"n_relations", c.singlestep.n_relations},
        {"use_dru", c.singlestep.use_dru},
        {"dru_repetitions", c.singlestep.dru_repetitions},
        {"extra_layers", c.singlestep.extra_layers},
        {"learning_rate", c.singlestep.learning_rate},
        {"budget", c.singlestep.budget}}},
      {"folds", c.folds},
      {"seeds", c.seeds},
      {"noise_grid", c.noise_grid},
      {"trajectories", c.trajectories},
      {"max_noise", c.max_noise},
      {"output_dir", c.output_dir.string()},
  };
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Result CSV

void fill_aggregates(std::vector<ResultRow>& rows) {
  std::map<std::pair<std::string, double>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.phase, r.noise}].push_back(r.relative_cost);
  std::map<std::pair<std::string, double>, std::array<double, 3>> stats;
  for (auto& [k, v] : groups) stats[k] = {median(v), quantile(v, 0.25), quantile(v, 0.75)};
  for (auto& r : rows) {
    const auto& s = stats.at({r.phase, r.noise});
    r.median = s[0];
    r.q1 = s[1];
    r.q3 = s[2];
  }
}

void write_result_header(std::ostream& out) {
  out << kResultsSchema << '\n' << "config,fold,seed,phase,noise_p,query,relative_cost,median,q1,q3\n";
}

void write_result_rows(std::ostream& out, const std::vector<ResultRow>& rows) {
  for (const auto& r : rows)
    out << r.config << ',' << r.fold << ',' << r.seed << ',' << r.phase << ',' << fmt(r.noise) << ',' << r.query << ','
        << fmt(r.relative_cost) << ',' << fmt(r.median) << ',' << fmt(r.q1) << ',' << fmt(r.q3) << '\n';
}

std::vector<ResultRow> read_result_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open result file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kResultsSchema)
    throw IncompatibleVersionError("result file '" + path.string() + "' lacks the '" + kResultsSchema + "' header");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line == kIncompleteMarker) throw ParseError("result file '" + path.string() + "' is incomplete");
    if (line.starts_with("#") || line.starts_with("config,")) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 10 columns");
    try {
      rows.push_back({f[0], std::stoi(f[1]), std::stoull(f[2]), f[3], std::stod(f[4]), std::stoull(f[5]),
                      std::stod(f[6]), std::stod(f[7]), std::stod(f[8]), std::stod(f[9])});
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Noisy evaluation

double noisy_greedy_relative_cost(const ActorCritic& model, const JoinOrderEnv& env, const Query& query, double c_dp,
                                  const NoiseSpec& noise, Rng& rng) {
  auto state = env.reset(query, c_dp);
  while (!state.done()) {
    const auto obs = env.observe(state);
    const auto mask = env.action_mask(state);
    std::vector<double> logits;
    if (noise.probability == 0.0) {
      logits = model.logits(obs.features);
    } else {
      const auto z = simulate_noisy(model.actor_circuit(), obs.features, model.actor_circuit_params(), noise, rng).z;
      logits = model.actor_logits_from_expectations(z);
    }
    const auto probs = masked_softmax(logits, mask.valid);
    state = env.step(state, action_from_index(argmax(probs), env.options().n_max)).state;
  }
  return relative_cost(state.forest_cost(), c_dp);
}

std::vector<ResultRow> noisy_eval(const ActorCritic& model, const Workload& workload, int fold,
                                  const std::vector<double>& noise_grid, std::size_t trajectories,
                                  std::uint64_t seed, double max_noise) {
  if (model.config().actor != PartKind::kVqc)
    throw ContractError("noisy evaluation perturbs actor circuit expectations; the " + model.config().name() +
                        " model has a classical actor, so there is nothing to perturb");
  if (fold < 0 || fold >= static_cast<int>(kNumFolds)) throw ContractError("fold must lie in 0..9");
  JoinOrderEnv env(workload.catalog, EnvOptions{model.config().n_max(), Encoding::kReduced, 2});
  const auto queries = workload.fold_indices(fold);
  std::vector<ResultRow> rows;
  for (std::size_t pi = 0; pi < noise_grid.size(); ++pi) {
    NoiseSpec noise{noise_grid[pi], trajectories, max_noise};
    for (auto qi : queries) {
      Rng rng(mix_seed(mix_seed(seed, pi), qi));
      const auto& q = workload.queries.at(qi);
      const double c_dp = dp_optimal(q, workload.catalog).cost;
      rows.push_back({model.config().name(), fold, seed, "noisy-test", noise.probability, qi,
                      noisy_greedy_relative_cost(model, env, q, c_dp, noise, rng), 0, 0, 0});
    }
  }
  fill_aggregates(rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment runner

namespace {

bool file_complete(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  if (!std::getline(in, line) || line != kResultsSchema) return false;
  while (std::getline(in, line))
    if (line == kIncompleteMarker) return false;
  return true;
}

void write_atomic(const std::filesystem::path& path, const std::string& body) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << body;
    if (!out) throw std::runtime_error("failed writing '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

double test_median(const std::vector<ResultRow>& rows) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.phase == "test") v.push_back(r.relative_cost);
  return median(v);
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, const ExperimentLog& log) {
  config.validate();
  if (!std::filesystem::exists(config.workload))
    throw std::runtime_error("workload file '" + config.workload.string() + "' does not exist");
  const auto workload = load_workload(config.workload);
  std::filesystem::create_directories(config.output_dir);
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  const std::string tag = config.is_singlestep() ? "singlestep" : lower(config.model_config().name());

  ExperimentSummary summary;
  for (int fold : config.folds) {
    for (auto seed : config.seeds) {
      const std::string stem = tag + "_f" + std::to_string(fold) + "_s" + std::to_string(seed);
      const auto final_path = config.output_dir / (stem + ".csv");
      const auto partial_path = config.output_dir / (stem + ".csv.partial");
      const auto ckpt_path = config.output_dir / (stem + ".ckpt.json");
      const auto curve_path = config.output_dir / (stem + "_curve.csv");
      summary.files.push_back(final_path);
      if (file_complete(final_path)) {
        say("skip " + stem + " (complete)");
        summary.test_medians.push_back(test_median(read_result_csv(final_path)));
        ++summary.jobs_skipped;
        continue;
      }
      {
        std::ofstream marker(partial_path);
        marker << kResultsSchema << '\n' << kIncompleteMarker << '\n';
      }

      std::vector<ResultRow> rows;
      const std::string name = config.is_singlestep() ? "Single-Step" : config.model_config().name();
      if (config.is_singlestep()) {
        auto sc = config.singlestep;
        sc.seed = seed;
        std::vector<double> test;
        std::vector<std::size_t> test_q = workload.fold_indices(fold);
        if (std::filesystem::exists(ckpt_path)) {
          say("reuse checkpoint " + ckpt_path.string());
          const auto model = restore_singlestep(load_checkpoint(ckpt_path));
          test = evaluate_singlestep(model, workload, test_q);
        } else {
          say("train " + stem);
          auto res = train_singlestep(workload, fold, sc);
          save_checkpoint(make_checkpoint(res.model, seed, sc.budget), ckpt_path);
          test = res.test_relative_costs;
        }
        for (std::size_t i = 0; i < test_q.size(); ++i)
          rows.push_back({name, fold, seed, "test", 0.0, test_q[i], test[i], 0, 0, 0});
      } else {
        auto pc = config.ppo;
        pc.seed = seed;
        const auto mc = config.model_config();
        std::optional<ActorCritic> model;
        if (std::filesystem::exists(ckpt_path)) {
          say("reuse checkpoint " + ckpt_path.string());
          model.emplace(restore_model(load_checkpoint(ckpt_path)));
        } else {
          say("train " + stem);
          auto res = train(workload, fold, mc, pc, [&](const CurvePoint& p) {
            say(stem + " episode " + std::to_string(p.episode) + " rolling median " + fmt(p.rolling_median));
          });
          std::ostringstream curve;
          write_training_log(curve, res.curve);
          write_atomic(curve_path, curve.str());
          save_checkpoint(make_checkpoint(res.model, seed, pc.total_episodes), ckpt_path);
          model.emplace(std::move(res.model));
        }
        // Training rows come from the saved curve so reruns reproduce them.
        if (std::filesystem::exists(curve_path)) {
          std::ifstream in(curve_path);
          std::string line;
          std::getline(in, line);
          while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string ep, med;
            std::getline(ss, ep, ',');
            std::getline(ss, med, ',');
            rows.push_back({name, fold, seed, "train", 0.0, std::stoull(ep), std::stod(med), 0, 0, 0});
          }
        }
        const auto c_dp = optimal_costs(workload);
        const auto test_q = workload.fold_indices(fold);
        const auto test = evaluate_greedy(*model, workload, c_dp, test_q);
        for (std::size_t i = 0; i < test_q.size(); ++i)
          rows.push_back({name, fold, seed, "test", 0.0, test_q[i], test[i], 0, 0, 0});
        if (!config.noise_grid.empty()) {
          say("noisy evaluation " + stem);
          auto noisy = noisy_eval(*model, workload, fold, config.noise_grid, config.trajectories, seed, config.max_noise);
          rows.insert(rows.end(), noisy.begin(), noisy.end());
        }
      }
      fill_aggregates(rows);
      for (const auto& r : rows)
        if (r.relative_cost < 1.0 - 1e-9)
          throw NumericalError("relative cost " + fmt(r.relative_cost) + " below 1 in " + stem);
      std::ostringstream body;
      write_result_header(body);
      write_result_rows(body, rows);
      write_atomic(final_path, body.str());
      std::filesystem::remove(partial_path);
      summary.test_medians.push_back(test_median(rows));
      ++summary.jobs_run;
      say("done " + stem + " test median " + fmt(summary.test_medians.back()));
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Parameter counts and resources

ParamBreakdown count_parameters(const ModelConfig& config) {
  const auto n = config.n_max();
  if (n < 2) throw ContractError("count_parameters needs n_max >= 2");
  const std::size_t obs = reduced_length(n);
  const std::size_t actions = action_count(n);
  const std::size_t nq = config.vqc.num_qubits();
  auto mlp = [&](std::size_t in, std::size_t out) {
    std::vector<std::size_t> sizes{in};
    for (std::size_t l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.hidden_units);
    sizes.push_back(out);
    return dense_param_count(sizes);
  };
  ParamBreakdown b;
  if (config.actor == PartKind::kClassical) {
    b.classical += mlp(obs, actions);
  } else {
    b.quantum += config.vqc.param_count();
    b.post += nq * actions + actions;
  }
  if (config.critic == PartKind::kClassical) {
    b.classical += mlp(obs, 1);
  } else {
    b.quantum += config.vqc.param_count();
    b.post += CriticScale::kParamCount;
  }
  return b;
}

ParamBreakdown count_parameters(const ActorCritic& model) {
  ParamBreakdown b;
  for (const auto& block : model.blocks()) {
    switch (block.group) {
      case ParamGroup::kClassical: b.classical += block.values.size(); break;
      case ParamGroup::kQuantum: b.quantum += block.values.size(); break;
      case ParamGroup::kPostProcessing: b.post += block.values.size(); break;
    }
  }
  return b;
}

ResourceEstimate resource_estimate(std::size_t n, Approach approach) {
  if (n < 2) throw ContractError("resource_estimate needs n >= 2");
  if (approach == Approach::kMultiStep) {
    const VqcShape one_block{n, true, 1, 0};
    return {one_block.num_qubits(), build_vqc(one_block).depth()};
  }
  // One re-uploading block mirrors the multi-step one: n encoding + layer pairs.
  return {n, build_singlestep_circuit(n, n, true).depth()};
}

// ---------------------------------------------------------------------------
// Adam timing

std::vector<AdamTiming> adam_timing(const std::vector<std::size_t>& sizes, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ContractError("adam_timing needs at least one sample");
  std::vector<AdamTiming> out;
  Rng rng(seed);
  for (auto size : sizes) {
    if (size == 0) throw ContractError("adam_timing sizes must be positive");
    std::vector<double> params(size), grads(size);
    for (auto& p : params) p = rng.uniform(-1.0, 1.0);
    for (auto& g : grads) g = rng.uniform(-1e-3, 1e-3);
    Adam adam(size, AdamOptions{});
    for (int w = 0; w < 10; ++w) adam.step(params, grads);
    std::vector<double> ns(samples);
    for (std::size_t s = 0; s < samples; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      adam.step(params, grads);
      const auto t1 = std::chrono::steady_clock::now();
      ns[s] = std::chrono::duration<double, std::nano>(t1 - t0).count();
    }
    out.push_back({size, median(ns), quantile(ns, 0.25), quantile(ns, 0.75), samples});
  }
  return out;
}

void write_adam_timing(std::ostream& out, const std::vector<AdamTiming>& rows) {
  out << "# qrljo-adam-timing v1\n" << "size,samples,median_ns,q1_ns,q3_ns\n";
  for (const auto& r : rows)
    out << r.size << ',' << r.samples << ',' << fmt(r.median_ns) << ',' << fmt(r.q1_ns) << ',' << fmt(r.q3_ns) << '\n';
}

// ---------------------------------------------------------------------------

std::size_t merge_results(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output) {
  if (inputs.empty()) throw ContractError("merge needs at least one input file");
  std::vector<ResultRow> all;
  for (const auto& p : inputs) {
    auto rows = read_result_csv(p);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  std::ostringstream body;
  write_result_header(body);
  write_result_rows(body, all);
  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  write_atomic(output, body.str());
  return all.size();
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("spearman needs two equal-length samples of size >= 2");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace qrljo
