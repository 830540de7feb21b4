// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qrljo/bench.hpp"
#include "qrljo/env.hpp"
#include "qrljo/jointree.hpp"
#include "qrljo/nn.hpp"
#include "qrljo/ppo.hpp"
#include "qrljo/qsim.hpp"

using namespace qrljo;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Random episode driver shared by criteria 2, 3 and 10.
struct RolloutStats {
  std::size_t episodes = 0;
  std::size_t actions = 0;
  std::size_t invalid = 0;
  std::size_t wrong_length = 0;
  std::size_t reward_out_of_range = 0;
  double worst_telescoping = 0.0;
};

void random_rollouts(std::size_t episodes, std::size_t n_max, std::uint64_t seed, RolloutStats& st) {
  Rng rng(seed);
  const auto catalog = generate_catalog(mix_seed(seed, 1), 12, 4);
  const JoinOrderEnv env(catalog, {n_max, Encoding::kReduced, 2});
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto n = 2 + rng.index(n_max - 1);
    const auto q = generate_query(rng.next_u64(), catalog, n);
    auto state = env.reset(q);
    // Fresh random policy per episode: Gaussian-ish logits over the whole action space.
    std::vector<double> logits(action_count(n_max));
    for (auto& z : logits) z = 3.0 * (rng.uniform() + rng.uniform() + rng.uniform() - 1.5);
    double sum_ct = 0.0;
    std::size_t steps = 0;
    const double lo = (3.0 - static_cast<double>(n)) / static_cast<double>(n - 1);
    const double hi = 2.0 / static_cast<double>(n - 1);
    while (!state.done()) {
      const auto mask = env.action_mask(state);
      const auto p = masked_softmax(logits, mask.valid);
      const auto a = sample_categorical(p, rng);
      ++st.actions;
      if (!mask.valid[a]) {
        ++st.invalid;
        break;
      }
      auto r = env.step(state, action_from_index(a, n_max));
      sum_ct += r.cost_delta;
      if (!(r.reward >= lo - 1e-15 && r.reward <= hi + 1e-15)) ++st.reward_out_of_range;
      state = std::move(r.state);
      ++steps;
      if (steps > n) break;
    }
    if (steps != n - 1) ++st.wrong_length;
    if (state.done()) {
      const double c = cost_out(state.final_tree(), q, catalog);
      st.worst_telescoping = std::max(st.worst_telescoping, std::abs(sum_ct - c) / c);
    }
    ++st.episodes;
  }
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const auto catalog = generate_catalog(7, 12, 4);
  std::size_t mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const auto n = 2 + rng.index(5);
    const auto q = generate_query(rng.next_u64(), catalog, n);
    const double dp = dp_optimal(q, catalog).cost;
    double best = INFINITY;
    for (const auto& t : enumerate_bushy(q, false)) best = std::min(best, cost_out(t, q, catalog));
    if (dp != best) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0, fmt("200 queries, %zu mismatches, %.2f s", mismatches, secs)};
}

Outcome criterion2() {
  RolloutStats st;
  random_rollouts(1000, 8, 202, st);
  return {st.episodes == 1000 && st.invalid == 0 && st.worst_telescoping <= 1e-9,
          fmt("1000 rollouts, max relative gap %.3e", st.worst_telescoping)};
}

Outcome criterion3() {
  RolloutStats st;
  random_rollouts(2000, 8, 303, st);
  const double clip = clipped_reward(10.0, 1.0, 4);
  const bool exact = clip == -1.0 / 3.0;
  return {st.reward_out_of_range == 0 && exact,
          fmt("%zu steps, %zu rewards out of range, clip case %.17g", st.actions, st.reward_out_of_range, clip)};
}

Outcome criterion4() {
  const auto t0 = Clock::now();
  Rng rng(404);
  const GateKind rots[] = {GateKind::kRx, GateKind::kRy, GateKind::kRz};
  double worst = 0.0;
  std::size_t checked = 0;
  for (int c = 0; c < 100; ++c) {
    const auto nq = 1 + rng.index(4);
    const auto layers = 1 + rng.index(3);
    CircuitSpec spec(nq);
    std::size_t pi = 0, ii = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t q = 0; q < nq; ++q) {
        spec.rotation(rots[rng.index(3)], q, AngleSource::input(ii++, std::numbers::pi));
        spec.rotation(rots[rng.index(3)], q, AngleSource::param(pi++));
        spec.rotation(rots[rng.index(3)], q, AngleSource::param(pi++));
      }
      for (std::size_t q = 0; q + 1 < nq; ++q) spec.cz(q, q + 1);
    }
    std::vector<double> in(ii), p(pi);
    for (auto& x : in) x = rng.uniform();
    for (auto& x : p) x = rng.uniform(0.0, 2 * std::numbers::pi);
    const auto obs = rng.bernoulli(0.5) ? Observable::parity() : Observable::z(rng.index(nq));
    const auto g = gradients_parameter_shift(spec, in, p, obs);
    const double h = 1e-4;
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto up = p, dn = p;
      up[k] += h;
      dn[k] -= h;
      const double fd = (obs.expectation(simulate(spec, in, up)) - obs.expectation(simulate(spec, in, dn))) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[k]));
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 30.0, fmt("%zu partials, max |ps - fd| %.3e, %.2f s", checked, worst, secs)};
}

Outcome criterion5() {
  CircuitSpec spec(1);
  spec.rotation(GateKind::kRx, 0, AngleSource::fixed(0.0));
  bool ok = true;
  std::ostringstream d;
  for (double p : {0.01, 0.03, 0.05}) {
    Rng rng(mix_seed(505, static_cast<std::uint64_t>(p * 1000)));
    const auto r = simulate_noisy(spec, {}, {}, NoiseSpec{p, 10000}, rng);
    const double expect = 1.0 - 4.0 * p / 3.0;
    const double z = std::abs(r.z[0] - expect) / r.z_stderr[0];
    ok = ok && z <= 3.0;
    d << fmt("p=%.2f <Z>=%.4f expected %.4f (%.2f se) ", p, r.z[0], expect, z);
  }
  return {ok, d.str()};
}

Outcome criterion6() {
  // 39 tables carrying 208 attributes in total, one alias each.
  std::vector<Table> tables;
  std::size_t attrs = 0;
  for (std::size_t t = 0; t < 39; ++t) {
    const std::size_t k = t < 13 ? 6 : 5;
    Table tab{"t" + std::to_string(t), 1000, {}};
    for (std::size_t a = 0; a < k; ++a) tab.attributes.push_back("c" + std::to_string(a));
    attrs += k;
    tables.push_back(std::move(tab));
  }
  const Catalog catalog(std::move(tables));
  const JoinOrderEnv base(catalog, {17, Encoding::kBaseline, 1});
  QueryOptions qo;
  qo.alias_repeat_probability = 0.0;
  const auto q = generate_query(606, catalog, 17, qo);
  const auto base_len = base.observe(base.reset(q)).features.size();
  const JoinOrderEnv red17(catalog, {17, Encoding::kReduced, 1});
  const auto red17_len = red17.observe(red17.reset(q)).features.size();
  const JoinOrderEnv red4(catalog, {4, Encoding::kReduced, 1});
  const auto q4 = generate_query(607, catalog, 4, qo);
  const auto red4_len = red4.observe(red4.reset(q4)).features.size();
  return {attrs == 208 && base_len == 3250 && red17_len == 612 && red4_len == 40,
          fmt("baseline(a=%zu, r=39) %zu, reduced(17) %zu, reduced(4) %zu", attrs, base_len, red17_len, red4_len)};
}

Outcome criterion7() {
  auto reduction = [](std::size_t n, bool instantiate) {
    const VqcShape s{n, true, 5, 0};
    const auto cl = ModelConfig::classical(n);
    const auto qc = ModelConfig::q_critic(s);
    double c = static_cast<double>(count_parameters(cl).total());
    double q = static_cast<double>(count_parameters(qc).total());
    bool agree = true;
    if (instantiate) {
      agree = count_parameters(ActorCritic(cl, 0)).total() == count_parameters(cl).total() &&
              count_parameters(ActorCritic(qc, 0)).total() == count_parameters(qc).total() &&
              s.variational_layers() == 5 * n;
    }
    return std::pair{1.0 - q / c, agree};
  };
  const auto [r4, a4] = reduction(4, true);
  const auto [r30, a30] = reduction(30, true);
  const bool ok = std::abs(r4 - 0.47) <= 0.02 && std::abs(r30 - 0.38) <= 0.02 && a4 && a30;
  return {ok, fmt("n=4: %.2f%% fewer, n=30: %.2f%% fewer, instantiated counts %s", 100 * r4, 100 * r30,
                  a4 && a30 ? "agree" : "DISAGREE")};
}

// Desk-scale training setup shared by criteria 8 and 9.
Workload desk_workload() {
  const auto catalog = generate_catalog(42, 10, 5);
  return make_workload(42, catalog, 500, 4);
}

PPOConfig desk_ppo(std::uint64_t seed) {
  PPOConfig c;
  c.seed = seed;
  c.total_episodes = 10000;
  c.lr_classical = 5e-4;
  c.episodes_per_update = 16;
  c.minibatch_size = 16;
  c.max_grad_norm = 0.5;
  return c;
}

Outcome criterion8() {
  const auto w = desk_workload();
  const VqcShape shape{4, true, 5, 0};
  std::vector<double> cl_final, qc_final;
  std::size_t reached = 0;
  std::ostringstream d;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t0 = Clock::now();
    const auto r = train(w, 0, ModelConfig::classical(4), desk_ppo(seed));
    double best = INFINITY;
    for (const auto& p : r.curve) best = std::min(best, p.rolling_median);
    if (best <= 1.05) ++reached;
    cl_final.push_back(r.final_rolling_median);
    std::printf("  classical seed %llu: best %.4f final %.4f (%.0f s)\n", static_cast<unsigned long long>(seed), best,
                r.final_rolling_median, seconds_since(t0));
    std::fflush(stdout);
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t0 = Clock::now();
    const auto r = train(w, 0, ModelConfig::q_critic(shape), desk_ppo(seed));
    qc_final.push_back(r.final_rolling_median);
    std::printf("  q-critic seed %llu: final %.4f (%.0f s)\n", static_cast<unsigned long long>(seed),
                r.final_rolling_median, seconds_since(t0));
    std::fflush(stdout);
  }
  const double cl_med = median(cl_final), qc_med = median(qc_final);
  const bool within = qc_med <= 1.10 * cl_med;
  return {reached >= 3 && within,
          fmt("classical reached <=1.05 in %zu/5 seeds; final medians classical %.4f, q-critic %.4f (ratio %.3f)",
              reached, cl_med, qc_med, qc_med / cl_med)};
}

Outcome criterion9() {
  const auto w = desk_workload();
  auto cfg = desk_ppo(9);
  cfg.total_episodes = 3000;
  const auto t0 = Clock::now();
  const auto r = train(w, 0, ModelConfig::q_actor(VqcShape{4, true, 5, 0}), cfg);
  std::printf("  q-actor trained: final rolling median %.4f (%.0f s)\n", r.final_rolling_median, seconds_since(t0));
  const std::vector<double> grid{0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
  const auto rows = noisy_eval(r.model, w, 0, grid, 128, 9);
  std::vector<double> medians;
  for (double p : grid) {
    std::vector<double> v;
    for (const auto& row : rows)
      if (row.noise == p) v.push_back(row.relative_cost);
    medians.push_back(median(v));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < medians.size(); ++i) monotone = monotone && medians[i] >= medians[i - 1];
  const double rho = spearman(grid, medians);
  std::ostringstream d;
  d << "medians";
  for (double m : medians) d << fmt(" %.4f", m);
  d << fmt(", spearman %.3f", rho);
  return {monotone && rho >= 0.8, d.str()};
}

Outcome criterion10() {
  RolloutStats st;
  std::size_t batches = 0;
  while (st.actions < 100000) random_rollouts(1000, 10, 1010 + batches++, st);
  return {st.invalid == 0 && st.wrong_length == 0,
          fmt("%zu actions over %zu episodes, %zu invalid, %zu wrong-length episodes", st.actions, st.episodes,
              st.invalid, st.wrong_length)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qrljo acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  if (only.empty())
    for (int i = 1; i <= 10; ++i) only.push_back(i);
  int failed = 0;
  for (int i : only) {
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(i - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("CRITERION %d %s: %s\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
