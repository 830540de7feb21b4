#include "qrljo/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "qrljo/env.hpp"
#include "qrljo/errors.hpp"

namespace qrljo {

const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kClassical: return "classical";
    case ParamGroup::kQuantum: return "quantum";
    case ParamGroup::kPostProcessing: return "post";
  }
  return "?";
}

std::string ModelConfig::name() const {
  if (actor == PartKind::kClassical && critic == PartKind::kClassical) return "Classical";
  if (actor == PartKind::kClassical) return "Q-Critic";
  if (critic == PartKind::kClassical) return "Q-Actor";
  return "Fully-Quantum";
}

ModelConfig ModelConfig::classical(std::size_t n_max) {
  ModelConfig c;
  c.vqc.n_max = n_max;
  return c;
}

ModelConfig ModelConfig::q_critic(const VqcShape& vqc) {
  ModelConfig c;
  c.critic = PartKind::kVqc;
  c.vqc = vqc;
  return c;
}

ModelConfig ModelConfig::q_actor(const VqcShape& vqc) {
  ModelConfig c;
  c.actor = PartKind::kVqc;
  c.vqc = vqc;
  return c;
}

ModelConfig ModelConfig::fully_quantum(const VqcShape& vqc) {
  ModelConfig c;
  c.actor = c.critic = PartKind::kVqc;
  c.vqc = vqc;
  return c;
}

ModelConfig ModelConfig::from_name(const std::string& name, const VqcShape& vqc) {
  std::string n;
  for (char ch : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (n == "classical") {
    auto c = classical(vqc.n_max);
    c.vqc = vqc;
    return c;
  }
  if (n == "q-critic" || n == "qcritic") return q_critic(vqc);
  if (n == "q-actor" || n == "qactor") return q_actor(vqc);
  if (n == "fully-quantum" || n == "fullyquantum" || n == "fully_quantum") return fully_quantum(vqc);
  throw ContractError("unknown model configuration '" + name + "'");
}

// ---------------------------------------------------------------------------

ActorCritic::ActorCritic(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      observation_size_(reduced_length(config.n_max())),
      num_actions_(action_count(config.n_max())) {
  if (config.n_max() < 2) throw ContractError("model needs n_max >= 2");
  Rng rng(mix_seed(seed, 0x40de1));
  auto init_angles = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  };

  if (config.actor == PartKind::kClassical) {
    actor_net_ = DenseNet::mlp(observation_size_, num_actions_, config.hidden_units, config.hidden_layers);
    actor_net_.init_uniform(rng);
  } else {
    actor_circuit_ = build_vqc(config.vqc);
    init_angles(actor_circuit_params_, actor_circuit_.param_count());
    actor_head_ = DenseNet({actor_circuit_.num_qubits(), num_actions_}, Activation::kIdentity, Activation::kIdentity);
    actor_head_.init_uniform(rng);
  }
  if (config.critic == PartKind::kClassical) {
    critic_net_ = DenseNet::mlp(observation_size_, 1, config.hidden_units, config.hidden_layers);
    critic_net_.init_uniform(rng);
  } else {
    critic_circuit_ = build_vqc(config.vqc);
    init_angles(critic_circuit_params_, critic_circuit_.param_count());
    critic_scale_ = {1.0, 0.0};
  }
}

std::vector<ParamBlockView> ActorCritic::blocks() {
  std::vector<ParamBlockView> out;
  if (config_.actor == PartKind::kClassical) {
    out.push_back({"actor.net", ParamGroup::kClassical, actor_net_.params()});
  } else {
    out.push_back({"actor.circuit", ParamGroup::kQuantum, actor_circuit_params_});
    out.push_back({"actor.head", ParamGroup::kPostProcessing, actor_head_.params()});
  }
  if (config_.critic == PartKind::kClassical) {
    out.push_back({"critic.net", ParamGroup::kClassical, critic_net_.params()});
  } else {
    out.push_back({"critic.circuit", ParamGroup::kQuantum, critic_circuit_params_});
    out.push_back({"critic.scale", ParamGroup::kPostProcessing, critic_scale_});
  }
  return out;
}

std::vector<ConstParamBlockView> ActorCritic::blocks() const {
  std::vector<ConstParamBlockView> out;
  for (const auto& b : const_cast<ActorCritic*>(this)->blocks()) out.push_back({b.name, b.group, b.values});
  return out;
}

std::size_t ActorCritic::param_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.values.size();
  return n;
}

ActorCritic::Gradients ActorCritic::zero_gradients() const {
  Gradients g;
  for (const auto& b : blocks()) g.emplace_back(b.values.size(), 0.0);
  return g;
}

ActorCritic::Pass ActorCritic::forward(const Eigen::MatrixXd& observations) const {
  if (static_cast<std::size_t>(observations.rows()) != observation_size_)
    throw ContractError("observation length " + std::to_string(observations.rows()) + " does not match the model (" +
                        std::to_string(observation_size_) + ")");
  const auto batch = observations.cols();
  Pass pass;
  pass.observations = observations;

  if (config_.actor == PartKind::kClassical) {
    pass.logits = actor_net_.forward(observations, &pass.actor_cache);
  } else {
    const auto nq = static_cast<Eigen::Index>(actor_circuit_.num_qubits());
    Eigen::MatrixXd z(nq, batch);
    pass.actor_states.reserve(static_cast<std::size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::VectorXd x = observations.col(b);
      pass.actor_states.push_back(simulate(actor_circuit_, {x.data(), static_cast<std::size_t>(x.size())},
                                           actor_circuit_params_));
      ++circuit_evaluations_;
      const auto e = expect_z_each(pass.actor_states.back());
      for (Eigen::Index q = 0; q < nq; ++q) z(q, b) = e[static_cast<std::size_t>(q)];
    }
    pass.logits = actor_head_.forward(z, &pass.actor_cache);
  }

  if (config_.critic == PartKind::kClassical) {
    pass.values = critic_net_.forward(observations, &pass.critic_cache).row(0).transpose();
  } else {
    pass.values.resize(batch);
    pass.critic_parity.resize(batch);
    pass.critic_states.reserve(static_cast<std::size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::VectorXd x = observations.col(b);
      pass.critic_states.push_back(simulate(critic_circuit_, {x.data(), static_cast<std::size_t>(x.size())},
                                            critic_circuit_params_));
      ++circuit_evaluations_;
      const double p = expect_z_all(pass.critic_states.back());
      pass.critic_parity(b) = p;
      pass.values(b) = critic_scale_[0] * p + critic_scale_[1];
    }
  }
  return pass;
}

std::vector<double> ActorCritic::circuit_gradient(const CircuitSpec& spec, std::span<const double> inputs,
                                                  std::span<const double> params, const Statevector& final_state,
                                                  const Observable& observable) const {
  if (config_.gradient_method == GradientMethod::kParameterShift) {
    circuit_evaluations_ += 2 * spec.param_count();
    return gradients_parameter_shift(spec, inputs, params, observable);
  }
  ++circuit_evaluations_;
  return gradients_adjoint(spec, inputs, params, observable, final_state).gradient;
}

void ActorCritic::backward(const Pass& pass, const Eigen::MatrixXd& dlogits, const Eigen::VectorXd& dvalues,
                           Gradients& grads) const {
  const auto batch = pass.observations.cols();
  if (dlogits.rows() != static_cast<Eigen::Index>(num_actions_) || dlogits.cols() != batch || dvalues.size() != batch)
    throw ContractError("backward: gradient shapes do not match the forward batch");
  if (grads.size() != blocks().size()) throw ContractError("backward: gradient blocks do not match the model");
  std::size_t block = 0;

  if (config_.actor == PartKind::kClassical) {
    actor_net_.backward(pass.actor_cache, dlogits, grads[block++]);
  } else {
    auto& g_circuit = grads[block++];
    auto& g_head = grads[block++];
    const Eigen::MatrixXd dz = actor_head_.backward(pass.actor_cache, dlogits, g_head);
    for (Eigen::Index b = 0; b < batch; ++b) {
      std::vector<double> w(static_cast<std::size_t>(dz.rows()));
      for (Eigen::Index q = 0; q < dz.rows(); ++q) w[static_cast<std::size_t>(q)] = dz(q, b);
      const Eigen::VectorXd x = pass.observations.col(b);
      const auto g = circuit_gradient(actor_circuit_, {x.data(), static_cast<std::size_t>(x.size())},
                                      actor_circuit_params_, pass.actor_states[static_cast<std::size_t>(b)],
                                      Observable::weighted_z(std::move(w)));
      for (std::size_t i = 0; i < g.size(); ++i) g_circuit[i] += g[i];
    }
  }

  if (config_.critic == PartKind::kClassical) {
    critic_net_.backward(pass.critic_cache, dvalues.transpose(), grads[block++]);
  } else {
    auto& g_circuit = grads[block++];
    auto& g_scale = grads[block++];
    for (Eigen::Index b = 0; b < batch; ++b) {
      const double dv = dvalues(b);
      g_scale[0] += dv * pass.critic_parity(b);
      g_scale[1] += dv;
      const double dp = dv * critic_scale_[0];
      if (dp == 0.0) continue;
      const Eigen::VectorXd x = pass.observations.col(b);
      const auto g = circuit_gradient(critic_circuit_, {x.data(), static_cast<std::size_t>(x.size())},
                                      critic_circuit_params_, pass.critic_states[static_cast<std::size_t>(b)],
                                      Observable::parity());
      for (std::size_t i = 0; i < g.size(); ++i) g_circuit[i] += dp * g[i];
    }
  }
}

std::vector<double> ActorCritic::logits(std::span<const double> observation) const {
  Eigen::MatrixXd obs = Eigen::Map<const Eigen::VectorXd>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  if (config_.actor == PartKind::kClassical) {
    const Eigen::MatrixXd out = actor_net_.forward(obs);
    return {out.data(), out.data() + out.size()};
  }
  const auto state = simulate(actor_circuit_, observation, actor_circuit_params_);
  ++circuit_evaluations_;
  return actor_logits_from_expectations(expect_z_each(state));
}

double ActorCritic::value(std::span<const double> observation) const {
  if (config_.critic == PartKind::kClassical) {
    Eigen::MatrixXd obs = Eigen::Map<const Eigen::VectorXd>(observation.data(), static_cast<Eigen::Index>(observation.size()));
    return critic_net_.forward(obs)(0, 0);
  }
  const auto state = simulate(critic_circuit_, observation, critic_circuit_params_);
  ++circuit_evaluations_;
  return critic_scale_[0] * expect_z_all(state) + critic_scale_[1];
}

std::vector<double> ActorCritic::actor_logits_from_expectations(std::span<const double> z) const {
  if (config_.actor != PartKind::kVqc) throw ContractError("the actor of this model is not a VQC");
  if (z.size() != actor_circuit_.num_qubits()) throw ContractError("expectation vector has the wrong width");
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  const Eigen::MatrixXd out = actor_head_.forward(in);
  return {out.data(), out.data() + out.size()};
}

// ---------------------------------------------------------------------------
// Checkpoints

using nlohmann::json;

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  json blocks = json::array();
  for (const auto& b : ck.blocks) blocks.push_back({{"name", b.name}, {"group", b.group}, {"values", b.values}});
  json doc = {{"format", "qrljo-checkpoint"}, {"version", 1},     {"kind", ck.kind}, {"settings", ck.settings},
              {"seed", ck.seed},              {"step", ck.step}, {"blocks", blocks}};
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    out << doc.dump() << '\n';
    if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "qrljo-checkpoint") throw ParseError("checkpoint field 'format': missing or wrong");
  if (doc.value("version", 0) != 1) throw IncompatibleVersionError("unsupported checkpoint version");
  Checkpoint ck;
  try {
    ck.kind = doc.at("kind").get<std::string>();
    ck.settings = doc.at("settings").get<std::map<std::string, double>>();
    ck.seed = doc.at("seed").get<std::uint64_t>();
    ck.step = doc.at("step").get<std::uint64_t>();
    for (const auto& b : doc.at("blocks"))
      ck.blocks.push_back({b.at("name").get<std::string>(), b.at("group").get<std::string>(),
                           b.at("values").get<std::vector<double>>()});
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint field error: ") + e.what());
  }
  return ck;
}

Checkpoint make_checkpoint(const ActorCritic& model, std::uint64_t seed, std::uint64_t step) {
  const auto& c = model.config();
  Checkpoint ck;
  ck.kind = c.name();
  ck.settings = {{"actor_vqc", c.actor == PartKind::kVqc ? 1.0 : 0.0},
                 {"critic_vqc", c.critic == PartKind::kVqc ? 1.0 : 0.0},
                 {"n_max", static_cast<double>(c.vqc.n_max)},
                 {"use_dru", c.vqc.use_dru ? 1.0 : 0.0},
                 {"dru_repetitions", static_cast<double>(c.vqc.dru_repetitions)},
                 {"extra_layers", static_cast<double>(c.vqc.extra_layers)},
                 {"hidden_units", static_cast<double>(c.hidden_units)},
                 {"hidden_layers", static_cast<double>(c.hidden_layers)}};
  ck.seed = seed;
  ck.step = step;
  for (const auto& b : model.blocks())
    ck.blocks.push_back({b.name, to_string(b.group), {b.values.begin(), b.values.end()}});
  return ck;
}

ActorCritic restore_model(const Checkpoint& ck) {
  auto get = [&](const char* key) {
    auto it = ck.settings.find(key);
    if (it == ck.settings.end()) throw ParseError(std::string("checkpoint setting '") + key + "' missing");
    return it->second;
  };
  if (ck.kind == "singlestep") throw ContractError("checkpoint holds a single-step model, not an actor-critic");
  ModelConfig c;
  c.actor = get("actor_vqc") != 0.0 ? PartKind::kVqc : PartKind::kClassical;
  c.critic = get("critic_vqc") != 0.0 ? PartKind::kVqc : PartKind::kClassical;
  c.vqc.n_max = static_cast<std::size_t>(get("n_max"));
  c.vqc.use_dru = get("use_dru") != 0.0;
  c.vqc.dru_repetitions = static_cast<std::size_t>(get("dru_repetitions"));
  c.vqc.extra_layers = static_cast<std::size_t>(get("extra_layers"));
  c.hidden_units = static_cast<std::size_t>(get("hidden_units"));
  c.hidden_layers = static_cast<std::size_t>(get("hidden_layers"));
  ActorCritic model(c, ck.seed);
  auto blocks = model.blocks();
  if (blocks.size() != ck.blocks.size()) throw ParseError("checkpoint block count does not match the architecture");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].name != ck.blocks[i].name || blocks[i].values.size() != ck.blocks[i].values.size())
      throw ParseError("checkpoint block '" + ck.blocks[i].name + "' does not match the architecture");
    std::copy(ck.blocks[i].values.begin(), ck.blocks[i].values.end(), blocks[i].values.begin());
  }
  return model;
}

}  // namespace qrljo
