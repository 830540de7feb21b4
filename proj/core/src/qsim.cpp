#include "qrljo/qsim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qrljo/errors.hpp"

namespace qrljo {

AngleSource AngleSource::input(std::size_t i, double scale) { return {AngleKind::kInput, i, scale, 0.0}; }

// ---------------------------------------------------------------------------
// CircuitSpec

CircuitSpec::CircuitSpec(std::size_t n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits == 0 || n_qubits > 64) throw ContractError("circuit needs 1..64 qubits");
}

void CircuitSpec::rotation(GateKind kind, std::size_t qubit, AngleSource angle) {
  if (kind == GateKind::kCz) throw ContractError("use cz() for entangling gates");
  if (qubit >= n_qubits_) throw ContractError("rotation qubit out of range");
  if (angle.kind == AngleKind::kNone) throw ContractError("rotation needs an angle source");
  if (angle.kind == AngleKind::kInput) input_count_ = std::max(input_count_, angle.index + 1);
  if (angle.kind == AngleKind::kParam) param_count_ = std::max(param_count_, angle.index + 1);
  gates_.push_back({kind, qubit, 0, angle});
}

void CircuitSpec::cz(std::size_t a, std::size_t b) {
  if (a >= n_qubits_ || b >= n_qubits_ || a == b) throw ContractError("CZ needs two distinct qubits in range");
  gates_.push_back({GateKind::kCz, b, a, {}});
}

void CircuitSpec::reserve_slots(std::size_t inputs, std::size_t params) {
  input_count_ = std::max(input_count_, inputs);
  param_count_ = std::max(param_count_, params);
}

std::size_t CircuitSpec::depth() const {
  std::vector<std::size_t> t(n_qubits_, 0);
  std::size_t d = 0;
  for (const auto& g : gates_) {
    if (g.kind == GateKind::kCz) {
      const auto layer = std::max(t[g.control], t[g.target]) + 1;
      t[g.control] = t[g.target] = layer;
      d = std::max(d, layer);
    } else {
      d = std::max(d, ++t[g.target]);
    }
  }
  return d;
}

void CircuitSpec::dump(std::ostream& out) const {
  static constexpr const char* kNames[] = {"rx", "ry", "rz", "cz"};
  for (const auto& g : gates_) {
    out << kNames[static_cast<int>(g.kind)] << ' ';
    if (g.kind == GateKind::kCz) {
      out << g.control << ' ' << g.target << " -\n";
      continue;
    }
    out << g.target << ' ';
    switch (g.angle.kind) {
      case AngleKind::kInput: out << "in[" << g.angle.index << "]*" << g.angle.scale; break;
      case AngleKind::kParam: out << "p[" << g.angle.index << ']'; break;
      case AngleKind::kFixed: out << "fixed(" << g.angle.value << ')'; break;
      case AngleKind::kNone: out << '-'; break;
    }
    out << '\n';
  }
}

std::string CircuitSpec::dump() const {
  std::ostringstream ss;
  dump(ss);
  return ss.str();
}

// ---------------------------------------------------------------------------
// VQC construction

std::size_t VqcShape::variational_layers() const {
  return use_dru ? dru_repetitions * n_max : n_max + extra_layers;
}

std::size_t append_variational_layer(CircuitSpec& spec, std::size_t first_param) {
  const auto nq = spec.num_qubits();
  for (std::size_t q = 0; q < nq; ++q) spec.rotation(GateKind::kRy, q, AngleSource::param(first_param + q));
  for (std::size_t q = 0; q < nq; ++q) spec.rotation(GateKind::kRz, q, AngleSource::param(first_param + nq + q));
  if (nq == 2) {
    spec.cz(0, 1);
  } else if (nq > 2) {
    for (std::size_t q = 0; q < nq; ++q) spec.cz(q, (q + 1) % nq);
  }
  return first_param + 2 * nq;
}

CircuitSpec build_vqc(const VqcShape& shape) {
  if (shape.n_max < 2) throw ContractError("build_vqc: n_max must be >= 2");
  if (shape.use_dru && shape.dru_repetitions == 0) throw ContractError("build_vqc: DRU needs at least one repetition");
  const auto nq = shape.num_qubits();
  CircuitSpec spec(nq);
  std::size_t next = 0;
  auto encoding_layer = [&](std::size_t part) {
    for (std::size_t q = 0; q < nq; ++q)
      spec.rotation(GateKind::kRx, q, AngleSource::input(part * nq + q, std::numbers::pi));
  };
  const auto passes = shape.use_dru ? shape.dru_repetitions : 1;
  for (std::size_t rep = 0; rep < passes; ++rep) {
    for (std::size_t part = 0; part < shape.n_max; ++part) {
      encoding_layer(part);
      next = append_variational_layer(spec, next);
    }
  }
  if (!shape.use_dru)
    for (std::size_t l = 0; l < shape.extra_layers; ++l) next = append_variational_layer(spec, next);
  spec.reserve_slots(shape.input_count(), next);
  return spec;
}

CircuitSpec build_vqc(std::size_t n_max, std::size_t dru_repetitions, bool use_dru, std::size_t extra_layers) {
  return build_vqc(VqcShape{n_max, use_dru, dru_repetitions, extra_layers});
}

// ---------------------------------------------------------------------------
// Statevector kernels. Amplitudes are processed as interleaved (re, im)
// doubles to keep the inner loops free of complex-multiply helpers.

Statevector::Statevector(std::size_t n_qubits) : n_qubits_(n_qubits), amps_(std::size_t{1} << n_qubits) {
  if (n_qubits == 0 || n_qubits > 26) throw ContractError("statevector needs 1..26 qubits");
  amps_[0] = 1.0;
}

double Statevector::norm() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return std::sqrt(s);
}

namespace {

template <typename Kernel>
void for_each_pair(std::vector<std::complex<double>>& amps, std::size_t q, Kernel&& k) {
  double* d = reinterpret_cast<double*>(amps.data());
  const std::size_t dim = amps.size();
  const std::size_t stride = std::size_t{1} << q;
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) k(d + 2 * i, d + 2 * (i + stride));
  }
}

template <typename Kernel>
double sum_pairs(std::span<const std::complex<double>> lam, std::span<const std::complex<double>> psi, std::size_t q,
                 Kernel&& k) {
  const double* l = reinterpret_cast<const double*>(lam.data());
  const double* p = reinterpret_cast<const double*>(psi.data());
  const std::size_t dim = psi.size();
  const std::size_t stride = std::size_t{1} << q;
  double acc = 0.0;
  for (std::size_t base = 0; base < dim; base += 2 * stride)
    for (std::size_t i = base; i < base + stride; ++i)
      acc += k(l + 2 * i, l + 2 * (i + stride), p + 2 * i, p + 2 * (i + stride));
  return acc;
}

void check_qubit(const Statevector& s, std::size_t q) {
  if (q >= s.num_qubits()) throw ContractError("qubit index out of range");
}

}  // namespace

void Statevector::rx(std::size_t q, double theta) {
  check_qubit(*this, q);
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  for_each_pair(amps_, q, [c, s](double* a0, double* a1) {
    const double r0 = a0[0], i0 = a0[1], r1 = a1[0], i1 = a1[1];
    a0[0] = c * r0 + s * i1;
    a0[1] = c * i0 - s * r1;
    a1[0] = s * i0 + c * r1;
    a1[1] = -s * r0 + c * i1;
  });
}

void Statevector::ry(std::size_t q, double theta) {
  check_qubit(*this, q);
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  for_each_pair(amps_, q, [c, s](double* a0, double* a1) {
    const double r0 = a0[0], i0 = a0[1], r1 = a1[0], i1 = a1[1];
    a0[0] = c * r0 - s * r1;
    a0[1] = c * i0 - s * i1;
    a1[0] = s * r0 + c * r1;
    a1[1] = s * i0 + c * i1;
  });
}

void Statevector::rz(std::size_t q, double theta) {
  check_qubit(*this, q);
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  for_each_pair(amps_, q, [c, s](double* a0, double* a1) {
    const double r0 = a0[0], i0 = a0[1], r1 = a1[0], i1 = a1[1];
    a0[0] = c * r0 + s * i0;
    a0[1] = c * i0 - s * r0;
    a1[0] = c * r1 - s * i1;
    a1[1] = c * i1 + s * r1;
  });
}

void Statevector::cz(std::size_t a, std::size_t b) {
  check_qubit(*this, a);
  check_qubit(*this, b);
  const std::size_t mask = (std::size_t{1} << a) | (std::size_t{1} << b);
  for (std::size_t i = 0; i < amps_.size(); ++i)
    if ((i & mask) == mask) amps_[i] = -amps_[i];
}

void Statevector::x(std::size_t q) {
  check_qubit(*this, q);
  for_each_pair(amps_, q, [](double* a0, double* a1) {
    std::swap(a0[0], a1[0]);
    std::swap(a0[1], a1[1]);
  });
}

void Statevector::y(std::size_t q) {
  check_qubit(*this, q);
  // a0' = -i a1, a1' = i a0
  for_each_pair(amps_, q, [](double* a0, double* a1) {
    const double r0 = a0[0], i0 = a0[1], r1 = a1[0], i1 = a1[1];
    a0[0] = i1;
    a0[1] = -r1;
    a1[0] = -i0;
    a1[1] = r0;
  });
}

void Statevector::z(std::size_t q) {
  check_qubit(*this, q);
  for_each_pair(amps_, q, [](double*, double* a1) {
    a1[0] = -a1[0];
    a1[1] = -a1[1];
  });
}

// ---------------------------------------------------------------------------
// Simulation

double gate_angle(const Gate& gate, std::span<const double> inputs, std::span<const double> params) {
  switch (gate.angle.kind) {
    case AngleKind::kInput: return gate.angle.scale * inputs[gate.angle.index];
    case AngleKind::kParam: return params[gate.angle.index];
    case AngleKind::kFixed: return gate.angle.value;
    case AngleKind::kNone: return 0.0;
  }
  return 0.0;
}

void apply_gate(Statevector& state, const Gate& gate, double angle, bool inverse) {
  const double theta = inverse ? -angle : angle;
  switch (gate.kind) {
    case GateKind::kRx: state.rx(gate.target, theta); break;
    case GateKind::kRy: state.ry(gate.target, theta); break;
    case GateKind::kRz: state.rz(gate.target, theta); break;
    case GateKind::kCz: state.cz(gate.control, gate.target); break;
  }
}

namespace {

void check_lengths(const CircuitSpec& spec, std::span<const double> inputs, std::span<const double> params) {
  if (inputs.size() != spec.input_count())
    throw ContractError("circuit expects " + std::to_string(spec.input_count()) + " inputs, got " +
                        std::to_string(inputs.size()));
  if (params.size() != spec.param_count())
    throw ContractError("circuit expects " + std::to_string(spec.param_count()) + " parameters, got " +
                        std::to_string(params.size()));
}

Statevector run(const CircuitSpec& spec, std::span<const double> inputs, std::span<const double> params,
                std::size_t shifted_gate = SIZE_MAX, double shift = 0.0) {
  Statevector state(spec.num_qubits());
  const auto& gates = spec.gates();
  for (std::size_t g = 0; g < gates.size(); ++g) {
    double angle = gate_angle(gates[g], inputs, params);
    if (g == shifted_gate) angle += shift;
    apply_gate(state, gates[g], angle);
  }
  return state;
}

}  // namespace

Statevector simulate(const CircuitSpec& spec, std::span<const double> inputs, std::span<const double> params) {
  check_lengths(spec, inputs, params);
  return run(spec, inputs, params);
}

double expect_z(const Statevector& state, std::size_t qubit) {
  check_qubit(state, qubit);
  const auto amps = state.amplitudes();
  const std::size_t bit = std::size_t{1} << qubit;
  double e = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) e += (i & bit) ? -std::norm(amps[i]) : std::norm(amps[i]);
  return e;
}

std::vector<double> expect_z_each(const Statevector& state) {
  const auto n = state.num_qubits();
  const auto amps = state.amplitudes();
  std::vector<double> e(n, 0.0);
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    for (std::size_t q = 0; q < n; ++q) e[q] += ((i >> q) & 1) ? -p : p;
  }
  return e;
}

double expect_z_all(const Statevector& state) {
  const auto amps = state.amplitudes();
  double e = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) e += (std::popcount(i) & 1) ? -std::norm(amps[i]) : std::norm(amps[i]);
  return e;
}

// ---------------------------------------------------------------------------
// Observables

Observable Observable::z(std::size_t qubit) {
  Observable o;
  o.kind_ = Kind::kZ;
  o.qubit_ = qubit;
  return o;
}

Observable Observable::parity() { return Observable{}; }

Observable Observable::weighted_z(std::vector<double> weights) {
  Observable o;
  o.kind_ = Kind::kWeightedZ;
  o.values_ = std::move(weights);
  return o;
}

Observable Observable::diagonal(std::vector<double> values) {
  Observable o;
  o.kind_ = Kind::kDiagonal;
  o.values_ = std::move(values);
  return o;
}

double Observable::expectation(const Statevector& state) const {
  switch (kind_) {
    case Kind::kZ: return expect_z(state, qubit_);
    case Kind::kParity: return expect_z_all(state);
    case Kind::kWeightedZ: {
      if (values_.size() != state.num_qubits()) throw ContractError("weighted-Z observable has the wrong width");
      const auto e = expect_z_each(state);
      double s = 0.0;
      for (std::size_t q = 0; q < e.size(); ++q) s += values_[q] * e[q];
      return s;
    }
    case Kind::kDiagonal: {
      if (values_.size() != state.dimension()) throw ContractError("diagonal observable has the wrong dimension");
      const auto amps = state.amplitudes();
      double s = 0.0;
      for (std::size_t i = 0; i < amps.size(); ++i) s += values_[i] * std::norm(amps[i]);
      return s;
    }
  }
  return 0.0;
}

std::vector<double> Observable::diagonal_entries(std::size_t n_qubits) const {
  const std::size_t dim = std::size_t{1} << n_qubits;
  std::vector<double> d(dim, 0.0);
  switch (kind_) {
    case Kind::kZ:
      if (qubit_ >= n_qubits) throw ContractError("observable qubit out of range");
      for (std::size_t i = 0; i < dim; ++i) d[i] = ((i >> qubit_) & 1) ? -1.0 : 1.0;
      break;
    case Kind::kParity:
      for (std::size_t i = 0; i < dim; ++i) d[i] = (std::popcount(i) & 1) ? -1.0 : 1.0;
      break;
    case Kind::kWeightedZ:
      if (values_.size() != n_qubits) throw ContractError("weighted-Z observable has the wrong width");
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t q = 0; q < n_qubits; ++q) d[i] += ((i >> q) & 1) ? -values_[q] : values_[q];
      break;
    case Kind::kDiagonal:
      if (values_.size() != dim) throw ContractError("diagonal observable has the wrong dimension");
      d = values_;
      break;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Gradients

std::vector<double> gradients_parameter_shift(const CircuitSpec& spec, std::span<const double> inputs,
                                              std::span<const double> params, const Observable& observable) {
  check_lengths(spec, inputs, params);
  std::vector<double> grad(spec.param_count(), 0.0);
  constexpr double kShift = std::numbers::pi / 2;
  const auto& gates = spec.gates();
  for (std::size_t g = 0; g < gates.size(); ++g) {
    if (gates[g].angle.kind != AngleKind::kParam) continue;
    const double plus = observable.expectation(run(spec, inputs, params, g, kShift));
    const double minus = observable.expectation(run(spec, inputs, params, g, -kShift));
    grad[gates[g].angle.index] += 0.5 * (plus - minus);
  }
  return grad;
}

AdjointResult gradients_adjoint(const CircuitSpec& spec, std::span<const double> inputs,
                                std::span<const double> params, const Observable& observable) {
  check_lengths(spec, inputs, params);
  return gradients_adjoint(spec, inputs, params, observable, run(spec, inputs, params));
}

AdjointResult gradients_adjoint(const CircuitSpec& spec, std::span<const double> inputs,
                                std::span<const double> params, const Observable& observable,
                                const Statevector& final_state) {
  check_lengths(spec, inputs, params);
  if (final_state.num_qubits() != spec.num_qubits()) throw ContractError("final state width does not match the circuit");
  AdjointResult out;
  out.gradient.assign(spec.param_count(), 0.0);
  Statevector psi = final_state;
  const auto diag = observable.diagonal_entries(spec.num_qubits());

  // lambda = O |psi>
  Statevector lambda = psi;
  {
    auto l = lambda.amplitudes();
    double e = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      e += diag[i] * std::norm(l[i]);
      l[i] *= diag[i];
    }
    out.expectation = e;
  }

  const auto& gates = spec.gates();
  for (std::size_t g = gates.size(); g-- > 0;) {
    const auto& gate = gates[g];
    const double angle = gate_angle(gate, inputs, params);
    if (gate.angle.kind == AngleKind::kParam) {
      // d<O>/dtheta = Im <lambda| P |psi> for exp(-i theta P / 2).
      const auto lam = std::span<const std::complex<double>>(lambda.amplitudes());
      const auto ps = std::span<const std::complex<double>>(psi.amplitudes());
      double g_theta = 0.0;
      switch (gate.kind) {
        case GateKind::kRx:
          g_theta = sum_pairs(lam, ps, gate.target, [](const double* l0, const double* l1, const double* p0, const double* p1) {
            return (l0[0] * p1[1] - l0[1] * p1[0]) + (l1[0] * p0[1] - l1[1] * p0[0]);
          });
          break;
        case GateKind::kRy:
          g_theta = sum_pairs(lam, ps, gate.target, [](const double* l0, const double* l1, const double* p0, const double* p1) {
            return (l1[0] * p0[0] + l1[1] * p0[1]) - (l0[0] * p1[0] + l0[1] * p1[1]);
          });
          break;
        case GateKind::kRz:
          g_theta = sum_pairs(lam, ps, gate.target, [](const double* l0, const double* l1, const double* p0, const double* p1) {
            return (l0[0] * p0[1] - l0[1] * p0[0]) - (l1[0] * p1[1] - l1[1] * p1[0]);
          });
          break;
        case GateKind::kCz: break;
      }
      out.gradient[gate.angle.index] += g_theta;
    }
    apply_gate(psi, gate, angle, /*inverse=*/true);
    apply_gate(lambda, gate, angle, /*inverse=*/true);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise

NoisyExpectations simulate_noisy(const CircuitSpec& spec, std::span<const double> inputs,
                                 std::span<const double> params, const NoiseSpec& noise, Rng& rng) {
  check_lengths(spec, inputs, params);
  if (noise.trajectories == 0) throw ContractError("simulate_noisy needs at least one trajectory");
  if (!(noise.probability >= 0.0 && noise.probability <= 1.0))
    throw ContractError("depolarizing probability must lie in [0, 1]");
  if (noise.probability > noise.max_probability)
    throw ContractError("depolarizing probability exceeds the configured guard");
  const auto nq = spec.num_qubits();
  const auto m = noise.trajectories;
  std::vector<double> sum(nq, 0.0), sum_sq(nq, 0.0);
  double par = 0.0, par_sq = 0.0;

  auto depolarize = [&](Statevector& s, std::size_t q) {
    if (!(rng.uniform() < noise.probability)) return;
    switch (rng.index(3)) {
      case 0: s.x(q); break;
      case 1: s.y(q); break;
      default: s.z(q); break;
    }
  };

  for (std::size_t t = 0; t < m; ++t) {
    Statevector state(nq);
    for (const auto& g : spec.gates()) {
      apply_gate(state, g, gate_angle(g, inputs, params));
      if (noise.probability > 0.0) {
        if (g.kind == GateKind::kCz) depolarize(state, g.control);
        depolarize(state, g.target);
      }
    }
    const auto z = expect_z_each(state);
    for (std::size_t q = 0; q < nq; ++q) {
      sum[q] += z[q];
      sum_sq[q] += z[q] * z[q];
    }
    const double p = expect_z_all(state);
    par += p;
    par_sq += p * p;
  }

  const double md = static_cast<double>(m);
  auto stderr_of = [md](double s, double s2) {
    if (md < 2) return 0.0;
    const double mean = s / md;
    const double var = std::max(0.0, (s2 - md * mean * mean) / (md - 1));
    return std::sqrt(var / md);
  };
  NoisyExpectations out;
  out.z.resize(nq);
  out.z_stderr.resize(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    out.z[q] = sum[q] / md;
    out.z_stderr[q] = stderr_of(sum[q], sum_sq[q]);
  }
  out.parity = par / md;
  out.parity_stderr = stderr_of(par, par_sq);
  return out;
}

}  // namespace qrljo
