#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qrljo/errors.hpp"
#include "qrljo/qsim.hpp"
#include "qrljo/random.hpp"

using namespace qrljo;
using std::numbers::pi;

namespace {

CircuitSpec one_rotation(GateKind kind, AngleSource src) {
  CircuitSpec c(1);
  c.rotation(kind, 0, src);
  return c;
}

// Random circuit: layers of random Pauli rotations (shared params allowed),
// CZs and input rotations.
CircuitSpec random_circuit(Rng& rng, std::size_t nq, std::size_t layers, std::size_t n_params) {
  CircuitSpec c(nq);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t q = 0; q < nq; ++q) {
      c.rotation(GateKind::kRx, q, AngleSource::input(q, pi));
      const auto kind = static_cast<GateKind>(rng.index(3));
      c.rotation(kind, q, AngleSource::param(rng.index(n_params)));
      c.rotation(GateKind::kRz, q, AngleSource::param(rng.index(n_params)));
    }
    if (nq > 1)
      for (std::size_t q = 0; q + 1 < nq; ++q) c.cz(q, q + 1);
  }
  c.reserve_slots(nq, n_params);
  return c;
}

}  // namespace

TEST(Vqc, LayerGrid) {
  for (std::size_t reps = 2; reps <= 5; ++reps) EXPECT_EQ((VqcShape{4, true, reps, 0}.variational_layers()), 4 * reps);
  const VqcShape no_dru{4, false, 5, 0};
  EXPECT_EQ(no_dru.variational_layers(), 4u);
  const VqcShape dru{4, true, 5, 0};
  EXPECT_EQ(dru.num_qubits(), 10u);
  EXPECT_EQ(dru.input_count(), 40u);
  EXPECT_EQ(dru.param_count(), 400u);
  const auto spec = build_vqc(dru);
  EXPECT_EQ(spec.num_qubits(), 10u);
  EXPECT_EQ(spec.input_count(), 40u);
  EXPECT_EQ(spec.param_count(), 400u);
  EXPECT_THROW(build_vqc(4, 0, true, 0), ContractError);
  // Encoded once without DRU: every input slot appears exactly once.
  const auto once = build_vqc(no_dru);
  std::vector<int> uses(40, 0);
  for (const auto& g : once.gates())
    if (g.angle.kind == AngleKind::kInput) ++uses[g.angle.index];
  for (int u : uses) EXPECT_EQ(u, 1);
}

TEST(Vqc, RingAndDump) {
  const auto spec = build_vqc(VqcShape{2, false, 1, 0});
  std::size_t czs = 0;
  for (const auto& g : spec.gates()) czs += g.kind == GateKind::kCz;
  EXPECT_EQ(czs, 6u * 2u);  // 6 qubits, 2 layers
  const auto dump = spec.dump();
  EXPECT_EQ(dump.substr(0, dump.find('\n')), "rx 0 in[0]*3.14159");
  EXPECT_NE(dump.find("cz 5 0 -"), std::string::npos);
  CircuitSpec two(2);
  append_variational_layer(two, 0);
  czs = 0;
  for (const auto& g : two.gates()) czs += g.kind == GateKind::kCz;
  EXPECT_EQ(czs, 1u);
}

TEST(Simulate, BasicStates) {
  CircuitSpec empty(3);
  const auto s = simulate(empty, {}, {});
  EXPECT_EQ(s.probability(0), 1.0);
  const auto rx = one_rotation(GateKind::kRx, AngleSource::input(0, pi));
  EXPECT_NEAR(expect_z(simulate(rx, std::vector<double>{1.0}, {}), 0), -1.0, 1e-12);
  EXPECT_NEAR(expect_z(simulate(rx, std::vector<double>{0.5}, {}), 0), 0.0, 1e-12);
  for (double th : {0.1, 0.7, 2.0, 3.0})
    EXPECT_NEAR(expect_z(simulate(rx, std::vector<double>{th / pi}, {}), 0), std::cos(th), 1e-12);
  EXPECT_THROW(simulate(rx, {}, {}), ContractError);
}

TEST(Simulate, BellPairAndParity) {
  // H = Ry(pi/2) then Rz-free; CNOT = (I x H) CZ (I x H) in native gates.
  CircuitSpec c(2);
  c.rotation(GateKind::kRy, 0, AngleSource::fixed(pi / 2));
  c.rotation(GateKind::kRy, 1, AngleSource::fixed(pi / 2));
  c.cz(0, 1);
  c.rotation(GateKind::kRy, 1, AngleSource::fixed(-pi / 2));
  const auto s = simulate(c, {}, {});
  EXPECT_NEAR(expect_z(s, 0), 0.0, 1e-12);
  EXPECT_NEAR(expect_z(s, 1), 0.0, 1e-12);
  EXPECT_NEAR(expect_z_all(s), 1.0, 1e-12);  // (|00> + |11>)/sqrt2
  Statevector flip(3);
  flip.x(1);
  EXPECT_EQ(expect_z_all(flip), -1.0);
  EXPECT_EQ(expect_z_all(Statevector(4)), 1.0);
  CircuitSpec eq(2);
  eq.rotation(GateKind::kRx, 0, AngleSource::fixed(pi / 2));
  eq.rotation(GateKind::kRx, 1, AngleSource::fixed(pi / 2));
  EXPECT_NEAR(expect_z_all(simulate(eq, {}, {})), 0.0, 1e-12);
}

TEST(Simulate, ZeroAnglesLeaveGroundState) {
  const auto spec = build_vqc(VqcShape{3, true, 2, 0});
  const std::vector<double> in(spec.input_count(), 0.0), p(spec.param_count(), 0.0);
  for (double z : expect_z_each(simulate(spec, in, p))) EXPECT_NEAR(z, 1.0, 1e-12);
}

TEST(Simulate, NormIsPreserved) {
  Rng rng(4);
  const auto spec = build_vqc(VqcShape{3, true, 3, 0});
  std::vector<double> in(spec.input_count()), p(spec.param_count());
  for (int t = 0; t < 10; ++t) {
    for (auto& x : in) x = rng.uniform();
    for (auto& x : p) x = rng.uniform(0, 2 * pi);
    EXPECT_NEAR(simulate(spec, in, p).norm(), 1.0, 1e-10);
  }
}

TEST(Gradients, AnalyticSingleQubit) {
  const auto ry = one_rotation(GateKind::kRy, AngleSource::param(0));
  const auto z = Observable::z(0);
  EXPECT_NEAR(gradients_parameter_shift(ry, {}, std::vector<double>{pi / 2}, z)[0], -1.0, 1e-12);
  EXPECT_NEAR(gradients_parameter_shift(ry, {}, std::vector<double>{0.0}, z)[0], 0.0, 1e-12);
}

TEST(Gradients, ShiftAndAdjointMatchFiniteDifferences) {
  Rng rng(99);
  for (int t = 0; t < 25; ++t) {
    const std::size_t nq = 1 + rng.index(4), layers = 1 + rng.index(3), np = 1 + rng.index(2 * nq * layers);
    const auto spec = random_circuit(rng, nq, layers, np);
    std::vector<double> in(nq), p(np);
    for (auto& x : in) x = rng.uniform();
    for (auto& x : p) x = rng.uniform(0, 2 * pi);
    std::vector<double> w(nq);
    for (auto& x : w) x = rng.uniform(-1, 1);
    for (const auto& obs : {Observable::parity(), Observable::z(nq - 1), Observable::weighted_z(w)}) {
      const auto ps = gradients_parameter_shift(spec, in, p, obs);
      const auto adj = gradients_adjoint(spec, in, p, obs);
      EXPECT_NEAR(adj.expectation, obs.expectation(simulate(spec, in, p)), 1e-12);
      for (std::size_t j = 0; j < np; ++j) {
        auto hi = p, lo = p;
        hi[j] += 1e-4;
        lo[j] -= 1e-4;
        const double fd =
            (obs.expectation(simulate(spec, in, hi)) - obs.expectation(simulate(spec, in, lo))) / 2e-4;
        EXPECT_NEAR(ps[j], fd, 1e-5);
        EXPECT_NEAR(adj.gradient[j], ps[j], 1e-10);
      }
    }
  }
}

TEST(Observable, DiagonalEntries) {
  const auto d = Observable::parity().diagonal_entries(2);
  EXPECT_EQ(d, (std::vector<double>{1, -1, -1, 1}));
  const auto z1 = Observable::z(1).diagonal_entries(2);
  EXPECT_EQ(z1, (std::vector<double>{1, 1, -1, -1}));
  Statevector s(2);
  s.x(0);
  EXPECT_EQ(Observable::diagonal({0.5, 2.0, 3.0, 4.0}).expectation(s), 2.0);
}

TEST(Noise, ZeroNoiseEqualsIdeal) {
  Rng rng(1);
  const auto spec = build_vqc(VqcShape{2, true, 2, 0});
  std::vector<double> in(spec.input_count()), p(spec.param_count());
  for (auto& x : in) x = rng.uniform();
  for (auto& x : p) x = rng.uniform(0, 2 * pi);
  const auto ideal = simulate(spec, in, p);
  const auto noisy = simulate_noisy(spec, in, p, NoiseSpec{0.0, 3}, rng);
  const auto z = expect_z_each(ideal);
  for (std::size_t q = 0; q < z.size(); ++q) EXPECT_NEAR(noisy.z[q], z[q], 1e-12);
  EXPECT_NEAR(noisy.parity, expect_z_all(ideal), 1e-12);
  EXPECT_THROW(simulate_noisy(spec, in, p, NoiseSpec{0.0, 0}, rng), ContractError);
  EXPECT_THROW(simulate_noisy(spec, in, p, NoiseSpec{0.2, 4}, rng), ContractError);
}

TEST(Noise, SingleGateDepolarizingLaw) {
  const auto rx0 = one_rotation(GateKind::kRx, AngleSource::fixed(0.0));
  for (double p : {0.01, 0.03, 0.05}) {
    Rng rng(static_cast<std::uint64_t>(p * 1000));
    const auto r = simulate_noisy(rx0, {}, {}, NoiseSpec{p, 10000}, rng);
    EXPECT_LE(std::abs(r.z[0] - (1.0 - 4.0 * p / 3.0)), 3.0 * r.z_stderr[0] + 1e-12);
  }
}

TEST(Noise, SeededReproducibility) {
  const auto spec = build_vqc(VqcShape{2, true, 1, 0});
  std::vector<double> in(spec.input_count(), 0.3), p(spec.param_count(), 0.7);
  Rng a(5), b(5);
  const auto ra = simulate_noisy(spec, in, p, NoiseSpec{0.05, 64}, a);
  const auto rb = simulate_noisy(spec, in, p, NoiseSpec{0.05, 64}, b);
  EXPECT_EQ(ra.z, rb.z);
  EXPECT_EQ(ra.parity, rb.parity);
}

TEST(Noise, StrongerNoiseShrinksExpectations) {
  const auto spec = build_vqc(VqcShape{4, true, 5, 0});
  std::vector<double> in(spec.input_count(), 0.0), p(spec.param_count(), 0.0);
  Rng r1(3), r5(3);
  const auto lo = simulate_noisy(spec, in, p, NoiseSpec{0.01, 64}, r1);
  const auto hi = simulate_noisy(spec, in, p, NoiseSpec{0.05, 64}, r5);
  double m_lo = 0, m_hi = 0;
  for (std::size_t q = 0; q < lo.z.size(); ++q) {
    m_lo += std::abs(lo.z[q]);
    m_hi += std::abs(hi.z[q]);
  }
  EXPECT_LT(m_hi, m_lo);
}
