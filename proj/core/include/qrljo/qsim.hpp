#ifndef QRLJO_QSIM_HPP_
#define QRLJO_QSIM_HPP_

#include <complex>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qrljo/random.hpp"

namespace qrljo {

enum class GateKind : std::uint8_t { kRx, kRy, kRz, kCz };

enum class AngleKind : std::uint8_t { kNone, kInput, kParam, kFixed };

// Where a rotation angle comes from. Input angles are feature * scale
// (scale = pi maps a [0,1] feature onto [0,pi]).
struct AngleSource {
  AngleKind kind = AngleKind::kNone;
  std::size_t index = 0;
  double scale = 1.0;
  double value = 0.0;  // kFixed only

  static AngleSource input(std::size_t i, double scale);
  static AngleSource param(std::size_t i) { return {AngleKind::kParam, i, 1.0, 0.0}; }
  static AngleSource fixed(double angle) { return {AngleKind::kFixed, 0, 1.0, angle}; }
};

struct Gate {
  GateKind kind = GateKind::kRx;
  std::size_t target = 0;
  std::size_t control = 0;  // second qubit of a CZ
  AngleSource angle;
};

// A gate program over n qubits with input- and parameter-bound angles.
class CircuitSpec {
 public:
  CircuitSpec() = default;
  explicit CircuitSpec(std::size_t n_qubits);

  std::size_t num_qubits() const { return n_qubits_; }
  std::size_t input_count() const { return input_count_; }
  std::size_t param_count() const { return param_count_; }
  const std::vector<Gate>& gates() const { return gates_; }

  void rotation(GateKind kind, std::size_t qubit, AngleSource angle);
  void cz(std::size_t a, std::size_t b);
  // Ensure the slot counts cover at least these many (unused slots allowed).
  void reserve_slots(std::size_t inputs, std::size_t params);

  // Gate layers under as-soon-as-possible scheduling in program order.
  std::size_t depth() const;

  // One gate per line: "<gate> <qubit(s)> <source>".
  void dump(std::ostream& out) const;
  std::string dump() const;

 private:
  std::size_t n_qubits_ = 0;
  std::size_t input_count_ = 0;
  std::size_t param_count_ = 0;
  std::vector<Gate> gates_;
};

// Layer layout of the multi-step VQC.
struct VqcShape {
  std::size_t n_max = 4;
  bool use_dru = true;
  std::size_t dru_repetitions = 5;
  std::size_t extra_layers = 0;  // variational-only layers, no-DRU variant only

  std::size_t num_qubits() const { return 2 * (n_max + 1); }
  std::size_t input_count() const { return 2 * (n_max * n_max + n_max); }
  std::size_t variational_layers() const;
  std::size_t param_count() const { return 2 * num_qubits() * variational_layers(); }
};

// Appends one variational layer: Ry then Rz on every qubit, then a CZ ring.
// Returns the next free parameter slot.
std::size_t append_variational_layer(CircuitSpec& spec, std::size_t first_param);

// Multi-step VQC with incremental data uploading: the 2(n^2+n) features are
// split into n parts of 2(n+1) = n_qubits features; layer l encodes part l
// with Rx on each qubit and is followed by a variational layer. With DRU the
// whole pattern repeats dru_repetitions times; without it, extra_layers
// variational-only layers follow a single pass.
CircuitSpec build_vqc(const VqcShape& shape);
CircuitSpec build_vqc(std::size_t n_max, std::size_t dru_repetitions, bool use_dru, std::size_t extra_layers);

class Statevector {
 public:
  using Amplitude = std::complex<double>;

  // |0...0>
  explicit Statevector(std::size_t n_qubits);

  std::size_t num_qubits() const { return n_qubits_; }
  std::size_t dimension() const { return amps_.size(); }
  std::span<const Amplitude> amplitudes() const { return amps_; }
  std::span<Amplitude> amplitudes() { return amps_; }
  double norm() const;
  double probability(std::size_t basis) const { return std::norm(amps_.at(basis)); }

  // Rotations exp(-i theta P / 2).
  void rx(std::size_t q, double theta);
  void ry(std::size_t q, double theta);
  void rz(std::size_t q, double theta);
  void cz(std::size_t a, std::size_t b);
  void x(std::size_t q);
  void y(std::size_t q);
  void z(std::size_t q);

 private:
  std::size_t n_qubits_;
  std::vector<Amplitude> amps_;
};

// Resolves a gate's angle against input and parameter vectors.
double gate_angle(const Gate& gate, std::span<const double> inputs, std::span<const double> params);
// Applies one gate (or its inverse) to the state.
void apply_gate(Statevector& state, const Gate& gate, double angle, bool inverse = false);

// Runs the program on |0...0>. Throws ContractError on length mismatch.
Statevector simulate(const CircuitSpec& spec, std::span<const double> inputs, std::span<const double> params);

// <Z_q>
double expect_z(const Statevector& state, std::size_t qubit);
// <Z_q> for every qubit.
std::vector<double> expect_z_each(const Statevector& state);
// <Z ⊗ Z ⊗ ... ⊗ Z>, the parity observable.
double expect_z_all(const Statevector& state);

// A diagonal observable in the computational basis.
class Observable {
 public:
  static Observable z(std::size_t qubit);
  static Observable parity();
  // sum_q w_q Z_q
  static Observable weighted_z(std::vector<double> weights);
  // Arbitrary diagonal, one entry per basis state.
  static Observable diagonal(std::vector<double> values);

  double expectation(const Statevector& state) const;
  // Diagonal entries for an n-qubit register.
  std::vector<double> diagonal_entries(std::size_t n_qubits) const;

 private:
  enum class Kind { kZ, kParity, kWeightedZ, kDiagonal };
  Kind kind_ = Kind::kParity;
  std::size_t qubit_ = 0;
  std::vector<double> values_;
};

// d<O>/d param_j = [<O>(param_j + pi/2) - <O>(param_j - pi/2)] / 2, summed
// over every gate that reads param slot j. Input slots are constants.
std::vector<double> gradients_parameter_shift(const CircuitSpec& spec, std::span<const double> inputs,
                                              std::span<const double> params, const Observable& observable);

// Same gradient via a reverse (adjoint) sweep: one forward pass plus one
// backward pass regardless of the parameter count. Returns <O> alongside.
struct AdjointResult {
  double expectation = 0.0;
  std::vector<double> gradient;
};
AdjointResult gradients_adjoint(const CircuitSpec& spec, std::span<const double> inputs,
                                std::span<const double> params, const Observable& observable);
// Variant that reuses an already simulated output state of the same circuit.
AdjointResult gradients_adjoint(const CircuitSpec& spec, std::span<const double> inputs,
                                std::span<const double> params, const Observable& observable,
                                const Statevector& final_state);

struct NoiseSpec {
  double probability = 0.0;    // per gate and touched qubit
  std::size_t trajectories = 128;
  double max_probability = 0.05;  // guard; raise explicitly for wider sweeps
};

struct NoisyExpectations {
  std::vector<double> z;         // mean <Z_q>
  std::vector<double> z_stderr;  // standard error across trajectories
  double parity = 0.0;
  double parity_stderr = 0.0;
};

// Depolarizing noise by Pauli trajectories: after every gate, each qubit the
// gate touched independently suffers X, Y or Z (uniform) with probability p.
NoisyExpectations simulate_noisy(const CircuitSpec& spec, std::span<const double> inputs,
                                 std::span<const double> params, const NoiseSpec& noise, Rng& rng);

}  // namespace qrljo

#endif  // QRLJO_QSIM_HPP_
