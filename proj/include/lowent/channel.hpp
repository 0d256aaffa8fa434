#pragma once

// Quantum channels in Stinespring form.  A channel is a sequence of one- and
// two-qubit gates acting on registers A (input, n_A qubits), B (output
// workspace, n_B) and E (environment, n_A + n_B); applying it means evolving
// rho_A tensor |0...0><0...0|_{BE} by the gates and tracing out a chosen
// register set.  Register order is fixed as A, B, E so bit layouts are
// deterministic across tests and file formats.

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowent/core.hpp"
#include "lowent/random.hpp"

namespace lowent {

struct GateStep {
  Mat unitary;               // dimension 2^|support|, unitary within 1e-9
  std::vector<int> support;  // 1 or 2 distinct qubit indices into A|B|E
};

namespace gates {

inline Mat hadamard() {
  Mat h(2, 2);
  const double s = 1.0 / std::sqrt(2.0);
  h << s, s, s, -s;
  return h;
}

inline Mat pauli_x() {
  Mat x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

inline Mat pauli_y() {
  Mat y(2, 2);
  y << cx(0, 0), cx(0, -1), cx(0, 1), cx(0, 0);
  return y;
}

inline Mat pauli_z() {
  Mat z(2, 2);
  z << 1, 0, 0, -1;
  return z;
}

// Control on the first support qubit, target the second.
inline Mat cnot() {
  Mat c = Mat::Identity(4, 4);
  c(2, 2) = c(3, 3) = 0;
  c(2, 3) = c(3, 2) = 1;
  return c;
}

inline Mat cz() {
  Mat c = Mat::Identity(4, 4);
  c(3, 3) = -1;
  return c;
}

inline Mat swap() {
  Mat s = Mat::Identity(4, 4);
  s(1, 1) = s(2, 2) = 0;
  s(1, 2) = s(2, 1) = 1;
  return s;
}

}  // namespace gates

class ChannelSpec {
 public:
  ChannelSpec(int n_a, int n_b, std::vector<GateStep> steps,
              std::vector<std::string> output = {"B"})
      : n_a_(n_a),
        n_b_(n_b),
        steps_(std::move(steps)),
        output_(std::move(output)),
        layout_(RegisterLayout(
            {{"A", n_a}, {"B", n_b}, {"E", n_a + n_b}})) {
    if (n_a_ < 1 || n_b_ < 1) throw format_error("registers must be nonempty");
    const int n = layout_.total_qubits();
    for (const auto& s : steps_) {
      if (s.support.empty() || s.support.size() > 2) {
        throw format_error("gates act on one or two qubits");
      }
      if (s.support.size() == 2 && s.support[0] == s.support[1]) {
        throw format_error("gate support has repeated qubit");
      }
      for (int q : s.support) {
        if (q < 0 || q >= n) throw format_error("gate support out of range");
      }
      const auto dim = std::int64_t{1} << s.support.size();
      if (s.unitary.rows() != dim || s.unitary.cols() != dim) {
        throw format_error("gate matrix dimension mismatch");
      }
      detail::check_unitary(s.unitary);
    }
    for (const auto& name : output_) {
      if (!layout_.has(name)) throw format_error("unknown output register");
    }
    if (output_.empty()) throw format_error("output register set empty");
  }

  int n_a() const { return n_a_; }
  int n_b() const { return n_b_; }
  int num_steps() const { return static_cast<int>(steps_.size()); }
  const std::vector<GateStep>& steps() const { return steps_; }
  const std::vector<std::string>& output_registers() const { return output_; }
  const RegisterLayout& layout() const { return layout_; }

  Mat dilation_unitary() const {
    const int n = layout_.total_qubits();
    if (n > 12) throw budget_error("dilation beyond 12 qubits");
    const std::size_t dim = layout_.dim();
    Mat u = Mat::Identity(dim, dim);
    Vec col(dim);
    for (const auto& s : steps_) {
      for (std::size_t c = 0; c < dim; ++c) {
        col = u.col(c);
        apply_on_support(col, s.unitary, s.support, n);
        u.col(c) = col;
      }
    }
    return u;
  }

  // Evolves psi (on the full A,B,E layout) through the gate sequence.
  PureState evolve(const PureState& psi) const {
    if (psi.layout() != layout_) throw format_error("state layout mismatch");
    Vec amp = psi.amplitudes();
    const int n = layout_.total_qubits();
    for (const auto& s : steps_) apply_on_support(amp, s.unitary, s.support, n);
    return PureState::unchecked(layout_, std::move(amp));
  }

  // Initial pure state |psi_A> tensor |0...0>_{BE} on the full layout.
  PureState embed_input(const PureState& psi_a) const {
    if (psi_a.layout().total_qubits() != n_a_) {
      throw format_error("channel input must live on register A");
    }
    const std::size_t rest = std::size_t{1} << (layout_.total_qubits() - n_a_);
    Vec amp = Vec::Zero(layout_.dim());
    for (Eigen::Index i = 0; i < psi_a.amplitudes().size(); ++i) {
      amp[static_cast<std::size_t>(i) * rest] = psi_a.amplitudes()[i];
    }
    return PureState::unchecked(layout_, std::move(amp));
  }

  DensityMatrix apply(const DensityMatrix& rho_a,
                      const std::vector<std::string>& trace_out) const {
    if (rho_a.layout().total_qubits() != n_a_) {
      throw format_error("channel input must live on register A");
    }
    const auto keep = layout_.complement(trace_out);
    if (keep.empty()) throw format_error("cannot trace out every register");
    // Evolve eigenvector-wise: cheaper than conjugating the full dilation.
    Eigen::SelfAdjointEigenSolver<Mat> es(rho_a.matrix());
    const std::size_t keep_dim =
        std::size_t{1} << layout_.restricted(keep).total_qubits();
    Mat out = Mat::Zero(keep_dim, keep_dim);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
      const double p = es.eigenvalues()[k];
      if (p < 1e-14) continue;
      const PureState in = PureState::unchecked(
          RegisterLayout::single("A", n_a_), es.eigenvectors().col(k));
      const PureState evolved = evolve(embed_input(in));
      out += p * cross_partial_trace(evolved, evolved, keep);
    }
    return DensityMatrix::unchecked(layout_.restricted(keep),
                                    (out + out.adjoint()) / 2.0);
  }

  DensityMatrix apply(const PureState& psi_a,
                      const std::vector<std::string>& trace_out) const {
    if (psi_a.layout().total_qubits() != n_a_) {
      throw format_error("channel input must live on register A");
    }
    const auto keep = layout_.complement(trace_out);
    if (keep.empty()) throw format_error("cannot trace out every register");
    const PureState renamed =
        PureState::unchecked(RegisterLayout::single("A", n_a_),
                             psi_a.amplitudes());
    const PureState evolved = evolve(embed_input(renamed));
    return partial_trace(evolved, keep);
  }

  // Output on the declared output registers.
  DensityMatrix apply(const DensityMatrix& rho_a) const {
    return apply(rho_a, layout_.complement(output_));
  }

  DensityMatrix apply(const PureState& psi_a) const {
    return apply(psi_a, layout_.complement(output_));
  }

  // Normalized Choi state: feed half of a maximally entangled pair on
  // (R, A) through the channel.  Lives on [R, <output registers>]; the R
  // marginal equals the maximally mixed state iff trace preservation holds
  // (it always does here, the evolution being unitary).
  DensityMatrix choi_state() const {
    const int total = n_a_ + layout_.total_qubits();
    if (total > 14) throw budget_error("choi state beyond budget");
    RegisterLayout full =
        RegisterLayout::single("R", n_a_).concatenated(layout_);
    const std::size_t dim_a = std::size_t{1} << n_a_;
    const std::size_t dim_rest = std::size_t{1} << (n_a_ + n_b_ + n_a_ + n_b_);
    Vec amp = Vec::Zero(full.dim());
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_a));
    for (std::size_t i = 0; i < dim_a; ++i) {
      // |i>_R |i>_A |0...0>_{BE}
      amp[(i * dim_a + i) * (dim_rest / dim_a)] = scale;
    }
    const int n = full.total_qubits();
    for (const auto& s : steps_) {
      std::vector<int> shifted = s.support;
      for (int& q : shifted) q += n_a_;
      apply_on_support(amp, s.unitary, shifted, n);
    }
    const PureState evolved = PureState::unchecked(full, std::move(amp));
    std::vector<std::string> keep = {"R"};
    keep.insert(keep.end(), output_.begin(), output_.end());
    return partial_trace(evolved, keep);
  }

 private:
  int n_a_;
  int n_b_;
  std::vector<GateStep> steps_;
  std::vector<std::string> output_;
  RegisterLayout layout_;
};

// The purification trick: double the input register (A' = A, A2) where the
// second copy is traced out untouched, so Phi'(rho) = Phi(Tr_A2 rho).  The
// environment grows to keep the |E| = |A| + |B| convention.  Qubit remap: A
// stays, everything after A shifts by n_A.
inline ChannelSpec with_purified_input(const ChannelSpec& spec) {
  std::vector<GateStep> steps = spec.steps();
  for (auto& s : steps) {
    for (int& q : s.support) {
      if (q >= spec.n_a()) q += spec.n_a();
    }
  }
  return ChannelSpec(2 * spec.n_a(), spec.n_b(), std::move(steps),
                     spec.output_registers());
}

// Random channel: T Haar-random two-qubit gates on random distinct supports.
inline ChannelSpec random_channel(int n_a, int n_b, int steps, Rng& rng,
                                  std::vector<std::string> output = {"B"}) {
  const int n = 2 * (n_a + n_b);
  std::vector<GateStep> seq;
  for (int t = 0; t < steps; ++t) {
    int a = static_cast<int>(rng.integer(n));
    int b = static_cast<int>(rng.integer(n));
    while (b == a) b = static_cast<int>(rng.integer(n));
    seq.push_back({haar_unitary(4, rng), {a, b}});
  }
  return ChannelSpec(n_a, n_b, std::move(seq), std::move(output));
}

// The exactly depolarizing qubit channel used across the test suites:
// swap the input into B, then apply X and Z to B each controlled on a fresh
// |+> environment qubit — a uniform Pauli twirl.
inline ChannelSpec depolarizing_channel() {
  std::vector<GateStep> steps;
  steps.push_back({gates::swap(), {0, 1}});      // SWAP(A, B)
  steps.push_back({gates::hadamard(), {2}});     // H on E1
  steps.push_back({gates::hadamard(), {3}});     // H on E2
  steps.push_back({gates::cnot(), {2, 1}});      // X on B controlled by E1
  steps.push_back({gates::cz(), {3, 1}});        // Z on B controlled by E2
  return ChannelSpec(1, 1, std::move(steps));
}

}  // namespace lowent
