// core.hpp — register layouts, pure/mixed states, entropies, distances,
// Schmidt decompositions, purifications and measurement primitives.
//
// Conventions used throughout the library:
//   * qubit 0 is the leftmost tensor factor and the most significant bit of a
//     basis index: |q0 q1 ... q_{n-1}> has index sum_i q_i * 2^(n-1-i).
//   * von Neumann and min-entropy are reported in bits (log base 2);
//     eigenvalues below 1e-12 are treated as zero.
//   * trace_norm_distance is the full trace norm ||rho - sigma||_1 in [0, 2];
//     pure_state_distance is the half-norm sqrt(1 - |<psi|phi>|^2) in [0, 1].

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lowent {

using cx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

inline constexpr double kTol = 1e-9;
inline constexpr double kEigClamp = 1e-12;

// Error taxonomy; the CLI maps these onto distinct exit codes.
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct budget_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct promise_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Register {
  std::string name;
  int qubits = 0;
};

// Ordered list of named, disjoint qubit registers.
class RegisterLayout {
 public:
  RegisterLayout() = default;
  explicit RegisterLayout(std::vector<Register> regs) : regs_(std::move(regs)) {
    for (std::size_t i = 0; i < regs_.size(); ++i) {
      if (regs_[i].qubits < 0) throw format_error("register with negative qubit count");
      for (std::size_t j = 0; j < i; ++j)
        if (regs_[i].name == regs_[j].name)
          throw format_error("duplicate register name: " + regs_[i].name);
      total_ += regs_[i].qubits;
    }
    if (total_ <= 0) throw format_error("layout must hold at least one qubit");
  }

  static RegisterLayout single(const std::string& name, int qubits) {
    return RegisterLayout({{name, qubits}});
  }

  int total_qubits() const { return total_; }
  std::size_t dim() const { return std::size_t{1} << total_; }
  const std::vector<Register>& registers() const { return regs_; }

  bool has(const std::string& name) const {
    for (const auto& r : regs_)
      if (r.name == name) return true;
    return false;
  }

  // Index of the first qubit of a register.
  int offset(const std::string& name) const {
    int off = 0;
    for (const auto& r : regs_) {
      if (r.name == name) return off;
      off += r.qubits;
    }
    throw format_error("unknown register: " + name);
  }

  int size(const std::string& name) const {
    for (const auto& r : regs_)
      if (r.name == name) return r.qubits;
    throw format_error("unknown register: " + name);
  }

  // Qubit indices of the named registers, in layout order.
  std::vector<int> qubits_of(const std::vector<std::string>& names) const {
    for (const auto& n : names)
      if (!has(n)) throw format_error("unknown register: " + n);
    std::vector<int> out;
    int off = 0;
    for (const auto& r : regs_) {
      bool keep = std::find(names.begin(), names.end(), r.name) != names.end();
      for (int q = 0; q < r.qubits; ++q)
        if (keep) out.push_back(off + q);
      off += r.qubits;
    }
    return out;
  }

  // Registers not in `names`, in layout order.
  std::vector<std::string> complement(const std::vector<std::string>& names) const {
    std::vector<std::string> out;
    for (const auto& r : regs_)
      if (std::find(names.begin(), names.end(), r.name) == names.end())
        out.push_back(r.name);
    return out;
  }

  // Sub-layout restricted to the named registers (layout order preserved).
  RegisterLayout restricted(const std::vector<std::string>& names) const {
    std::vector<Register> kept;
    for (const auto& r : regs_)
      if (std::find(names.begin(), names.end(), r.name) != names.end())
        kept.push_back(r);
    if (kept.empty()) throw format_error("restriction keeps no register");
    return RegisterLayout(std::move(kept));
  }

  RegisterLayout concatenated(const RegisterLayout& other) const {
    std::vector<Register> regs = regs_;
    for (const auto& r : other.regs_) regs.push_back(r);
    return RegisterLayout(std::move(regs));
  }

  bool operator==(const RegisterLayout& o) const {
    if (regs_.size() != o.regs_.size()) return false;
    for (std::size_t i = 0; i < regs_.size(); ++i)
      if (regs_[i].name != o.regs_[i].name || regs_[i].qubits != o.regs_[i].qubits)
        return false;
    return true;
  }
  bool operator!=(const RegisterLayout& o) const { return !(*this == o); }

 private:
  std::vector<Register> regs_;
  int total_ = 0;
};

// Value of qubit q in basis index x under the MSB-first convention.
inline int bit_of(std::size_t x, int qubit, int n) {
  return static_cast<int>((x >> (n - 1 - qubit)) & 1u);
}

namespace detail {

// Expansion tables for a subset of qubit positions: sub_expand[k] places the
// bits of the |subset|-bit index k at the subset's positions of a full index.
inline std::vector<std::size_t> expand_table(const std::vector<int>& subset, int n) {
  const int s = static_cast<int>(subset.size());
  std::vector<std::size_t> table(std::size_t{1} << s, 0);
  for (std::size_t k = 0; k < table.size(); ++k) {
    std::size_t x = 0;
    for (int j = 0; j < s; ++j)
      if ((k >> (s - 1 - j)) & 1u) x |= std::size_t{1} << (n - 1 - subset[j]);
    table[k] = x;
  }
  return table;
}

inline std::vector<int> complement_positions(const std::vector<int>& subset, int n) {
  std::vector<bool> in(n, false);
  for (int q : subset) {
    if (q < 0 || q >= n) throw format_error("qubit index out of range");
    if (in[q]) throw format_error("repeated qubit index");
    in[q] = true;
  }
  std::vector<int> rest;
  for (int q = 0; q < n; ++q)
    if (!in[q]) rest.push_back(q);
  return rest;
}

inline void check_unitary(const Mat& u, double tol = kTol) {
  if (u.rows() != u.cols()) throw format_error("unitary must be square");
  Mat g = u.adjoint() * u;
  g -= Mat::Identity(u.rows(), u.cols());
  if (g.cwiseAbs().maxCoeff() > tol) throw format_error("matrix is not unitary");
}

}  // namespace detail

// Normalized state vector over a register layout.
class PureState {
 public:
  PureState(RegisterLayout layout, Vec amplitudes)
      : layout_(std::move(layout)), amp_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amp_.size()) != layout_.dim())
      throw format_error("amplitude vector does not match layout dimension");
    if (std::abs(amp_.norm() - 1.0) > kTol)
      throw format_error("state vector is not normalized");
  }

  // Skip the norm check for internally produced vectors.
  static PureState unchecked(RegisterLayout layout, Vec amplitudes) {
    PureState s;
    s.layout_ = std::move(layout);
    s.amp_ = std::move(amplitudes);
    return s;
  }

  static PureState basis(RegisterLayout layout, std::size_t index) {
    Vec v = Vec::Zero(layout.dim());
    if (index >= layout.dim()) throw format_error("basis index out of range");
    v[index] = 1.0;
    return PureState::unchecked(std::move(layout), std::move(v));
  }

  const RegisterLayout& layout() const { return layout_; }
  const Vec& amplitudes() const { return amp_; }
  std::size_t dim() const { return amp_.size(); }
  int qubits() const { return layout_.total_qubits(); }

  PureState renamed(const std::vector<std::string>& new_names) const {
    const auto& regs = layout_.registers();
    if (new_names.size() != regs.size()) throw format_error("rename count mismatch");
    std::vector<Register> renamed_regs;
    for (std::size_t i = 0; i < regs.size(); ++i)
      renamed_regs.push_back({new_names[i], regs[i].qubits});
    return PureState::unchecked(RegisterLayout(std::move(renamed_regs)), amp_);
  }

 private:
  PureState() = default;
  RegisterLayout layout_;
  Vec amp_;
};

// Density operator over a register layout. Hermiticity and unit trace are
// checked on construction; positivity via validate_psd() (it costs an
// eigensolve, so it is applied at trust boundaries rather than everywhere).
class DensityMatrix {
 public:
  DensityMatrix(RegisterLayout layout, Mat rho)
      : layout_(std::move(layout)), rho_(std::move(rho)) {
    const auto d = static_cast<Eigen::Index>(layout_.dim());
    if (rho_.rows() != d || rho_.cols() != d)
      throw format_error("density matrix does not match layout dimension");
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > kTol)
      throw format_error("density matrix is not Hermitian");
    if (std::abs(rho_.trace().real() - 1.0) > kTol || std::abs(rho_.trace().imag()) > kTol)
      throw format_error("density matrix does not have unit trace");
  }

  static DensityMatrix unchecked(RegisterLayout layout, Mat rho) {
    DensityMatrix m;
    m.layout_ = std::move(layout);
    m.rho_ = std::move(rho);
    return m;
  }

  void validate_psd(double tol = kTol) const {
    Eigen::SelfAdjointEigenSolver<Mat> es(rho_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol)
      throw format_error("density matrix has a negative eigenvalue");
  }

  const RegisterLayout& layout() const { return layout_; }
  const Mat& matrix() const { return rho_; }
  std::size_t dim() const { return rho_.rows(); }
  int qubits() const { return layout_.total_qubits(); }

  DensityMatrix renamed(const std::vector<std::string>& new_names) const {
    const auto& regs = layout_.registers();
    if (new_names.size() != regs.size()) throw format_error("rename count mismatch");
    std::vector<Register> renamed_regs;
    for (std::size_t i = 0; i < regs.size(); ++i)
      renamed_regs.push_back({new_names[i], regs[i].qubits});
    return DensityMatrix::unchecked(RegisterLayout(std::move(renamed_regs)), rho_);
  }

 private:
  DensityMatrix() = default;
  RegisterLayout layout_;
  Mat rho_;
};

inline DensityMatrix to_density(const PureState& psi) {
  return DensityMatrix::unchecked(psi.layout(),
                                  psi.amplitudes() * psi.amplitudes().adjoint());
}

/// Tensor product; the right factor's registers are appended to the left's.
inline PureState tensor(const PureState& a, const PureState& b) {
  RegisterLayout layout = a.layout().concatenated(b.layout());
  Vec out(a.dim() * b.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    out.segment(i * b.dim(), b.dim()) = a.amplitudes()[i] * b.amplitudes();
  return PureState::unchecked(std::move(layout), std::move(out));
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix::unchecked(a.layout().concatenated(b.layout()),
                                  kron(a.matrix(), b.matrix()));
}

/// Apply a unitary (or any matrix) acting on the listed qubit positions to a
/// full state vector, in place. The matrix's tensor-factor order equals the
/// order of `support`.
inline void apply_on_support(Vec& state, const Mat& op, const std::vector<int>& support, int n) {
  const int s = static_cast<int>(support.size());
  if (op.rows() != (1 << s) || op.cols() != (1 << s))
    throw format_error("operator dimension does not match support size");
  if (static_cast<std::size_t>(state.size()) != (std::size_t{1} << n))
    throw format_error("state dimension does not match qubit count");
  const auto rest = detail::complement_positions(support, n);
  const auto sup_exp = detail::expand_table(support, n);
  const auto rest_exp = detail::expand_table(rest, n);
  const std::size_t sdim = sup_exp.size();
  Vec block(sdim);
  for (std::size_t r = 0; r < rest_exp.size(); ++r) {
    const std::size_t base = rest_exp[r];
    for (std::size_t k = 0; k < sdim; ++k) block[k] = state[base | sup_exp[k]];
    block = op * block;
    for (std::size_t k = 0; k < sdim; ++k) state[base | sup_exp[k]] = block[k];
  }
}

/// rho -> (U on support) rho (U on support)^dagger, in place.
inline void conjugate_on_support(Mat& rho, const Mat& op, const std::vector<int>& support, int n) {
  for (Eigen::Index c = 0; c < rho.cols(); ++c) {
    Vec col = rho.col(c);
    apply_on_support(col, op, support, n);
    rho.col(c) = col;
  }
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    Vec row = rho.row(r).transpose();
    apply_on_support(row, op.conjugate(), support, n);
    rho.row(r) = row.transpose();
  }
}

/// Dense embedding of a local operator into the full space (small n only;
/// used by tests and by explicitly dense paths).
inline Mat embed_on_support(const Mat& op, const std::vector<int>& support, int n) {
  const std::size_t dim = std::size_t{1} << n;
  if (n > 14) throw budget_error("dense embedding beyond 14 qubits");
  Mat out = Mat::Zero(dim, dim);
  const auto rest = detail::complement_positions(support, n);
  const auto sup_exp = detail::expand_table(support, n);
  const auto rest_exp = detail::expand_table(rest, n);
  for (std::size_t r = 0; r < rest_exp.size(); ++r)
    for (std::size_t i = 0; i < sup_exp.size(); ++i)
      for (std::size_t j = 0; j < sup_exp.size(); ++j)
        out(rest_exp[r] | sup_exp[i], rest_exp[r] | sup_exp[j]) = op(i, j);
  return out;
}

/// Partial trace keeping the named registers (layout order preserved).
inline DensityMatrix partial_trace(const DensityMatrix& rho,
                                   const std::vector<std::string>& keep) {
  const int n = rho.qubits();
  const auto keep_q = rho.layout().qubits_of(keep);
  const auto rest_q = detail::complement_positions(keep_q, n);
  const auto keep_exp = detail::expand_table(keep_q, n);
  const auto rest_exp = detail::expand_table(rest_q, n);
  Mat out = Mat::Zero(keep_exp.size(), keep_exp.size());
  for (std::size_t r = 0; r < rest_exp.size(); ++r) {
    const std::size_t base = rest_exp[r];
    for (std::size_t i = 0; i < keep_exp.size(); ++i)
      for (std::size_t j = 0; j < keep_exp.size(); ++j)
        out(i, j) += rho.matrix()(base | keep_exp[i], base | keep_exp[j]);
  }
  return DensityMatrix::unchecked(rho.layout().restricted(keep), std::move(out));
}

/// Tr_rest |a><b| on the kept registers; partial_trace of an outer product
/// without forming the full-dimension matrix.
inline Mat cross_partial_trace(const PureState& a, const PureState& b,
                               const std::vector<std::string>& keep) {
  if (a.layout() != b.layout()) throw format_error("cross trace needs matching layouts");
  const int n = a.qubits();
  const auto keep_q = a.layout().qubits_of(keep);
  const auto rest_q = detail::complement_positions(keep_q, n);
  const auto keep_exp = detail::expand_table(keep_q, n);
  const auto rest_exp = detail::expand_table(rest_q, n);
  Mat out = Mat::Zero(keep_exp.size(), keep_exp.size());
  for (std::size_t r = 0; r < rest_exp.size(); ++r) {
    const std::size_t base = rest_exp[r];
    for (std::size_t i = 0; i < keep_exp.size(); ++i) {
      const cx ai = a.amplitudes()[base | keep_exp[i]];
      if (ai == cx{0.0, 0.0}) continue;
      for (std::size_t j = 0; j < keep_exp.size(); ++j)
        out(i, j) += ai * std::conj(b.amplitudes()[base | keep_exp[j]]);
    }
  }
  return out;
}

inline DensityMatrix partial_trace(const PureState& psi,
                                   const std::vector<std::string>& keep) {
  return DensityMatrix::unchecked(psi.layout().restricted(keep),
                                  cross_partial_trace(psi, psi, keep));
}

inline Eigen::VectorXd eigenvalues_of(const Mat& hermitian) {
  Eigen::SelfAdjointEigenSolver<Mat> es((hermitian + hermitian.adjoint()) / 2.0,
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Von Neumann entropy in bits; eigenvalues below 1e-12 contribute zero.
inline double vn_entropy(const DensityMatrix& rho) {
  const auto ev = eigenvalues_of(rho.matrix());
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > kEigClamp) s -= ev[i] * std::log2(ev[i]);
  return std::max(0.0, s);
}

/// Entanglement entropy of |psi> across the cut defined by `cut` vs the rest.
inline double entanglement_entropy(const PureState& psi,
                                   const std::vector<std::string>& cut) {
  return vn_entropy(partial_trace(psi, cut));
}

/// Min-entropy in bits: -log2 of the largest eigenvalue.
inline double min_entropy(const DensityMatrix& rho) {
  const auto ev = eigenvalues_of(rho.matrix());
  return -std::log2(std::max(ev.maxCoeff(), kEigClamp));
}

/// Full trace norm ||rho - sigma||_1, in [0, 2].
inline double trace_norm_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.layout().dim() != b.layout().dim())
    throw format_error("trace distance needs equal dimensions");
  const auto ev = eigenvalues_of(a.matrix() - b.matrix());
  return ev.cwiseAbs().sum();
}

inline Mat hermitian_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es((m + m.adjoint()) / 2.0);
  // Eigenvalues at the solver's noise floor are genuine zeros; keeping them
  // would inject sqrt(eps)-sized spurious weight into null directions.
  const double floor =
      std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0) * 1e-13;
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    ev[i] = ev[i] > floor ? ev[i] : 0.0;
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
}

/// Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.layout().dim() != b.layout().dim())
    throw format_error("fidelity needs equal dimensions");
  const Mat sq = hermitian_sqrt(a.matrix());
  const Mat inner = sq * b.matrix() * sq;
  Eigen::SelfAdjointEigenSolver<Mat> es((inner + inner.adjoint()) / 2.0,
                                        Eigen::EigenvaluesOnly);
  const double floor =
      std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300) * 1e-13;
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev > floor) tr += std::sqrt(ev);
  }
  return std::min(1.0, tr * tr);
}

/// Half-norm distance between pure states: sqrt(1 - |<psi|phi>|^2) in [0, 1].
inline double pure_state_distance(const PureState& psi, const PureState& phi) {
  if (psi.dim() != phi.dim()) throw format_error("pure distance needs equal dimensions");
  const double ov = std::norm(psi.amplitudes().dot(phi.amplitudes()));
  return std::sqrt(std::max(0.0, 1.0 - ov));
}

struct SchmidtDecomposition {
  std::vector<double> coefficients;  // descending, sum of squares = 1
  std::vector<Vec> left;             // states on the cut registers
  std::vector<Vec> right;            // states on the complement
  RegisterLayout left_layout;
  RegisterLayout right_layout;
};

/// Schmidt decomposition of |psi> across `cut` vs the remaining registers.
inline SchmidtDecomposition schmidt(const PureState& psi,
                                    const std::vector<std::string>& cut) {
  const int n = psi.qubits();
  const auto cut_q = psi.layout().qubits_of(cut);
  if (cut_q.empty() || cut_q.size() == static_cast<std::size_t>(n))
    throw format_error("Schmidt cut must be a proper nonempty register subset");
  const auto rest_q = detail::complement_positions(cut_q, n);
  const auto cut_exp = detail::expand_table(cut_q, n);
  const auto rest_exp = detail::expand_table(rest_q, n);
  Mat m(cut_exp.size(), rest_exp.size());
  for (std::size_t i = 0; i < cut_exp.size(); ++i)
    for (std::size_t j = 0; j < rest_exp.size(); ++j)
      m(i, j) = psi.amplitudes()[cut_exp[i] | rest_exp[j]];
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SchmidtDecomposition out;
  out.left_layout = psi.layout().restricted(cut);
  out.right_layout = psi.layout().restricted(psi.layout().complement(cut));
  for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
    const double s = svd.singularValues()[k];
    if (s < kEigClamp) continue;
    out.coefficients.push_back(s);
    out.left.push_back(svd.matrixU().col(k));
    out.right.push_back(svd.matrixV().col(k).conjugate());
  }
  return out;
}

/// Canonical purification: |psi> = sum_i sqrt(lambda_i) |v_i> (x) |i>, with the
/// eigenvalues sorted descending so a pure input purifies to itself (x) |0...0>.
inline PureState purify(const DensityMatrix& rho, const std::string& purifier_name) {
  if (rho.layout().has(purifier_name))
    throw format_error("purifier name collides with an existing register");
  Eigen::SelfAdjointEigenSolver<Mat> es((rho.matrix() + rho.matrix().adjoint()) / 2.0);
  const auto d = rho.dim();
  std::vector<int> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return es.eigenvalues()[a] > es.eigenvalues()[b];
  });
  Vec out = Vec::Zero(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    const double lam = std::max(0.0, es.eigenvalues()[order[r]]);
    if (lam < kEigClamp) continue;
    const Vec v = es.eigenvectors().col(order[r]);
    for (std::size_t x = 0; x < d; ++x) out[x * d + r] = std::sqrt(lam) * v[x];
  }
  RegisterLayout layout =
      rho.layout().concatenated(RegisterLayout::single(purifier_name, rho.qubits()));
  out.normalize();
  return PureState::unchecked(std::move(layout), std::move(out));
}

struct AlignmentResult {
  Mat unitary;              // acts on the purifier registers, layout order
  double achieved_fidelity; // |<psi| (I (x) U) |phi>|^2
};

/// Unitary on the purifier registers maximizing |<psi| (I (x) U) |phi>|.
/// The maximum equals the Uhlmann fidelity of the two reduced states on the
/// kept registers whenever the purifier is large enough to realize it.
inline AlignmentResult align_purification(const PureState& phi, const PureState& psi,
                                          const std::vector<std::string>& purifier) {
  if (phi.layout() != psi.layout())
    throw format_error("alignment needs matching layouts");
  const int n = phi.qubits();
  const auto pur_q = phi.layout().qubits_of(purifier);
  if (pur_q.empty()) throw format_error("purifier register set is empty");
  const auto kept_q = detail::complement_positions(pur_q, n);
  if (kept_q.empty()) throw format_error("purifier must leave a kept register");
  const auto pur_exp = detail::expand_table(pur_q, n);
  const auto kept_exp = detail::expand_table(kept_q, n);
  // A[p, p'] = sum_k phi[k, p] conj(psi[k, p']);  <psi|(I(x)U)|phi> = Tr(U A).
  Mat a = Mat::Zero(pur_exp.size(), pur_exp.size());
  for (std::size_t k = 0; k < kept_exp.size(); ++k)
    for (std::size_t p = 0; p < pur_exp.size(); ++p) {
      const cx ph = phi.amplitudes()[kept_exp[k] | pur_exp[p]];
      if (ph == cx{0.0, 0.0}) continue;
      for (std::size_t q = 0; q < pur_exp.size(); ++q)
        a(p, q) += ph * std::conj(psi.amplitudes()[kept_exp[k] | pur_exp[q]]);
    }
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat u = svd.matrixV() * svd.matrixU().adjoint();
  const double overlap = svd.singularValues().sum();
  const double achieved = std::min(1.0, overlap * overlap);
  const auto kept_names = phi.layout().complement(purifier);
  const double target =
      fidelity(partial_trace(phi, kept_names), partial_trace(psi, kept_names));
  if (achieved < target - 1e-6)
    throw format_error("purifier too small to align the purifications");
  return {u, achieved};
}

inline PureState apply_to_registers(const PureState& psi, const Mat& u,
                                    const std::vector<std::string>& regs) {
  Vec v = psi.amplitudes();
  apply_on_support(v, u, psi.layout().qubits_of(regs), psi.qubits());
  return PureState::unchecked(psi.layout(), std::move(v));
}

/// Continuity bound for |S(rho) - S(sigma)| given T = ||rho - sigma||_1 (full
/// norm) on dimension d: T*log2(d) - T*log2(T), with the eta term monotonized
/// to 0 for T >= 1 and capped at 1/(e ln 2).
inline double fannes_bound(double t, std::size_t d) {
  if (t <= 0.0) return 0.0;
  t = std::min(t, 2.0);
  const double log2d = std::log2(static_cast<double>(d));
  const double eta = t < 1.0 ? -t * std::log2(t) : 0.0;
  const double cap = 1.0 / (std::exp(1.0) * std::log(2.0));
  return std::min(t * log2d + eta, t * log2d + cap);
}

struct MeasurementOutcome {
  double probability = 0.0;
  std::optional<DensityMatrix> post;  // absent for zero-probability outcomes
};

/// Gentle measurement update: probability Tr(M rho) and post-measurement state
/// sqrt(M) rho sqrt(M) / Tr(M rho) for a POVM element 0 <= M <= I.
inline MeasurementOutcome post_measure(const DensityMatrix& rho, const Mat& m) {
  if (m.rows() != static_cast<Eigen::Index>(rho.dim()) || m.cols() != m.rows())
    throw format_error("POVM element dimension mismatch");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kTol)
    throw format_error("POVM element must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es((m + m.adjoint()) / 2.0);
  if (es.eigenvalues().minCoeff() < -kTol || es.eigenvalues().maxCoeff() > 1.0 + kTol)
    throw format_error("POVM element must satisfy 0 <= M <= I");
  const double prob = std::real((m * rho.matrix()).trace());
  MeasurementOutcome out;
  out.probability = std::max(0.0, prob);
  if (out.probability <= 1e-12) return out;
  const Mat sq = es.eigenvectors() *
                 es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                 es.eigenvectors().adjoint();
  Mat post = sq * rho.matrix() * sq / out.probability;
  out.post = DensityMatrix::unchecked(rho.layout(), (post + post.adjoint()) / 2.0);
  return out;
}

/// Acceptance probability of the SWAP test on |psi>, |phi>.
inline double swap_test_prob(const PureState& psi, const PureState& phi) {
  if (psi.dim() != phi.dim()) throw format_error("SWAP test needs equal dimensions");
  return 0.5 + 0.5 * std::norm(psi.amplitudes().dot(phi.amplitudes()));
}

}  // namespace lowent
