#pragma once

// Gate-sequence-to-Hamiltonian clock construction.  Given a channel's gate
// sequence V_1..V_T on registers A,B,E, builds
//
//   H = H_in + H_prop + H_clock
//
// on A,B,E plus a (T+L)-qubit unary clock register C, where L idle steps
// (V_t = I for t > T) are appended.  Zero-energy states are exactly the
// "history" states (1/sqrt(T+L+1)) sum_t (V_t..V_1 |psi,0,0>) |t>, one per
// input |psi>_A.
//
// Two encodings of the clock operators are provided: kAsWrittenUnary keeps
// every |t><t'| as a rank-1 operator on the whole clock register (faithful
// but exponential in T+L), and kKitaev3Local uses the standard 3-clock-qubit
// windows, giving locality <= 5.  Both agree on the span of legal clock
// states |t> = |1^t 0^{T+L-t}>.
//
// Key structural fact used throughout: the legal sector block-diagonalizes
// under the rotation R = sum_t (V_t..V_1) tensor |t><t| into tridiagonal
// "time blocks" M_p = E + p|0><0| indexed by the ancilla weight p, where E
// has diagonal (1,2,...,2,1) and off-diagonal -1.  Everything spectral
// (gap, low-energy enumeration) reduces to these (T+L+1)-dimensional
// matrices, so large idle counts stay cheap.  The illegal sector always has
// energy >= 1 (each illegal clock string contains "01").

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowent/channel.hpp"
#include "lowent/core.hpp"
#include "lowent/local_hamiltonian.hpp"

namespace lowent {

enum class ClockEncoding { kAsWrittenUnary, kKitaev3Local };

struct ClockConfig {
  int gate_steps = -1;  // T; -1 means "take the channel's step count"
  int idle_steps = 0;   // L
  ClockEncoding encoding = ClockEncoding::kKitaev3Local;
};

struct GapCertificate {
  double delta = 0.0;           // spectral gap of this instance
  double fitted_exponent = 0.0; // slope of log(delta) vs log(T+L+1)
  double fitted_log_constant = 0.0;
  bool fits_scaling = false;    // fitted_exponent >= -3.25
  std::vector<std::pair<int, double>> sweep;  // (L, delta)
};

// Compact representation of a legal-sector state: column t holds the system
// (A,B,E) amplitudes paired with clock state |t>.
struct SectorState {
  RegisterLayout system_layout;
  Mat columns;  // 2^{n_sys} rows, T+L+1 columns
  double squared_norm() const { return columns.squaredNorm(); }
};

namespace detail {

// Number of eigenvalues of the symmetric tridiagonal matrix strictly below x
// (Sturm sequence).
inline int tridiag_count_below(const Eigen::VectorXd& diag,
                               const Eigen::VectorXd& off, double x) {
  int count = 0;
  double q = diag[0] - x;
  if (q < 0) ++count;
  for (Eigen::Index i = 1; i < diag.size(); ++i) {
    double denom = q;
    if (std::abs(denom) < 1e-300) denom = denom < 0 ? -1e-300 : 1e-300;
    q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
    if (q < 0) ++count;
  }
  return count;
}

// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
inline double tridiag_eigenvalue(const Eigen::VectorXd& diag,
                                 const Eigen::VectorXd& off, int k) {
  double radius = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off[i - 1]);
    if (i < diag.size() - 1) r += std::abs(off[i]);
    radius = std::max(radius, std::abs(diag[i]) + r);
  }
  double lo = -radius, hi = radius;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tridiag_count_below(diag, off, mid) >= k + 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

class ClockHamiltonian {
 public:
  ClockHamiltonian(ChannelSpec channel, ClockConfig config)
      : channel_(std::move(channel)), config_(config) {
    if (config_.gate_steps < 0) config_.gate_steps = channel_.num_steps();
    if (config_.gate_steps != channel_.num_steps()) {
      throw format_error("gate step count disagrees with the channel");
    }
    if (config_.idle_steps < 0) throw format_error("idle steps must be >= 0");
    if (total_time() < 1) {
      throw format_error("clock register needs at least one qubit");
    }
    layout_ = channel_.layout().concatenated(
        RegisterLayout::single("C", total_time()));
  }

  const ChannelSpec& channel() const { return channel_; }
  const ClockConfig& config() const { return config_; }
  const RegisterLayout& layout() const { return layout_; }
  int total_time() const { return config_.gate_steps + config_.idle_steps; }
  int num_time_states() const { return total_time() + 1; }
  int num_ancillas() const { return channel_.n_b() + channel_.n_a() + channel_.n_b(); }

  const LocalHamiltonian& base() const {
    if (!base_) {
      base_.emplace(layout_, build_terms(), locality());
    }
    return *base_;
  }

  int locality() const {
    if (config_.encoding == ClockEncoding::kKitaev3Local) return 5;
    return 2 + total_time();
  }

  // --- Time-block spectra -------------------------------------------------

  // Diagonal/off-diagonal of M_p (dimension T+L+1).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> time_block(int penalty) const {
    const int n = num_time_states();
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, 2.0);
    diag[0] = 1.0 + penalty;
    diag[n - 1] = 1.0;
    Eigen::VectorXd off = Eigen::VectorXd::Constant(n - 1, -1.0);
    return {diag, off};
  }

  double time_block_eigenvalue(int penalty, int k) const {
    const auto [diag, off] = time_block(penalty);
    return detail::tridiag_eigenvalue(diag, off, k);
  }

  std::vector<double> time_block_eigenvalues(int penalty) const {
    const int n = num_time_states();
    if (n > 2500) throw budget_error("dense time-block eigensolve too large");
    const auto [diag, off] = time_block(penalty);
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      tri(i, i) = diag[i];
      if (i + 1 < n) tri(i, i + 1) = tri(i + 1, i) = off[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri,
                                                      Eigen::EigenvaluesOnly);
    return {es.eigenvalues().data(), es.eigenvalues().data() + n};
  }

  // Spectral gap: the legal sector contributes lambda_2(M_0) and
  // lambda_min(M_1) (M_p grows with p), the illegal sector sits at >= 1,
  // and both candidates are < 1.  Independent of the gates.
  double delta() const {
    return std::min(time_block_eigenvalue(0, 1), time_block_eigenvalue(1, 0));
  }

  GapCertificate certify_gap() const { return certify_gap({0, 2, 4, 8, 16}); }

  GapCertificate certify_gap(const std::vector<int>& idle_sweep) const {
    GapCertificate cert;
    cert.delta = delta();
    std::vector<double> log_n, log_d;
    for (int l : idle_sweep) {
      if (l < 0) throw format_error("idle lengths must be nonnegative");
      if (config_.gate_steps + l < 1) continue;
      ClockConfig cfg = config_;
      cfg.idle_steps = l;
      const ClockHamiltonian swept(channel_, cfg);
      const double d = swept.delta();
      cert.sweep.emplace_back(l, d);
      log_n.push_back(std::log(static_cast<double>(swept.num_time_states())));
      log_d.push_back(std::log(d));
    }
    if (log_n.size() < 2) {
      throw format_error("gap sweep needs at least two usable idle lengths");
    }
    const auto k = static_cast<double>(log_n.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      sx += log_n[i];
      sy += log_d[i];
      sxx += log_n[i] * log_n[i];
      sxy += log_n[i] * log_d[i];
    }
    cert.fitted_exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    cert.fitted_log_constant = (sy - cert.fitted_exponent * sx) / k;
    cert.fits_scaling = cert.fitted_exponent >= -3.25;
    return cert;
  }

  // --- Sector states ------------------------------------------------------

  // Columns profile[t] * (V_t..V_1 |system_state>).
  SectorState rotated_state(const Vec& system_state, const Vec& profile) const {
    const auto& sys = channel_.layout();
    if (system_state.size() != static_cast<Eigen::Index>(sys.dim())) {
      throw format_error("system state dimension mismatch");
    }
    if (profile.size() != num_time_states()) {
      throw format_error("time profile dimension mismatch");
    }
    Mat cols(system_state.size(), num_time_states());
    Vec v = system_state;
    cols.col(0) = profile[0] * v;
    for (int t = 1; t <= total_time(); ++t) {
      if (t <= config_.gate_steps) {
        const auto& s = channel_.steps()[t - 1];
        apply_on_support(v, s.unitary, s.support, sys.total_qubits());
      }
      cols.col(t) = profile[t] * v;
    }
    return SectorState{sys, std::move(cols)};
  }

  SectorState history_sector(const PureState& psi_a) const {
    if (psi_a.layout().total_qubits() != channel_.n_a()) {
      throw format_error("history input must live on register A");
    }
    const auto& sys = channel_.layout();
    Vec full = Vec::Zero(sys.dim());
    const std::size_t rest =
        std::size_t{1} << (sys.total_qubits() - channel_.n_a());
    for (Eigen::Index i = 0; i < psi_a.amplitudes().size(); ++i) {
      full[static_cast<std::size_t>(i) * rest] = psi_a.amplitudes()[i];
    }
    const double amp = 1.0 / std::sqrt(static_cast<double>(num_time_states()));
    return rotated_state(full, Vec::Constant(num_time_states(), amp));
  }

  // p = 0 sector state whose time profile is the level-th eigenvector of the
  // bare time block; level 0 reproduces the history state.
  SectorState excited_sector(const PureState& psi_a, int level) const {
    const int n = num_time_states();
    if (n > 2500) throw budget_error("dense time-block eigensolve too large");
    const auto [diag, off] = time_block(0);
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      tri(i, i) = diag[i];
      if (i + 1 < n) tri(i, i + 1) = tri(i + 1, i) = off[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    const auto& sys = channel_.layout();
    Vec full = Vec::Zero(sys.dim());
    const std::size_t rest =
        std::size_t{1} << (sys.total_qubits() - channel_.n_a());
    for (Eigen::Index i = 0; i < psi_a.amplitudes().size(); ++i) {
      full[static_cast<std::size_t>(i) * rest] = psi_a.amplitudes()[i];
    }
    return rotated_state(full, es.eigenvectors().col(level).cast<cx>());
  }

  // <state|H|state> evaluated from the legal-sector formula: ancilla
  // penalties at time 0 plus propagation mismatches; the clock penalty
  // vanishes on legal states.
  double sector_energy(const SectorState& state) const {
    const auto& sys = channel_.layout();
    if (state.system_layout != sys) throw format_error("sector layout mismatch");
    const int n_anc = sys.total_qubits() - channel_.n_a();
    const std::size_t anc_mask = (std::size_t{1} << n_anc) - 1;
    double acc = 0.0;
    for (Eigen::Index x = 0; x < state.columns.rows(); ++x) {
      const int w =
          __builtin_popcountll(static_cast<std::size_t>(x) & anc_mask);
      if (w > 0) acc += w * std::norm(state.columns(x, 0));
    }
    Vec tmp(state.columns.rows());
    for (int t = 0; t < total_time(); ++t) {
      tmp = state.columns.col(t);
      if (t < config_.gate_steps) {
        const auto& s = channel_.steps()[t];
        apply_on_support(tmp, s.unitary, s.support, sys.total_qubits());
      }
      acc += (tmp - state.columns.col(t + 1)).squaredNorm();
    }
    return acc;
  }

  // Tr_rest |x><y| on the kept system registers (the clock, orthonormal per
  // column, contributes a delta in t).
  Mat sector_cross_partial_trace(const SectorState& x, const SectorState& y,
                                 const std::vector<std::string>& keep) const {
    for (const auto& name : keep) {
      if (name == "C") throw format_error("clock register cannot be kept");
    }
    const auto& sys = channel_.layout();
    const std::size_t keep_dim =
        std::size_t{1} << sys.restricted(keep).total_qubits();
    Mat out = Mat::Zero(keep_dim, keep_dim);
    for (int t = 0; t < num_time_states(); ++t) {
      const auto a = PureState::unchecked(sys, x.columns.col(t));
      const auto b = PureState::unchecked(sys, y.columns.col(t));
      out += cross_partial_trace(a, b, keep);
    }
    return out;
  }

  DensityMatrix sector_partial_trace(const SectorState& state,
                                     const std::vector<std::string>& keep) const {
    Mat out = sector_cross_partial_trace(state, state, keep);
    return DensityMatrix::unchecked(channel_.layout().restricted(keep),
                                    (out + out.adjoint()) / 2.0);
  }

  PureState sector_dense(const SectorState& state) const {
    if (layout_.total_qubits() > 14) {
      throw budget_error("dense expansion beyond 14 qubits");
    }
    const int tl = total_time();
    Vec amp = Vec::Zero(layout_.dim());
    for (Eigen::Index x = 0; x < state.columns.rows(); ++x) {
      for (int t = 0; t <= tl; ++t) {
        amp[(static_cast<std::size_t>(x) << tl) | clock_basis_index(t)] =
            state.columns(x, t);
      }
    }
    return PureState::unchecked(layout_, std::move(amp));
  }

  PureState history_state(const PureState& psi_a) const {
    return sector_dense(history_sector(psi_a));
  }

  // Dense isometry whose columns are the history states of the A basis.
  Mat history_isometry() const {
    const std::size_t dim_a = std::size_t{1} << channel_.n_a();
    Mat w(layout_.dim(), dim_a);
    for (std::size_t x = 0; x < dim_a; ++x) {
      const auto basis =
          PureState::basis(RegisterLayout::single("A", channel_.n_a()), x);
      w.col(x) = history_state(basis).amplitudes();
    }
    return w;
  }

  // Projects rho onto the zero-energy span, renormalizes, and pulls the
  // mixture back through the history isometry; the certified distance bound
  // on the output marginal is 2 sqrt(beta/delta) + 2T/(T+L+1).
  std::pair<DensityMatrix, double> extract_witness(const DensityMatrix& rho,
                                                   double beta) const {
    if (rho.layout() != layout_) throw format_error("state layout mismatch");
    if (base().energy(rho) > beta + 1e-9) {
      throw format_error("state energy exceeds the claimed bound");
    }
    const Mat w = history_isometry();
    Mat pulled = w.adjoint() * rho.matrix() * w;
    const double weight = pulled.trace().real();
    if (weight <= 1e-12) {
      throw promise_error("no overlap with the zero-energy space");
    }
    pulled /= weight;
    const double n = num_time_states();
    const double bound =
        2.0 * std::sqrt(beta / delta()) + 2.0 * config_.gate_steps / n;
    return {DensityMatrix(RegisterLayout::single("A", channel_.n_a()),
                          (pulled + pulled.adjoint()) / 2.0),
            bound};
  }

  // All legal eigenstates with energy <= cutoff, ascending.  Requires
  // cutoff < 1 so the illegal sector stays out of reach.
  std::vector<std::pair<double, SectorState>> low_energy_sector(
      double cutoff) const {
    if (cutoff >= 1.0 - 1e-9) {
      throw format_error("low-energy enumeration requires cutoff < 1");
    }
    std::vector<std::pair<double, SectorState>> out;
    const auto& sys = channel_.layout();
    const int n_anc = sys.total_qubits() - channel_.n_a();
    const std::size_t dim_a = std::size_t{1} << channel_.n_a();
    const int n = num_time_states();
    // Profiles with eigenvalue <= cutoff per ancilla weight p.
    for (int p = 0; p <= n_anc; ++p) {
      if (time_block_eigenvalue(p, 0) > cutoff) {
        if (p >= 1) break;  // lambda_min(M_p) grows with p
        continue;
      }
      std::vector<std::pair<double, Vec>> profiles;
      if (p == 0 && time_block_eigenvalue(0, 1) > cutoff) {
        // Fast path: only the uniform zero mode qualifies.
        profiles.emplace_back(
            0.0, Vec::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))));
      } else {
        if (n > 2500) throw budget_error("dense time-block eigensolve too large");
        const auto [diag, off] = time_block(p);
        Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
          tri(i, i) = diag[i];
          if (i + 1 < n) tri(i, i + 1) = tri(i + 1, i) = off[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
        for (int k = 0; k < n && es.eigenvalues()[k] <= cutoff + 1e-12; ++k) {
          profiles.emplace_back(es.eigenvalues()[k],
                                es.eigenvectors().col(k).cast<cx>());
        }
      }
      if (profiles.empty()) continue;
      for (std::size_t z = 0; z < (std::size_t{1} << n_anc); ++z) {
        if (__builtin_popcountll(z) != p) continue;
        for (std::size_t a = 0; a < dim_a; ++a) {
          Vec basis = Vec::Zero(sys.dim());
          basis[(a << n_anc) | z] = 1.0;
          for (const auto& [lam, profile] : profiles) {
            out.emplace_back(lam, rotated_state(basis, profile));
            if (out.size() > 4096) {
              throw budget_error("low-energy space too large");
            }
          }
        }
      }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) {
                       return a.first < b.first;
                     });
    return out;
  }

  // Basis index of the unary clock string |1^t 0^{T+L-t}>.
  std::size_t clock_basis_index(int t) const {
    const int tl = total_time();
    return t == 0 ? 0
                  : ((std::size_t{1} << t) - 1) << (tl - t);
  }

 private:
  std::vector<LocalTerm> build_terms() const {
    return config_.encoding == ClockEncoding::kAsWrittenUnary
               ? build_terms_unary()
               : build_terms_3local();
  }

  std::vector<LocalTerm> build_terms_unary() const {
    const int tl = total_time();
    const int n_sys = channel_.layout().total_qubits();
    if (n_sys + tl > 12 || tl > 8) {
      throw budget_error("unary encoding terms beyond budget");
    }
    const std::size_t dim_c = std::size_t{1} << tl;
    std::vector<int> clock_qubits(tl);
    for (int i = 0; i < tl; ++i) clock_qubits[i] = n_sys + i;
    std::vector<LocalTerm> terms;
    // Ancilla penalties at time 0: |1><1|_a tensor |0...0><0...0|_C.
    Mat p0 = Mat::Zero(dim_c, dim_c);
    p0(clock_basis_index(0), clock_basis_index(0)) = 1.0;
    Mat one = Mat::Zero(2, 2);
    one(1, 1) = 1.0;
    for (int a = channel_.n_a(); a < n_sys; ++a) {
      std::vector<int> support = {a};
      support.insert(support.end(), clock_qubits.begin(), clock_qubits.end());
      terms.push_back({std::move(support), kron(one, p0)});
    }
    // Propagation terms.
    for (int t = 0; t < tl; ++t) {
      Mat hop = Mat::Zero(dim_c, dim_c);
      const std::size_t ct = clock_basis_index(t);
      const std::size_t ct1 = clock_basis_index(t + 1);
      Mat stay = Mat::Zero(dim_c, dim_c);
      stay(ct, ct) = stay(ct1, ct1) = 1.0;
      hop(ct1, ct) = 1.0;
      if (t < config_.gate_steps) {
        const auto& s = channel_.steps()[t];
        const std::size_t g = std::size_t{1} << s.support.size();
        Mat m = kron(Mat::Identity(g, g), stay) -
                kron(s.unitary, hop) - kron(s.unitary.adjoint(), hop.adjoint());
        std::vector<int> support = s.support;
        support.insert(support.end(), clock_qubits.begin(),
                       clock_qubits.end());
        terms.push_back({std::move(support), std::move(m)});
      } else {
        Mat m = stay - hop - hop.adjoint();
        terms.push_back({clock_qubits, std::move(m)});
      }
    }
    append_clock_penalties(terms);
    return terms;
  }

  std::vector<LocalTerm> build_terms_3local() const {
    const int tl = total_time();
    const int n_sys = channel_.layout().total_qubits();
    std::vector<LocalTerm> terms;
    // Ancilla penalties: |1><1|_a tensor |0><0| on the first clock qubit.
    Mat in_term = Mat::Zero(4, 4);
    in_term(2, 2) = 1.0;
    for (int a = channel_.n_a(); a < n_sys; ++a) {
      terms.push_back({{a, n_sys}, in_term});
    }
    for (int t = 0; t < tl; ++t) {
      // Clock window and the "stay"/"hop" operators on it.
      std::vector<int> window;
      Mat stay, hop;
      if (tl == 1) {
        window = {n_sys};
        stay = Mat::Identity(2, 2);
        hop = Mat::Zero(2, 2);
        hop(1, 0) = 1.0;
      } else if (t == 0) {
        window = {n_sys, n_sys + 1};
        stay = Mat::Zero(4, 4);
        stay(0, 0) = stay(2, 2) = 1.0;  // |00><00| + |10><10|
        hop = Mat::Zero(4, 4);
        hop(2, 0) = 1.0;  // |10><00|
      } else if (t == tl - 1) {
        window = {n_sys + tl - 2, n_sys + tl - 1};
        stay = Mat::Zero(4, 4);
        stay(2, 2) = stay(3, 3) = 1.0;  // |10><10| + |11><11|
        hop = Mat::Zero(4, 4);
        hop(3, 2) = 1.0;  // |11><10|
      } else {
        window = {n_sys + t - 1, n_sys + t, n_sys + t + 1};
        stay = Mat::Zero(8, 8);
        stay(4, 4) = stay(6, 6) = 1.0;  // |100><100| + |110><110|
        hop = Mat::Zero(8, 8);
        hop(6, 4) = 1.0;  // |110><100|
      }
      if (t < config_.gate_steps) {
        const auto& s = channel_.steps()[t];
        const std::size_t g = std::size_t{1} << s.support.size();
        Mat m = kron(Mat::Identity(g, g), stay) -
                kron(s.unitary, hop) - kron(s.unitary.adjoint(), hop.adjoint());
        std::vector<int> support = s.support;
        support.insert(support.end(), window.begin(), window.end());
        terms.push_back({std::move(support), std::move(m)});
      } else {
        Mat m = stay - hop - hop.adjoint();
        terms.push_back({std::move(window), std::move(m)});
      }
    }
    append_clock_penalties(terms);
    return terms;
  }

  void append_clock_penalties(std::vector<LocalTerm>& terms) const {
    const int tl = total_time();
    const int n_sys = channel_.layout().total_qubits();
    Mat penalty = Mat::Zero(4, 4);
    penalty(1, 1) = 1.0;  // |01><01|
    for (int i = 0; i + 1 < tl; ++i) {
      terms.push_back({{n_sys + i, n_sys + i + 1}, penalty});
    }
  }

  ChannelSpec channel_;
  ClockConfig config_;
  RegisterLayout layout_;
  mutable std::optional<LocalHamiltonian> base_;
};

inline ClockHamiltonian build_clock_hamiltonian(ChannelSpec channel,
                                                ClockConfig config) {
  return ClockHamiltonian(std::move(channel), config);
}

}  // namespace lowent
